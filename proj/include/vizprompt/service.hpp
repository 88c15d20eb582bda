#pragma once

#include <memory>

#include "vizprompt/config.hpp"
#include "vizprompt/llm_client.hpp"

namespace vizprompt {

/// JSON HTTP front end over the registry, the session store and a provider.
///
///   GET  /health                  {"status":"ok"}
///   GET  /datasets                {"datasets":[schema...]}
///   POST /datasets                multipart `file` (+ optional `id`) -> schema
///   POST /sessions                {dataset_id, seed?} -> {session_id, ...}
///   POST /sessions/{id}/query     {query, mode} -> {turn}
///   GET  /sessions/{id}/history   {session_id, dataset_id, turns}
///
/// Errors are `{code, message}`: 404 unknown dataset/session, 409 FollowUp
/// without a prior specification or a taken dataset id, 422 bad body,
/// 502 provider failure.
class Service {
 public:
  Service(ServiceConfig config, std::shared_ptr<llm::Provider> provider,
          llm::Sleeper sleeper = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listen address; port 0 picks a free port. Returns the port.
  int bind();
  /// Serves until stop(). Requires bind().
  void serve();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vizprompt
