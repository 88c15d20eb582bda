#include "vizprompt/service.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vizprompt/registry.hpp"
#include "vizprompt/session.hpp"

namespace vizprompt {

namespace {

void reply(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  nlohmann::ordered_json body;
  body["code"] = std::string(code);
  body["message"] = message;
  reply(res, status, body);
}

/// Parses a JSON object body, or answers 422 and returns nullopt.
std::optional<nlohmann::json> object_body(const httplib::Request& req, httplib::Response& res) {
  auto doc = nlohmann::json::parse(req.body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    fail(res, 422, "InvalidBody", "request body must be a JSON object");
    return std::nullopt;
  }
  return doc;
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  std::shared_ptr<llm::Provider> provider;
  llm::Sleeper sleeper;
  DatasetRegistry registry;
  SessionStore store;
  httplib::Server server;

  Impl(ServiceConfig c, std::shared_ptr<llm::Provider> p, llm::Sleeper s)
      : config(std::move(c)),
        provider(std::move(p)),
        sleeper(std::move(s)),
        registry((std::filesystem::create_directories(config.datasets_dir()),
                  config.datasets_dir())),
        store(config.state_dir) {
    store.load_all(registry);
    routes();
  }

  void routes() {
    if (config.cors_allowed_origin) {
      server.set_default_headers({{"Access-Control-Allow-Origin", *config.cors_allowed_origin},
                                  {"Access-Control-Allow-Headers", "Content-Type"},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
      server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.status = 204;
      });
    }
    server.set_exception_handler(
        [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
          try {
            std::rethrow_exception(ep);
          } catch (const std::exception& e) {
            fail(res, 500, "InternalError", e.what());
          } catch (...) {
            fail(res, 500, "InternalError", "unknown error");
          }
        });

    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"status", "ok"}});
    });

    server.Get("/datasets", [this](const httplib::Request&, httplib::Response& res) {
      auto list = nlohmann::ordered_json::array();
      for (const auto& id : registry.ids()) {
        try {
          list.push_back(schema_json(*registry.get(id)));
        } catch (const DataError&) {
          // Unreadable files stay out of the listing.
        }
      }
      nlohmann::ordered_json body;
      body["datasets"] = std::move(list);
      reply(res, 200, body);
    });

    server.Post("/datasets", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("file")) {
        fail(res, 422, "InvalidBody", "expected multipart form data with a 'file' part");
        return;
      }
      const auto file = req.get_file_value("file");
      std::string id = req.has_file("id") ? req.get_file_value("id").content
                                          : std::filesystem::path(file.filename).stem().string();
      if (!DatasetRegistry::valid_id(id)) {
        fail(res, 422, "InvalidDatasetId", "dataset id '" + id + "' is not allowed");
        return;
      }
      if (registry.find(id)) {
        fail(res, 409, "DatasetExists", "dataset '" + id + "' already exists");
        return;
      }
      try {
        reply(res, 201, schema_json(*registry.add_csv(id, file.content)));
      } catch (const DataError& e) {
        fail(res, 422, "InvalidDataset", e.what());
      }
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = object_body(req, res);
      if (!body) return;
      if (!body->contains("dataset_id") || !(*body)["dataset_id"].is_string()) {
        fail(res, 422, "InvalidBody", "dataset_id (string) is required");
        return;
      }
      std::uint64_t seed = config.default_seed;
      if (body->contains("seed") && !(*body)["seed"].is_null()) {
        if (!(*body)["seed"].is_number_unsigned()) {
          fail(res, 422, "InvalidBody", "seed must be an unsigned integer");
          return;
        }
        seed = (*body)["seed"].get<std::uint64_t>();
      }
      const auto dataset_id = (*body)["dataset_id"].get<std::string>();
      auto dataset = registry.find(dataset_id);
      if (!dataset) {
        fail(res, 404, "UnknownDataset", "no dataset '" + dataset_id + "'");
        return;
      }
      auto session = store.create(std::move(dataset), seed);
      nlohmann::ordered_json out;
      out["session_id"] = session->id();
      out["dataset_id"] = session->dataset_id();
      out["seed"] = session->subset_seed();
      reply(res, 201, out);
    });

    server.Post(R"(/sessions/([^/]+)/query)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  query(req.matches[1].str(), req, res);
                });

    server.Get(R"(/sessions/([^/]+)/history)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto session = store.find(req.matches[1].str());
                 if (!session) {
                   fail(res, 404, "UnknownSession", "no session '" + req.matches[1].str() + "'");
                   return;
                 }
                 nlohmann::ordered_json out;
                 out["session_id"] = session->id();
                 out["dataset_id"] = session->dataset_id();
                 auto turns = nlohmann::ordered_json::array();
                 for (const auto& t : session->turns()) turns.push_back(to_json(t));
                 out["turns"] = std::move(turns);
                 reply(res, 200, out);
               });
  }

  void query(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    auto session = store.find(id);
    if (!session) {
      fail(res, 404, "UnknownSession", "no session '" + id + "'");
      return;
    }
    auto body = object_body(req, res);
    if (!body) return;
    if (!body->contains("query") || !(*body)["query"].is_string()) {
      fail(res, 422, "InvalidBody", "query (string) is required");
      return;
    }
    QueryMode mode = QueryMode::Initial;
    if (body->contains("mode")) {
      const auto parsed =
          (*body)["mode"].is_string() ? parse_query_mode((*body)["mode"].get<std::string>())
                                      : std::nullopt;
      if (!parsed) {
        fail(res, 422, "InvalidBody", "mode must be Initial or FollowUp");
        return;
      }
      mode = *parsed;
    }

    PipelineOptions options = config.pipeline_options();
    options.sleeper = sleeper;
    Turn turn;
    try {
      turn = session->ask((*body)["query"].get<std::string>(), mode, *provider, config.provider,
                          options);
    } catch (const NoPriorSpecification& e) {
      fail(res, 409, "NoPriorSpecification", e.what());
      return;
    } catch (const std::invalid_argument& e) {
      fail(res, 422, "EmptyQuery", e.what());
      return;
    }
    store.save(*session);

    nlohmann::ordered_json out;
    out["turn"] = to_json(turn);
    if (turn.error && turn.error->code == "ProviderError") {
      out["code"] = "ProviderError";
      out["message"] = turn.error->message;
      reply(res, 502, out);
    } else if (turn.error && turn.error->code == "TokenBudgetExceeded") {
      out["code"] = turn.error->code;
      out["message"] = turn.error->message;
      reply(res, 422, out);
    } else {
      reply(res, 200, out);
    }
  }
};

Service::Service(ServiceConfig config, std::shared_ptr<llm::Provider> provider,
                 llm::Sleeper sleeper)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(provider), std::move(sleeper))) {}

Service::~Service() { stop(); }

int Service::bind() {
  const std::string host = impl_->config.host();
  const int port = impl_->config.port();
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + impl_->config.listen_address);
  }
  return port;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_) impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

}  // namespace vizprompt
