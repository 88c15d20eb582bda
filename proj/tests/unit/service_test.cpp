#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "support.hpp"
#include "vizprompt/registry.hpp"
#include "vizprompt/service.hpp"

using namespace vizprompt;
using namespace testing_support;

namespace {

std::string reply(const std::string& name) {
  for (const auto& e : read_json(fixtures() / "replies" / "pack.json")) {
    if (e["name"] == name) return e["reply"];
  }
  throw std::runtime_error("no reply " + name);
}

const std::string kQuery = "Show average IMDb Rating by Genre";

/// Service on a free port over a temp state dir, driven by an in-process mock.
class Harness {
 public:
  explicit Harness(std::optional<std::string> cors = std::nullopt) {
    ServiceConfig config;
    config.listen_address = "127.0.0.1:0";
    config.state_dir = state_.path();
    config.cors_allowed_origin = std::move(cors);
    config.provider.max_retries = 1;
    service_ = std::make_unique<Service>(config, mock_, [](std::chrono::milliseconds) {});
    port_ = service_->bind();
    thread_ = std::thread([this] { service_->serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 200 && !service_->running(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  ~Harness() {
    service_->stop();
    thread_.join();
  }

  httplib::Client& client() { return *client_; }
  llm::MockProvider& mock() { return *mock_; }
  const TempDir& state() const { return state_; }

  httplib::Result post_json(const std::string& path, const nlohmann::json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }

  httplib::Result upload(const std::string& id, const std::string& filename, const std::string& csv) {
    httplib::MultipartFormDataItems items = {{"file", csv, filename, "text/csv"}};
    if (!id.empty()) items.push_back({"id", id, "", ""});
    return client_->Post("/datasets", items);
  }

  std::string create_session(const std::string& dataset, std::uint64_t seed) {
    auto res = post_json("/sessions", {{"dataset_id", dataset}, {"seed", seed}});
    if (!res || res->status != 201) throw std::runtime_error("session create failed");
    return nlohmann::json::parse(res->body)["session_id"];
  }

  /// Prompt the service will send for a given dataset, seed and query.
  std::string initial_prompt(const std::string& dataset, std::uint64_t seed, const std::string& q) {
    DatasetRegistry reg(state_.path() / "datasets");
    PromptConfig config;
    config.seed = seed;
    return render(assemble(*reg.get(dataset), std::vector<std::string>{q}, config));
  }

 private:
  TempDir state_;
  std::shared_ptr<llm::MockProvider> mock_ = std::make_shared<llm::MockProvider>();
  std::unique_ptr<Service> service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

nlohmann::json body_of(const httplib::Result& res) { return nlohmann::json::parse(res->body); }

}  // namespace

TEST(Service, HealthAndEmptyListing) {
  Harness h;
  auto res = h.client().Get("/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(body_of(res)["status"], "ok");
  res = h.client().Get("/datasets");
  EXPECT_EQ(body_of(res)["datasets"].size(), 0u);
}

TEST(Service, UploadQueryAndHistory) {
  Harness h;
  auto up = h.upload("", "movies.csv", read_file(datasets() / "movies.csv"));
  ASSERT_TRUE(up);
  ASSERT_EQ(up->status, 201) << up->body;
  const auto schema = body_of(up);
  EXPECT_EQ(schema["id"], "movies");
  EXPECT_FALSE(schema["attributes"].empty());
  EXPECT_EQ(body_of(h.client().Get("/datasets"))["datasets"].size(), 1u);
  EXPECT_EQ(h.upload("", "movies.csv", "a,b\n1,2\n")->status, 409);

  const auto sid = h.create_session("movies", 3);
  h.mock().add_reply_for_prompt(h.initial_prompt("movies", 3, kQuery), reply("valid"));
  auto res = h.post_json("/sessions/" + sid + "/query", {{"query", kQuery}, {"mode", "Initial"}});
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  const auto turn = body_of(res)["turn"];
  EXPECT_FALSE(turn["specification"]["visList"].empty());
  EXPECT_NE(turn["report"]["verdict"], "Invalid");

  res = h.client().Get(("/sessions/" + sid + "/history").c_str());
  ASSERT_EQ(res->status, 200);
  const auto history = body_of(res);
  EXPECT_EQ(history["session_id"], sid);
  EXPECT_EQ(history["dataset_id"], "movies");
  ASSERT_EQ(history["turns"].size(), 1u);
  EXPECT_EQ(history["turns"][0]["query"], kQuery);
  EXPECT_TRUE(std::filesystem::exists(h.state() / ("sessions/" + sid + ".json")));
}

TEST(Service, UploadRejections) {
  Harness h;
  EXPECT_EQ(h.client().Post("/datasets", "{}", "application/json")->status, 422);
  EXPECT_EQ(h.upload("../etc", "x.csv", "a\n1\n")->status, 422);
  EXPECT_EQ(h.upload("empty", "x.csv", "")->status, 422);
}

TEST(Service, SessionErrors) {
  Harness h;
  auto res = h.post_json("/sessions", {{"dataset_id", "nope"}});
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(body_of(res)["code"], "UnknownDataset");
  EXPECT_EQ(h.client().Post("/sessions", "[1]", "application/json")->status, 422);
  EXPECT_EQ(h.post_json("/sessions", {{"dataset_id", 5}})->status, 422);
  EXPECT_EQ(h.post_json("/sessions/none/query", {{"query", "q"}})->status, 404);
  EXPECT_EQ(h.client().Get("/sessions/none/history")->status, 404);
}

TEST(Service, QueryErrors) {
  Harness h;
  ASSERT_EQ(h.upload("movies", "m.csv", read_file(datasets() / "movies.csv"))->status, 201);
  const auto sid = h.create_session("movies", 1);
  const std::string path = "/sessions/" + sid + "/query";

  auto res = h.post_json(path, {{"query", "Remove the color"}, {"mode", "FollowUp"}});
  EXPECT_EQ(res->status, 409);
  EXPECT_EQ(body_of(res)["code"], "NoPriorSpecification");
  EXPECT_EQ(h.post_json(path, {{"query", "q"}, {"mode", "Sideways"}})->status, 422);
  EXPECT_EQ(h.post_json(path, {{"mode", "Initial"}})->status, 422);
  EXPECT_EQ(h.post_json(path, {{"query", "   "}})->status, 422);

  h.mock().add(llm::prompt_digest(h.initial_prompt("movies", 1, kQuery)),
               {llm::ProviderError(llm::ErrorKind::HttpError, "overloaded", 503)});
  res = h.post_json(path, {{"query", kQuery}});
  EXPECT_EQ(res->status, 502);
  EXPECT_EQ(body_of(res)["code"], "ProviderError");
  EXPECT_EQ(body_of(res)["turn"]["attempts"], 2);
}

TEST(Service, SessionsSurviveRestart) {
  TempDir keep;
  std::string sid;
  {
    Harness h;
    ASSERT_EQ(h.upload("movies", "m.csv", read_file(datasets() / "movies.csv"))->status, 201);
    sid = h.create_session("movies", 4);
    std::filesystem::copy(h.state().path(), keep.path(), std::filesystem::copy_options::recursive);
  }
  ServiceConfig config;
  config.listen_address = "127.0.0.1:0";
  config.state_dir = keep.path();
  Service service(config, std::make_shared<llm::MockProvider>());
  const int port = service.bind();
  std::thread t([&] { service.serve(); });
  httplib::Client client("127.0.0.1", port);
  auto res = client.Get(("/sessions/" + sid + "/history").c_str());
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  service.stop();
  t.join();
}

TEST(Service, Cors) {
  Harness h("http://localhost:5173");
  auto res = h.client().Get("/health");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  res = h.client().Options("/sessions");
  EXPECT_EQ(res->status, 204);

  Harness plain;
  EXPECT_FALSE(plain.client().Get("/health")->has_header("Access-Control-Allow-Origin"));
}
