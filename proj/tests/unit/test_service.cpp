#include <filesystem>
#include <random>
#include <thread>

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <httplib.h>

#include "ssr/service.hpp"
#include "test_util.hpp"

namespace ssr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

LoadedCheckpoint make_checkpoint(Scenario scenario, const std::string& tag) {
  ModelConfig m;
  m.width = 8;
  m.max_strokes = 6;
  m.memory_heads = 2;
  m.transformer_layers = 1;
  m.transformer_heads = 2;
  m.graph.k = 2;
  SsrModel model(m, ScenarioConfig::defaults_for(scenario), testing::toy_label_space(3, 4), 11);
  std::mt19937_64 rng(2);
  for (auto& p : model.params().all())
    for (double& v : p.tensor.mutable_values()) v += std::normal_distribution<double>(0, 0.3)(rng);
  const fs::path path = fs::temp_directory_path() / fmt::format("ssr_service_{}.ckpt", tag);
  save_checkpoint(path, model);
  LoadedCheckpoint ck = load_checkpoint(path);
  fs::remove(path);
  return ck;
}

json sample_request(double scale = 1.0, double shift = 0.0) {
  const double pts[][4][2] = {{{0.1, 0.1}, {0.4, 0.1}, {0.4, 0.4}, {0.1, 0.4}},
                              {{0.5, 0.5}, {0.9, 0.9}, {0.7, 0.95}, {0.6, 0.8}},
                              {{0.2, 0.8}, {0.3, 0.6}, {0.35, 0.9}, {0.25, 0.7}}};
  json strokes = json::array();
  for (const auto& s : pts) {
    json stroke = json::array();
    for (const auto& p : s) stroke.push_back({p[0] * scale + shift, p[1] * scale + shift});
    strokes.push_back(stroke);
  }
  return {{"strokes", strokes}};
}

TEST(RecognitionService, ResponseSchemaPerScenario) {
  for (auto scenario : {Scenario::kLabelsFull, Scenario::kPriorInfo, Scenario::kCategoryOnly}) {
    const RecognitionService service(make_checkpoint(scenario, to_string(scenario)));
    const auto r = service.recognize(sample_request());
    ASSERT_EQ(r.status, 200) << r.body.dump();
    const json& b = r.body;
    ASSERT_EQ(b.at("categories").size(), 3u);
    double total = 0, prev = 1.0;
    for (const auto& c : b.at("categories")) {
      EXPECT_LE(c.at("p").get<double>(), prev);
      prev = c.at("p").get<double>();
      total += prev;
      EXPECT_TRUE(c.at("name").is_string());
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    ASSERT_EQ(b.at("assignment").size(), 3u);
    for (const auto& row : b.at("assignment")) {
      ASSERT_EQ(row.size(), 4u);
      double s = 0;
      for (const auto& v : row) s += v.get<double>();
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    EXPECT_EQ(b.contains("stroke_components"), scenario == Scenario::kLabelsFull);
    EXPECT_EQ(b.contains("existence"), scenario == Scenario::kPriorInfo);
    if (scenario == Scenario::kLabelsFull) {
      ASSERT_EQ(b.at("stroke_components").size(), 3u);
      const auto& sc = b.at("stroke_components")[0];
      EXPECT_EQ(sc.at("name"), "part" + std::to_string(sc.at("id").get<std::size_t>()));
    }
    if (scenario == Scenario::kPriorInfo) EXPECT_EQ(b.at("existence").size(), 4u);
    const std::string top = b.at("categories")[0].at("name");
    EXPECT_EQ(b.at("explanation").get<std::string>().rfind("recognized as " + top, 0), 0u);
  }
}

TEST(RecognitionService, InvariantToUniformScalingAndShift) {
  const RecognitionService service(make_checkpoint(Scenario::kLabelsFull, "scale"));
  const json a = service.recognize(sample_request()).body;
  const json b = service.recognize(sample_request(1000.0, 37.0)).body;
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(a["categories"][c]["name"], b["categories"][c]["name"]);
    EXPECT_NEAR(a["categories"][c]["p"].get<double>(), b["categories"][c]["p"].get<double>(), 1e-9);
  }
  EXPECT_EQ(a["stroke_components"].size(), b["stroke_components"].size());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a["stroke_components"][i]["id"], b["stroke_components"][i]["id"]);
}

TEST(RecognitionService, RejectsBadRequests) {
  const RecognitionService service(make_checkpoint(Scenario::kLabelsFull, "bad"));
  EXPECT_EQ(service.recognize(std::string("{not json")).status, 400);
  EXPECT_EQ(service.recognize(json{{"lines", json::array()}}).status, 400);
  EXPECT_EQ(service.recognize(json{{"strokes", 3}}).status, 400);
  EXPECT_EQ(service.recognize(json{{"strokes", {{{0, 0}, {1}}}}}).status, 400);
  EXPECT_EQ(service.recognize(json{{"strokes", {{{0, 0}, {"a", 1}}}}}).status, 400);
  EXPECT_EQ(service.recognize(json::parse(R"({"strokes": []})")).status, 422);
  EXPECT_EQ(service.recognize(std::string(R"({"strokes": []})")).status, 422);
  EXPECT_EQ(service.recognize(std::string(R"({"strokes": [[[0, 0]], []]})")).status, 422);
  json many = json::array();
  for (int i = 0; i < 7; ++i) many.push_back(json::array({json::array({i, i})}));
  const auto r = service.recognize(json{{"strokes", many}});
  EXPECT_EQ(r.status, 422);
  EXPECT_NE(r.body.at("error").get<std::string>().find("at most 6"), std::string::npos);
}

TEST(RecognitionService, ModelInfo) {
  const RecognitionService service(make_checkpoint(Scenario::kPriorInfo, "info"));
  const json info = service.model_info();
  EXPECT_EQ(info.at("scenario"), "prior_info");
  EXPECT_EQ(info.at("token_path"), "component");
  EXPECT_EQ(info.at("dims").at("width"), 8);
  EXPECT_EQ(info.at("checkpoint_hash").get<std::string>().size(), 16u);
  EXPECT_EQ(info.at("label_space").at("categories").size(), 3u);
}

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    service_ = std::make_unique<RecognitionService>(make_checkpoint(Scenario::kLabelsFull, "http"));
    server_ = std::make_unique<HttpServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    thread_ = std::thread([this] { server_->listen(); });
    httplib::Client probe("127.0.0.1", port_);
    for (int i = 0; i < 200 && !probe.Get("/healthz"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }
  std::unique_ptr<RecognitionService> service_;
  std::unique_ptr<HttpServer> server_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, Endpoints) {
  httplib::Client cli("127.0.0.1", port_);
  const auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(json::parse(health->body), json({{"status", "ok"}}));
  EXPECT_EQ(health->get_header_value("Access-Control-Allow-Origin"), "*");

  const auto model = cli.Get("/model");
  ASSERT_TRUE(model);
  EXPECT_EQ(json::parse(model->body).at("scenario"), "labels_full");

  const auto ok = cli.Post("/recognize", sample_request().dump(), "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(json::parse(ok->body), service_->recognize(sample_request()).body);

  const auto empty = cli.Post("/recognize", R"({"strokes": []})", "application/json");
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->status, 422);
  const auto bad = cli.Post("/recognize", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("error"));

  const auto pre = cli.Options("/recognize");
  ASSERT_TRUE(pre);
  EXPECT_EQ(pre->status, 204);
}

TEST_F(HttpTest, ConcurrentRequestsAgree) {
  const std::string body = sample_request().dump();
  std::vector<std::string> results(8);
  std::vector<std::thread> clients;
  for (std::size_t t = 0; t < results.size(); ++t) {
    clients.emplace_back([&, t] {
      httplib::Client cli("127.0.0.1", port_);
      for (int i = 0; i < 5; ++i) {
        const auto r = cli.Post("/recognize", body, "application/json");
        if (!r || r->status != 200) {
          results[t] = "failed";
          return;
        }
        if (i == 0) {
          results[t] = r->body;
        } else if (r->body != results[t]) {
          results[t] = "changed";
          return;
        }
      }
    });
  }
  for (auto& c : clients) c.join();
  for (const auto& r : results) EXPECT_EQ(r, results[0]);
  EXPECT_NE(results[0], "failed");
}

TEST_F(HttpTest, BusyPortIsReported) {
  HttpServer second(*service_);
  EXPECT_THROW(second.bind("127.0.0.1", port_), std::runtime_error);
}

}  // namespace
}  // namespace ssr
