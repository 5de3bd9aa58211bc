#include <doctest.h>

#include <memory>
#include <sstream>
#include <thread>

#include "cvner/eval.hpp"
#include "cvner/fixture.hpp"
#include "cvner/service.hpp"
#include "cvner/split.hpp"
#include "cvner/text.hpp"
#include "cvner/utf8.hpp"
#include "support.hpp"

#include <httplib.h>

using namespace cvner;
using json = nlohmann::json;

namespace {

/// A live server on an ephemeral port plus a client bound to it.
class TestServer {
 public:
  explicit TestServer(const std::filesystem::path& root) : service_(root) {
    service_.mount(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60, 0);
  }
  ~TestServer() {
    service_.wait_for_jobs();
    server_.stop();
    thread_.join();
  }

  struct Reply {
    int status = 0;
    json body;
    std::string raw;
  };

  Reply get(const std::string& path) { return wrap(client_->Get(path)); }
  Reply post(const std::string& path, const json& body) {
    return wrap(client_->Post(path, body.dump(), "application/json"));
  }
  Reply post_raw(const std::string& path, const std::string& body, const std::string& type) {
    return wrap(client_->Post(path, body, type));
  }

  Service& service() { return service_; }

 private:
  static Reply wrap(const httplib::Result& r) {
    REQUIRE(r);
    Reply out{r->status, json(), r->body};
    if (r->get_header_value("Content-Type").find("json") != std::string::npos &&
        r->get_header_value("Content-Type").find("ndjson") == std::string::npos) {
      out.body = json::parse(r->body);
    }
    return out;
  }

  Service service_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

std::string error_code(const TestServer::Reply& r) { return r.body["error"]["code"].get<std::string>(); }

json dataset_json(const Dataset& ds) {
  json docs = json::array();
  for (const auto& d : ds.documents) docs.push_back(json::parse(to_json(d).dump()));
  return {{"schema_version", 1}, {"documents", docs}};
}

/// Every entity type in every split, small enough for quick rounds.
Dataset compact_gold() {
  FixtureProfile p;
  p.fields = {"a", "b"};
  p.field_docs = {std::vector<std::size_t>{14, 14}, {3, 3}, {3, 3}};
  p.labels[0].fill(60);
  p.labels[1].fill(14);
  p.labels[2].fill(14);
  return generate_fixture(p, 5).dataset;
}

const Section& find_section(const Dataset& ds, const std::string& id) {
  for (const auto& d : ds.documents)
    for (const auto& s : d.sections)
      if (s.id == id) return s;
  throw std::out_of_range(id);
}

json spans_json(const std::vector<EntitySpan>& spans) {
  json out = json::array();
  for (const auto& s : spans) out.push_back(json::parse(to_json(s).dump()));
  return out;
}

/// Reviews every pending item of `pass` with the gold spans.
void review_pass(TestServer& srv, const std::string& base, const Dataset& gold, int pass,
                 std::size_t leave_pending = 0) {
  while (true) {
    const auto next = srv.get(base + "/queue/next?pass=" + std::to_string(pass));
    REQUIRE(next.status == 200);
    if (next.body["exhausted"].get<bool>()) return;
    const auto& progress = next.body["progress"];
    if (progress["total"].get<std::size_t>() - progress["done"].get<std::size_t>() <= leave_pending) return;
    const auto& item = next.body["item"];
    const std::string sid = item["section_id"];
    const auto r = srv.post(base + "/sections/" + sid + "/review",
                            {{"revision", item["revision"]}, {"spans", spans_json(find_section(gold, sid).spans)}});
    REQUIRE(r.status == 200);
  }
}

json wait_for_job(TestServer& srv, const std::string& base, const std::string& job) {
  srv.service().wait_for_jobs();
  const auto r = srv.get(base + "/jobs/" + job);
  REQUIRE(r.status == 200);
  return r.body;
}

}  // namespace

TEST_CASE("annotation loop over HTTP") {
  testing::TempDir root;
  const Dataset gold = compact_gold();
  Dataset blank = gold;
  for (auto& d : blank.documents)
    for (auto& s : d.sections) s.spans.clear();
  const std::string base = "/projects/demo";
  const auto project_dir = root.path() / "demo";
  auto unchanged = [&](const std::map<std::string, std::string>& before) {
    CHECK(testing::tree_digest(project_dir) == before);
  };

  json first_view;
  json listing;
  {
    TestServer srv(root.path());
    const json create = {{"project_id", "demo"},
                         {"dataset", dataset_json(blank)},
                         {"config", {{"seed_fraction", 0.25}, {"max_epochs", 15}, {"patience", 3}}}};
    auto r = srv.post("/projects", create);
    REQUIRE(r.status == 201);
    CHECK(r.body["project_id"] == "demo");
    CHECK(r.body["state"] == "CREATED");

    CHECK(srv.post("/projects", create).status == 409);
    CHECK(srv.get("/projects/missing").status == 404);
    CHECK(error_code(srv.get("/projects/missing")) == "NOT_FOUND");
    CHECK(srv.get("/nowhere").status == 404);
    CHECK(srv.post_raw("/projects", "{", "application/json").status == 422);

    auto before = testing::tree_digest(project_dir);
    r = srv.post(base + "/stages/train", json::object());
    CHECK(r.status == 409);
    CHECK(error_code(r) == "STATE_VIOLATION");
    unchanged(before);
    CHECK(srv.post(base + "/stages/unknown", json::object()).status == 404);

    REQUIRE(srv.post(base + "/stages/seed-annotate", json::object()).status == 200);

    const auto next = srv.get(base + "/queue/next?pass=1");
    REQUIRE(next.status == 200);
    CHECK_FALSE(next.body["exhausted"].get<bool>());
    const json item = next.body["item"];
    const std::string sid = item["section_id"];
    const std::size_t len = utf8::length(item["text"].get<std::string>());
    CHECK(item["proposals"].is_array());
    CHECK(item["tokens"].size() == tokenize(item["text"].get<std::string>()).size());

    before = testing::tree_digest(project_dir);
    r = srv.post(base + "/sections/" + sid + "/review",
                 {{"revision", item["revision"]},
                  {"spans", json::array({{{"start", 0}, {"end", len + 2}, {"type", "SKILL"}}})}});
    CHECK(r.status == 422);
    CHECK(error_code(r) == "SPAN_OUT_OF_BOUNDS");
    CHECK(r.body["error"]["context"]["end"] == std::to_string(len + 2));
    CHECK(r.body["error"]["context"]["start"] == "0");
    unchanged(before);

    CHECK(srv.post(base + "/sections/" + sid + "/review", {{"spans", json::array()}}).status == 422);

    r = srv.post(base + "/sections/" + sid + "/review", {{"revision", item["revision"]}, {"spans", json::array()}});
    CHECK(r.status == 200);
    CHECK(r.body["state"] == "REVIEW1_IN_PROGRESS");
    before = testing::tree_digest(project_dir);
    r = srv.post(base + "/sections/" + sid + "/review", {{"revision", item["revision"]}, {"spans", json::array()}});
    CHECK(r.status == 409);
    CHECK(error_code(r) == "VERSION_CONFLICT");
    unchanged(before);
    r = srv.post(base + "/sections/" + sid + "/review",
                 {{"revision", item["revision"].get<int>() + 1}, {"spans", spans_json(find_section(gold, sid).spans)}});
    CHECK(r.status == 200);

    review_pass(srv, base, gold, 1);
    const auto done = srv.get(base + "/queue/next?pass=1");
    CHECK(done.body["exhausted"].get<bool>());
    CHECK(done.body["item"].is_null());
    CHECK(done.body["progress"]["done"] == done.body["progress"]["total"]);
    CHECK(done.body["state"] == "REVIEW1_DONE");

    r = srv.post(base + "/stages/train", json::object());
    REQUIRE(r.status == 202);
    const std::string job = r.body["job_id"];
    const json status = wait_for_job(srv, base, job);
    CHECK(status["status"] == "succeeded");
    CHECK(status["best_dev_f1"].get<double>() >= 0.0);
    CHECK(status["dev_f1_history"].size() == status["epochs_run"]);
    CHECK(srv.get(base + "/jobs/none").status == 404);
    CHECK(srv.get(base).body["state"] == "MODEL_TRAINED");

    REQUIRE(srv.post(base + "/stages/model-annotate", json::object()).status == 200);
    review_pass(srv, base, gold, 2, 1);

    const SplitAssignment assignment = stratified_split(blank, SplitConfig{}).assignment;
    Predictions perfect;
    for (const auto& d : gold.documents)
      if (assignment.at(d.id) == Split::Test)
        for (const auto& s : d.sections) perfect[s.id] = s.spans;
    std::ostringstream preds;
    write_predictions(preds, perfect);
    r = srv.post_raw(base + "/predictions", preds.str(), "application/x-ndjson");
    CHECK(r.status == 200);

    before = testing::tree_digest(project_dir);
    r = srv.get(base + "/metrics?against=TEST");
    CHECK(r.status == 409);
    CHECK(srv.get(base + "/export").status == 409);
    r = srv.post(base + "/stages/finalize", json::object());
    CHECK(r.status == 409);
    CHECK(r.body["error"]["context"].contains("section_id"));
    unchanged(before);

    review_pass(srv, base, gold, 2);
    CHECK(srv.get(base).body["state"] == "FINALIZED");
    r = srv.post(base + "/stages/finalize", json::object());
    CHECK(r.status == 200);

    const auto exported = srv.get(base + "/export");
    CHECK(exported.status == 200);
    CHECK(exported.raw == serialize_dataset(gold));

    r = srv.get(base + "/metrics?against=TEST");
    REQUIRE(r.status == 200);
    CHECK(r.body["micro_f1"] == 100.0);
    CHECK(r.body["macro_f1"] == 100.0);
    CHECK(r.body["weighted_f1"] == 100.0);
    for (const auto& row : r.body["per_type"]) CHECK(row["f1"] == 100.0);

    std::string broken;
    std::istringstream lines(preds.str());
    std::string line;
    for (int n = 1; std::getline(lines, line); ++n) broken += (n == 7 ? std::string("{\"section_id\": ") : line) + "\n";
    before = testing::tree_digest(project_dir);
    r = srv.post_raw(base + "/predictions", broken, "application/x-ndjson");
    CHECK(r.status == 422);
    CHECK(r.body["error"]["context"]["line"] == "7");
    unchanged(before);

    first_view = srv.get(base).body;
    listing = srv.get("/projects").body;
  }

  TestServer restarted(root.path());
  CHECK(restarted.get(base).body == first_view);
  CHECK(restarted.get("/projects").body == listing);
  CHECK(restarted.get(base + "/export").raw == serialize_dataset(gold));
}

TEST_CASE("training locks the project") {
  testing::TempDir root;
  TestServer srv(root.path());
  const Fixture fx = generate_fixture(FixtureProfile::published(), 3);
  const std::string base = "/projects/big";
  const json create = {{"project_id", "big"},
                       {"dataset", dataset_json(fx.dataset)},
                       {"config", {{"seed_fraction", 1.0}, {"max_epochs", 40}, {"patience", 40}}}};
  REQUIRE(srv.post("/projects", create).status == 201);
  REQUIRE(srv.post(base + "/stages/seed-annotate", json::object()).status == 200);
  review_pass(srv, base, fx.dataset, 1);

  auto r = srv.post(base + "/stages/train", json::object());
  REQUIRE(r.status == 202);
  const std::string job = r.body["job_id"];
  const auto blocked = srv.post(base + "/stages/model-annotate", json::object());
  const auto during = srv.get(base + "/jobs/" + job);
  CHECK(blocked.status == 409);
  if (during.body["status"] == "running") {
    CHECK(error_code(blocked) == "BUSY");
    CHECK(srv.get(base).body["busy"] == true);
  }
  CHECK(wait_for_job(srv, base, job)["status"] == "succeeded");
  CHECK(srv.get(base).body["busy"] == false);
  CHECK(srv.post(base + "/stages/model-annotate", json::object()).status == 200);
}

TEST_CASE("create validation") {
  testing::TempDir root;
  TestServer srv(root.path());
  Dataset bad = testing::small_dataset(3);
  bad.documents[1].sections[0].spans.push_back(testing::span(50, 60, EntityType::Skill));
  auto r = srv.post("/projects", {{"project_id", "bad"}, {"dataset", dataset_json(bad)}});
  CHECK(r.status == 422);
  CHECK(error_code(r) == "INVALID_DATASET");
  CHECK_FALSE(std::filesystem::exists(root / "bad"));
  r = srv.post("/projects", {{"project_id", "../x"}, {"dataset", dataset_json(testing::small_dataset(2))}});
  CHECK(r.status == 422);
  r = srv.post("/projects", {{"dataset", dataset_json(testing::small_dataset(2))}});
  CHECK(r.status == 201);
  CHECK(r.body["project_id"].get<std::string>().rfind("project-", 0) == 0);
  CHECK(srv.get("/projects").body["projects"].size() == 1);
}
