#include "cvner/service.hpp"

#include <algorithm>
#include <iostream>
#include <optional>
#include <shared_mutex>

#include "cvner/bootstrap.hpp"
#include "cvner/error.hpp"
#include "cvner/io.hpp"
#include "cvner/text.hpp"

// After the Eigen-based headers: resolv.h, pulled in here, defines _res.
#include <httplib.h>

namespace cvner {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct Service::Slot {
  explicit Slot(ProjectHandle h) : handle(std::move(h)) {}

  std::shared_mutex mu;
  ProjectHandle handle;
  bool busy = false;
  std::map<std::string, ordered_json> live_jobs;  // running or failed, this process only
};

namespace {

/// Thrown inside handlers for failures that are not library errors.
struct HttpError {
  int status;
  std::string code;
  std::string message;
  Error::Context context;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::StateViolation:
    case ErrorCode::VersionConflict:
    case ErrorCode::Busy:
      return 409;
    case ErrorCode::Io:
      return 500;
    default:
      return 422;
  }
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(2) + "\n", "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message,
                const Error::Context& context) {
  ordered_json ctx = ordered_json::object();
  for (const auto& [k, v] : context) ctx[k] = v;
  ordered_json body;
  body["error"]["code"] = code;
  body["error"]["message"] = message;
  body["error"]["context"] = std::move(ctx);
  send_json(res, status, body);
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const HttpError& e) {
      send_error(res, e.status, e.code, e.message, e.context);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), to_string(e.code()), e.what(), e.context());
    } catch (const json::exception& e) {
      send_error(res, 422, "PARSE_ERROR", e.what(), {});
    } catch (const std::exception& e) {
      send_error(res, 500, "INTERNAL", e.what(), {});
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw HttpError{422, "PARSE_ERROR", std::string("request body is not valid JSON: ") + e.what(), {}};
  }
}

bool valid_project_id(std::string_view id) {
  if (id.empty() || id.size() > 64 || id.front() == '.' || id.front() == '-') return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
           c == '_' || c == '.';
  });
}

std::string project_id_of(const httplib::Request& req) { return req.matches[1]; }

void require_idle(const Service::Slot& slot) {
  if (slot.busy) {
    throw Error(ErrorCode::Busy, "a training job is running for this project",
                {{"project_id", slot.handle.project().id()}});
  }
}

Dataset dataset_from_body(const json& j) {
  if (!j.is_object()) throw HttpError{422, "PARSE_ERROR", "dataset must be an object", {}};
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer()) {
    throw HttpError{422, "PARSE_ERROR", "dataset.schema_version is required", {}};
  }
  const auto version = j.at("schema_version").get<long long>();
  if (version != 1) {
    throw Error(ErrorCode::UnsupportedVersion, "unsupported schema_version " + std::to_string(version),
                {{"schema_version", std::to_string(version)}});
  }
  Dataset ds;
  const auto& docs = j.at("documents");
  if (!docs.is_array()) throw HttpError{422, "PARSE_ERROR", "dataset.documents must be an array", {}};
  for (std::size_t i = 0; i < docs.size(); ++i) {
    try {
      ds.documents.push_back(document_from_json(docs[i]));
    } catch (const Error& e) {
      auto ctx = e.context();
      ctx["document_index"] = std::to_string(i);
      throw Error(e.code(), "documents[" + std::to_string(i) + "]: " + e.what(), std::move(ctx));
    }
  }
  return ds;
}

ordered_json queue_item_json(const Project& project, const ReviewItem& item) {
  const Section* s = project.section(item.section_id);
  ordered_json j;
  j["section_id"] = item.section_id;
  j["kind"] = to_string(s->kind);
  j["pass"] = item.pass;
  j["revision"] = item.revision;
  j["status"] = item.status == ReviewStatus::Done ? "DONE" : "PENDING";
  j["text"] = s->text;
  auto tokens = ordered_json::array();
  for (const auto& t : tokenize(s->text)) tokens.push_back({{"start", t.start}, {"end", t.end}});
  j["tokens"] = std::move(tokens);
  auto proposals = ordered_json::array();
  for (const auto& span : item.proposed) proposals.push_back(to_json(span));
  j["proposals"] = std::move(proposals);
  return j;
}

}  // namespace

Service::Service(fs::path data_root) : root_(std::move(data_root)) {
  fs::create_directories(root_);
  for (const auto& entry : fs::directory_iterator(root_)) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "events.jsonl")) continue;
    try {
      auto handle = ProjectHandle::open(entry.path());
      const std::string id = handle.project().id();
      projects_.emplace(id, std::make_shared<Slot>(std::move(handle)));
    } catch (const std::exception& e) {
      std::cerr << "cvner: skipping " << entry.path() << ": " << e.what() << '\n';
    }
  }
}

Service::~Service() { wait_for_jobs(); }

void Service::wait_for_jobs() {
  std::vector<std::thread> running;
  {
    std::lock_guard lock(workers_mu_);
    running.swap(workers_);
  }
  for (auto& t : running) t.join();
}

std::shared_ptr<Service::Slot> Service::find(const std::string& id) const {
  std::lock_guard lock(registry_mu_);
  auto it = projects_.find(id);
  if (it == projects_.end()) {
    throw Error(ErrorCode::NotFound, "no project '" + id + "'", {{"project_id", id}});
  }
  return it->second;
}

void Service::mount(httplib::Server& server) {
  server.Post("/projects", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    if (!body.is_object() || !body.contains("dataset")) {
      throw HttpError{422, "PARSE_ERROR", "body must be an object with a 'dataset' field", {}};
    }
    Dataset dataset = dataset_from_body(body.at("dataset"));
    const ProjectConfig config = project_config_from_json(body.value("config", json()));
    std::string id;
    if (body.contains("project_id")) {
      if (!body.at("project_id").is_string()) {
        throw HttpError{422, "PARSE_ERROR", "project_id must be a string", {}};
      }
      id = body.at("project_id").get<std::string>();
    } else {
      id = "project-" + sha256_hex(serialize_dataset(dataset)).substr(0, 12);
    }
    if (!valid_project_id(id)) {
      throw HttpError{422, "INVALID_ARGUMENT", "project_id may only contain letters, digits, '.', '-' and '_'",
                      {{"project_id", id}}};
    }
    const std::string actor = body.value("actor", std::string("system"));

    std::lock_guard lock(registry_mu_);
    if (projects_.count(id) || fs::exists(root_ / id)) {
      throw HttpError{409, "ALREADY_EXISTS", "project '" + id + "' already exists", {{"project_id", id}}};
    }
    try {
      auto handle = ProjectHandle::create(root_ / id, id, std::move(dataset), config, actor);
      auto slot = std::make_shared<Slot>(std::move(handle));
      send_json(res, 201, describe(slot->handle.project()));
      projects_.emplace(id, std::move(slot));
    } catch (...) {
      std::error_code ec;
      fs::remove_all(root_ / id, ec);
      throw;
    }
  }));

  server.Get("/projects", guarded([this](const httplib::Request&, httplib::Response& res) {
    std::vector<std::shared_ptr<Slot>> slots;
    {
      std::lock_guard lock(registry_mu_);
      for (const auto& [id, slot] : projects_) slots.push_back(slot);
    }
    auto list = ordered_json::array();
    for (const auto& slot : slots) {
      std::shared_lock lock(slot->mu);
      list.push_back(describe(slot->handle.project()));
    }
    send_json(res, 200, ordered_json{{"projects", std::move(list)}});
  }));

  server.Get(R"(/projects/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    std::shared_lock lock(slot->mu);
    ordered_json view = describe(slot->handle.project());
    view["busy"] = slot->busy;
    send_json(res, 200, view);
  }));

  server.Post(R"(/projects/([^/]+)/stages/([^/]+))",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    const std::string stage = req.matches[2];
    const json body = parse_body(req);
    const std::string actor = body.is_object() ? body.value("actor", std::string("system")) : "system";

    std::unique_lock lock(slot->mu);
    require_idle(*slot);
    if (stage == "seed-annotate") {
      slot->handle.seed_annotate(Gazetteer::shipped(), actor);
      send_json(res, 200, describe(slot->handle.project()));
    } else if (stage == "model-annotate") {
      slot->handle.model_annotate(actor);
      send_json(res, 200, describe(slot->handle.project()));
    } else if (stage == "finalize") {
      const FinalizeResult result = slot->handle.finalize();
      ordered_json out;
      out["project"] = describe(slot->handle.project());
      out["stats"] = result.stats;
      send_json(res, 200, out);
    } else if (stage == "train") {
      TrainingPlan plan = slot->handle.plan_training();
      const std::string job_id = plan.job_id;
      ordered_json status;
      status["job_id"] = job_id;
      status["round"] = plan.round;
      status["status"] = "running";
      status["train_sections"] = plan.train_sections.size();
      status["dev_sections"] = plan.dev_sections.size();
      slot->live_jobs[job_id] = status;
      slot->busy = true;
      lock.unlock();

      std::lock_guard wlock(workers_mu_);
      workers_.emplace_back([slot, plan = std::move(plan), actor, job_id]() mutable {
        ordered_json final_status;
        try {
          TrainingOutcome outcome = ProjectHandle::execute_training(std::move(plan));
          std::unique_lock l(slot->mu);
          slot->handle.commit_training(outcome, actor);
          slot->live_jobs.erase(job_id);
          slot->busy = false;
          return;
        } catch (const std::exception& e) {
          std::unique_lock l(slot->mu);
          auto& s = slot->live_jobs[job_id];
          s["status"] = "failed";
          s["error"] = e.what();
          slot->busy = false;
        }
      });
      send_json(res, 202, status);
    } else {
      throw Error(ErrorCode::NotFound, "unknown stage '" + stage + "'", {{"stage", stage}});
    }
  }));

  server.Get(R"(/projects/([^/]+)/jobs/([^/]+))",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    const std::string job_id = req.matches[2];
    std::shared_lock lock(slot->mu);
    if (auto it = slot->live_jobs.find(job_id); it != slot->live_jobs.end()) {
      send_json(res, 200, it->second);
      return;
    }
    for (const auto& job : slot->handle.project().jobs()) {
      if (job.job_id == job_id) {
        send_json(res, 200, to_json(job));
        return;
      }
    }
    throw Error(ErrorCode::NotFound, "no job '" + job_id + "'", {{"job_id", job_id}});
  }));

  server.Get(R"(/projects/([^/]+)/queue/next)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    std::shared_lock lock(slot->mu);
    const Project& project = slot->handle.project();
    int pass = 0;
    if (req.has_param("pass")) {
      const std::string p = req.get_param_value("pass");
      if (p != "1" && p != "2") {
        throw HttpError{422, "INVALID_ARGUMENT", "pass must be 1 or 2", {{"pass", p}}};
      }
      pass = p[0] - '0';
    } else if (auto active = project.active_pass()) {
      pass = *active;
    } else {
      pass = project.queue(2).size() > 0 ? 2 : 1;
    }
    const ReviewQueue& queue = project.queue(pass);
    const ReviewItem* item = queue.next_pending();
    ordered_json out;
    out["pass"] = pass;
    out["state"] = to_string(project.state());
    out["item"] = item ? queue_item_json(project, *item) : ordered_json(nullptr);
    out["exhausted"] = item == nullptr;
    out["progress"] = {{"done", queue.done()}, {"total", queue.size()}};
    send_json(res, 200, out);
  }));

  server.Post(R"(/projects/([^/]+)/sections/([^/]+)/review)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    const std::string section_id = req.matches[2];
    const json body = parse_body(req);
    if (!body.is_object() || !body.contains("revision") || !body.contains("spans")) {
      throw HttpError{422, "PARSE_ERROR", "body must carry 'revision' and 'spans'", {}};
    }
    if (!body.at("revision").is_number_unsigned() && !body.at("revision").is_number_integer()) {
      throw HttpError{422, "PARSE_ERROR", "revision must be an integer", {}};
    }
    if (!body.at("spans").is_array()) throw HttpError{422, "PARSE_ERROR", "spans must be an array", {}};
    const auto revision = body.at("revision").get<std::uint64_t>();
    std::optional<int> pass;
    if (body.contains("pass") && !body.at("pass").is_null()) pass = body.at("pass").get<int>();
    std::vector<EntitySpan> spans;
    for (std::size_t i = 0; i < body.at("spans").size(); ++i) {
      try {
        spans.push_back(span_from_json(body.at("spans")[i]));
      } catch (const Error& e) {
        auto ctx = e.context();
        ctx["span_index"] = std::to_string(i);
        throw Error(e.code(), "spans[" + std::to_string(i) + "]: " + e.what(), std::move(ctx));
      }
    }
    const std::string actor = body.value("actor", std::string("annotator"));

    std::unique_lock lock(slot->mu);
    require_idle(*slot);
    const ReviewItem& item = slot->handle.submit_review(section_id, std::move(spans), revision, pass, actor);
    ordered_json out;
    out["section_id"] = item.section_id;
    out["pass"] = item.pass;
    out["revision"] = item.revision;
    out["status"] = "DONE";
    out["state"] = to_string(slot->handle.project().state());
    out["progress"] = {{"done", slot->handle.project().queue(item.pass).done()},
                       {"total", slot->handle.project().queue(item.pass).size()}};
    send_json(res, 200, out);
  }));

  server.Post(R"(/projects/([^/]+)/predictions)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    std::unique_lock lock(slot->mu);
    require_idle(*slot);
    slot->handle.upload_predictions(req.body);
    ordered_json out;
    out["file"] = *slot->handle.project().predictions_file();
    out["events"] = slot->handle.project().event_count();
    send_json(res, 200, out);
  }));

  server.Get(R"(/projects/([^/]+)/metrics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    const std::string against = req.has_param("against") ? req.get_param_value("against") : "TEST";
    const Split split = parse_split(against);
    std::shared_lock lock(slot->mu);
    send_json(res, 200, to_json(slot->handle.score_predictions(split)));
  }));

  server.Get(R"(/projects/([^/]+)/export)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto slot = find(project_id_of(req));
    std::shared_lock lock(slot->mu);
    const FinalizeResult result = slot->handle.finalize();
    res.status = 200;
    res.set_content(serialize_dataset(result.gold), "application/x-ndjson");
  }));

  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404) {
      send_error(res, 404, "NOT_FOUND", "no route for " + req.method + " " + req.path, {{"path", req.path}});
    } else {
      send_error(res, res.status, "HTTP_ERROR", "request failed", {});
    }
  });
}

int run_server(const fs::path& data_root, const std::string& host, int port) {
  Service service(data_root);
  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) {
    std::cerr << "cvner: cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  std::cerr << "cvner: serving " << data_root << " on " << host << ':' << port << '\n';
  server.listen_after_bind();
  return 0;
}

}  // namespace cvner
