#include "cvner/bootstrap.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cvner/error.hpp"
#include "cvner/io.hpp"
#include "cvner/random.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::string_view, 8> kStateNames = {
    "CREATED",       "SEED_ANNOTATED",  "REVIEW1_IN_PROGRESS", "REVIEW1_DONE",
    "MODEL_TRAINED", "MODEL_ANNOTATED", "REVIEW2_IN_PROGRESS", "FINALIZED",
};

constexpr const char* kEventsFile = "events.jsonl";
constexpr const char* kDescriptorFile = "project.json";

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string padded(std::uint64_t n, std::size_t width) {
  std::string s = std::to_string(n);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

ordered_json spans_json(const std::vector<EntitySpan>& spans) {
  auto arr = ordered_json::array();
  for (const auto& s : spans) arr.push_back(to_json(s));
  return arr;
}

std::vector<EntitySpan> spans_from(const json& arr) {
  std::vector<EntitySpan> out;
  for (const auto& s : arr) out.push_back(span_from_json(s));
  return out;
}

ordered_json job_fields(const TrainingJob& job) {
  ordered_json j;
  j["job_id"] = job.job_id;
  j["round"] = job.round;
  j["status"] = job.status;
  j["epochs_run"] = job.epochs_run;
  j["best_epoch"] = job.best_epoch;
  j["best_dev_f1"] = job.best_dev_f1;
  j["dev_f1_history"] = job.dev_f1_history;
  j["train_sections"] = job.train_sections;
  j["dev_sections"] = job.dev_sections;
  return j;
}

ordered_json item_json(const ReviewItem& item) {
  ordered_json j;
  j["section_id"] = item.section_id;
  j["pass"] = item.pass;
  j["status"] = item.status == ReviewStatus::Done ? "DONE" : "PENDING";
  j["revision"] = item.revision;
  j["proposed"] = spans_json(item.proposed);
  j["reviewed"] = spans_json(item.reviewed);
  j["reviewer"] = item.reviewer;
  return j;
}

[[noreturn]] void state_violation(std::string_view op, ProjectState state) {
  throw Error(ErrorCode::StateViolation,
              std::string(op) + " is not allowed in state " + std::string(to_string(state)),
              {{"operation", std::string(op)}, {"state", std::string(to_string(state))}});
}

}  // namespace

ordered_json to_json(const TrainingJob& job) { return job_fields(job); }

std::string_view to_string(ProjectState state) {
  return kStateNames[static_cast<std::size_t>(state)];
}

ProjectState parse_project_state(std::string_view name) {
  for (std::size_t i = 0; i < kStateNames.size(); ++i) {
    if (kStateNames[i] == name) return static_cast<ProjectState>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown project state '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// ReviewQueue

void ReviewQueue::push(ReviewItem item) {
  index_[item.section_id] = items_.size();
  items_.push_back(std::move(item));
}

void ReviewQueue::clear() {
  items_.clear();
  index_.clear();
}

const ReviewItem* ReviewQueue::find(std::string_view section_id) const {
  auto it = index_.find(section_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

ReviewItem* ReviewQueue::find(std::string_view section_id) {
  auto it = index_.find(section_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

const ReviewItem* ReviewQueue::next_pending() const {
  for (const auto& item : items_) {
    if (item.status == ReviewStatus::Pending) return &item;
  }
  return nullptr;
}

std::size_t ReviewQueue::done() const {
  return static_cast<std::size_t>(std::count_if(items_.begin(), items_.end(), [](const ReviewItem& i) {
    return i.status == ReviewStatus::Done;
  }));
}

// ---------------------------------------------------------------------------
// Config

void ProjectConfig::validate() const {
  split.validate();
  train.validate();
  if (!(seed_fraction > 0.0 && seed_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "seed_fraction must be in (0, 1]");
  }
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dev_fraction must be in (0, 1)");
  }
}

ordered_json to_json(const ProjectConfig& c) {
  ordered_json j;
  j["ratios"] = c.split.ratios;
  j["split_seed"] = c.split.seed;
  j["weight_labels"] = c.split.weight_labels;
  j["weight_fields"] = c.split.weight_fields;
  j["restarts"] = c.split.restarts;
  j["seed_fraction"] = c.seed_fraction;
  j["seed"] = c.seed;
  j["dev_fraction"] = c.dev_fraction;
  j["max_epochs"] = c.train.max_epochs;
  j["patience"] = c.train.patience;
  j["train_seed"] = c.train.seed;
  j["averaging"] = c.train.averaging;
  return j;
}

ProjectConfig project_config_from_json(const json& j) {
  ProjectConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "config must be an object");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("ratios", c.split.ratios);
    get("split_seed", c.split.seed);
    get("weight_labels", c.split.weight_labels);
    get("weight_fields", c.split.weight_fields);
    get("restarts", c.split.restarts);
    get("seed_fraction", c.seed_fraction);
    get("seed", c.seed);
    get("dev_fraction", c.dev_fraction);
    get("max_epochs", c.train.max_epochs);
    get("patience", c.train.patience);
    get("train_seed", c.train.seed);
    get("averaging", c.train.averaging);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Project

std::optional<int> Project::active_pass() const {
  switch (state_) {
    case ProjectState::SeedAnnotated:
    case ProjectState::Review1InProgress:
      return 1;
    case ProjectState::ModelAnnotated:
    case ProjectState::Review2InProgress:
      return 2;
    default:
      return std::nullopt;
  }
}

const Section* Project::section(std::string_view section_id) const {
  auto it = section_index_.find(section_id);
  if (it == section_index_.end()) return nullptr;
  return &dataset_.documents[it->second.first].sections[it->second.second];
}

Dataset Project::working_dataset() const {
  Dataset out = dataset_;
  for (auto& doc : out.documents) {
    for (auto& s : doc.sections) {
      for (const ReviewQueue* q : {&pass1_, &pass2_}) {
        if (const ReviewItem* item = q->find(s.id)) {
          s.spans = item->status == ReviewStatus::Done ? item->reviewed : item->proposed;
        }
      }
    }
  }
  return out;
}

void Project::apply(const Event& event, const fs::path& dir) {
  const auto& p = event.payload;
  const std::string& op = event.operation;
  auto expect = [&](std::initializer_list<ProjectState> allowed) {
    if (std::find(allowed.begin(), allowed.end(), state_) == allowed.end()) {
      throw Error(ErrorCode::StateViolation,
                  "event " + std::to_string(event.seq) + " (" + op + ") is illegal in state " +
                      std::string(to_string(state_)));
    }
  };

  if (op == "create") {
    if (event_count_ != 0) throw Error(ErrorCode::StateViolation, "create must be the first event");
    const std::string file = p.at("dataset_file").get<std::string>();
    const std::string content = read_file(dir / file);
    if (sha256_hex(content) != p.at("dataset_digest").get<std::string>()) {
      throw Error(ErrorCode::InvalidDataset, "dataset snapshot " + file + " does not match its digest");
    }
    id_ = p.at("project_id").get<std::string>();
    config_ = project_config_from_json(p.at("config"));
    dataset_ = parse_dataset(content);
    assignment_.clear();
    for (const auto& [doc, split] : p.at("assignment").items()) {
      assignment_.emplace(doc, parse_split(split.get<std::string>()));
    }
    seed_documents_ = p.at("seed_documents").get<std::vector<std::string>>();
    section_index_.clear();
    for (std::size_t d = 0; d < dataset_.documents.size(); ++d) {
      for (std::size_t s = 0; s < dataset_.documents[d].sections.size(); ++s) {
        section_index_[dataset_.documents[d].sections[s].id] = {d, s};
      }
    }
    state_ = ProjectState::Created;
  } else if (op == "seed_annotate" || op == "model_annotate") {
    const bool seed = op == "seed_annotate";
    expect({seed ? ProjectState::Created : ProjectState::ModelTrained});
    ReviewQueue& q = seed ? pass1_ : pass2_;
    q.clear();
    for (const auto& it : p.at("items")) {
      ReviewItem item;
      item.section_id = it.at("section_id").get<std::string>();
      item.pass = seed ? 1 : 2;
      item.proposed = spans_from(it.at("spans"));
      q.push(std::move(item));
    }
    state_ = seed ? ProjectState::SeedAnnotated : ProjectState::ModelAnnotated;
  } else if (op == "review") {
    const int pass = p.at("pass").get<int>();
    if (active_pass() != pass) {
      throw Error(ErrorCode::StateViolation, "review event for inactive pass");
    }
    ReviewQueue& q = pass == 1 ? pass1_ : pass2_;
    ReviewItem* item = q.find(p.at("section_id").get<std::string>());
    if (!item) throw Error(ErrorCode::NotFound, "review event for unknown item");
    item->reviewed = spans_from(p.at("spans"));
    item->status = ReviewStatus::Done;
    item->revision = p.at("revision").get<std::uint64_t>();
    item->reviewer = event.actor;
    if (state_ == ProjectState::SeedAnnotated) state_ = ProjectState::Review1InProgress;
    if (state_ == ProjectState::ModelAnnotated) state_ = ProjectState::Review2InProgress;
    if (q.complete()) {
      state_ = pass == 1 ? ProjectState::Review1Done : ProjectState::Finalized;
    }
  } else if (op == "train") {
    expect({ProjectState::Review1Done, ProjectState::ModelAnnotated});
    const std::string file = p.at("model_file").get<std::string>();
    if (sha256_hex(read_file(dir / file)) != p.at("model_digest").get<std::string>()) {
      throw Error(ErrorCode::InvalidDataset, "model file " + file + " does not match its digest");
    }
    TrainingJob job;
    job.job_id = p.at("job_id").get<std::string>();
    job.round = p.at("round").get<std::size_t>();
    job.status = "succeeded";
    job.epochs_run = p.at("epochs_run").get<std::size_t>();
    job.best_epoch = p.at("best_epoch").get<std::size_t>();
    job.dev_f1_history = p.at("dev_f1_history").get<std::vector<double>>();
    job.best_dev_f1 = job.best_epoch > 0 ? job.dev_f1_history.at(job.best_epoch - 1) : 0.0;
    job.train_sections = p.at("train_sections").size();
    job.dev_sections = p.at("dev_sections").size();
    jobs_.push_back(std::move(job));
    model_file_ = file;
    pass2_.clear();
    state_ = ProjectState::ModelTrained;
  } else if (op == "predictions") {
    predictions_file_ = p.at("file").get<std::string>();
  } else {
    throw Error(ErrorCode::ParseError, "unknown event operation '" + op + "'");
  }
  ++event_count_;
}

bool operator==(const Project& a, const Project& b) {
  return a.dataset_ == b.dataset_ && state_json(a) == state_json(b);
}

ordered_json describe(const Project& project) {
  ordered_json j;
  j["project_id"] = project.id();
  j["state"] = to_string(project.state());
  std::size_t sections = 0;
  for (const auto& d : project.dataset().documents) sections += d.sections.size();
  j["documents"] = project.dataset().documents.size();
  j["sections"] = sections;
  j["seed_documents"] = project.seed_documents().size();
  ordered_json split;
  for (Split s : kSplits) {
    split[std::string(to_string(s))] =
        std::count_if(project.assignment().begin(), project.assignment().end(),
                      [&](const auto& kv) { return kv.second == s; });
  }
  j["split"] = std::move(split);
  ordered_json passes;
  for (int pass : {1, 2}) {
    ordered_json pj;
    pj["total"] = project.queue(pass).size();
    pj["done"] = project.queue(pass).done();
    passes[std::to_string(pass)] = std::move(pj);
  }
  j["passes"] = std::move(passes);
  if (auto pass = project.active_pass()) j["active_pass"] = *pass;
  else j["active_pass"] = nullptr;
  j["model"] = project.model_file() ? ordered_json(*project.model_file()) : ordered_json(nullptr);
  auto jobs = ordered_json::array();
  for (const auto& job : project.jobs()) jobs.push_back(to_json(job));
  j["jobs"] = std::move(jobs);
  j["predictions"] = project.predictions_file().has_value();
  j["events"] = project.event_count();
  return j;
}

ordered_json state_json(const Project& project) {
  ordered_json j = describe(project);
  j["config"] = to_json(project.config());
  ordered_json assignment;
  for (const auto& [doc, split] : project.assignment()) assignment[doc] = to_string(split);
  j["assignment"] = std::move(assignment);
  j["seed_document_ids"] = project.seed_documents();
  for (int pass : {1, 2}) {
    auto items = ordered_json::array();
    for (const auto& item : project.queue(pass).items()) items.push_back(item_json(item));
    j["queue" + std::to_string(pass)] = std::move(items);
  }
  j["predictions_file"] = project.predictions_file() ? ordered_json(*project.predictions_file())
                                                     : ordered_json(nullptr);
  return j;
}

std::vector<std::string> select_seed_documents(const Dataset& dataset, double fraction,
                                               std::uint64_t seed) {
  std::vector<std::size_t> candidates;
  for (std::size_t d = 0; d < dataset.documents.size(); ++d) {
    if (!dataset.documents[d].sections.empty()) candidates.push_back(d);
  }
  if (candidates.empty()) return {};
  const auto want = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(fraction * static_cast<double>(candidates.size()) + 0.5)),
      1, candidates.size());
  Rng rng(mix_seed(seed, 1));
  shuffle(std::span(candidates), rng);
  candidates.resize(want);
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::string> out;
  for (std::size_t d : candidates) out.push_back(dataset.documents[d].id);
  return out;
}

std::vector<EntitySpan> normalize_review_spans(const Section& section, std::vector<EntitySpan> spans) {
  std::sort(spans.begin(), spans.end());
  for (auto& s : spans) s.provenance = Provenance::Human;
  const std::size_t length = utf8::length(section.text);
  for (const auto& v : validate_spans(length, spans)) {
    ErrorCode code = ErrorCode::SpanOutOfBounds;
    if (v.kind == "span_overlap") code = ErrorCode::SpanOverlap;
    std::size_t start = 0, end = 0;
    for (const auto& s : spans) {
      if (s.start == v.offset || s.end == v.offset) {
        start = s.start;
        end = s.end;
        break;
      }
    }
    throw Error(code, "section " + section.id + ": " + v.message,
                {{"section_id", section.id},
                 {"start", std::to_string(start)},
                 {"end", std::to_string(end)},
                 {"text_length", std::to_string(length)}});
  }
  return spans;
}

// ---------------------------------------------------------------------------
// ProjectHandle

Event ProjectHandle::make_event(std::string_view actor, std::string_view operation,
                                ordered_json payload) const {
  Event e;
  e.seq = project_.event_count() + 1;
  e.timestamp = now_iso8601();
  e.actor = actor;
  e.operation = operation;
  e.payload_digest = sha256_hex(payload.dump());
  e.payload = std::move(payload);
  return e;
}

void ProjectHandle::commit(const Event& event) {
  const ProjectState before = project_.state();
  Project next = project_;
  next.apply(event, dir_);

  ordered_json line;
  line["seq"] = event.seq;
  line["timestamp"] = event.timestamp;
  line["actor"] = event.actor;
  line["operation"] = event.operation;
  line["payload"] = event.payload;
  line["payload_digest"] = event.payload_digest;
  {
    std::ofstream out(dir_ / kEventsFile, std::ios::binary | std::ios::app);
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "cannot append to event log");
  }
  project_ = std::move(next);

  write_file_atomic(dir_ / kDescriptorFile, describe(project_).dump(2) + "\n");
  if (event.operation == "create" || project_.state() != before) {
    fs::create_directories(dir_ / "snapshots");
    const auto name = padded(event.seq, 6) + "-" + std::string(to_string(project_.state())) + ".jsonl";
    if (event.operation != "create") write_dataset(project_.working_dataset(), dir_ / "snapshots" / name);
  }
}

void ProjectHandle::require_state(std::initializer_list<ProjectState> allowed,
                                  std::string_view op) const {
  if (std::find(allowed.begin(), allowed.end(), project_.state()) == allowed.end()) {
    state_violation(op, project_.state());
  }
}

ProjectHandle ProjectHandle::create(const fs::path& dir, std::string project_id, Dataset dataset,
                                    ProjectConfig config, std::string_view actor) {
  config.validate();
  if (project_id.empty()) throw Error(ErrorCode::InvalidArgument, "project id must not be empty");
  if (dataset.documents.empty()) {
    throw Error(ErrorCode::InvalidDataset, "dataset has no documents");
  }
  if (auto violations = validate_dataset(dataset); !violations.empty()) {
    Error::Context ctx{{"violations", std::to_string(violations.size())}};
    std::string msg = "dataset failed validation:";
    for (std::size_t i = 0; i < violations.size() && i < 20; ++i) {
      const auto& v = violations[i];
      msg += "\n  " + v.kind + " doc=" + v.doc_id + " section=" + v.section_id + ": " + v.message;
      ctx["violation." + std::to_string(i)] = v.kind + " " + v.doc_id + " " + v.section_id;
    }
    throw Error(ErrorCode::InvalidDataset, msg, std::move(ctx));
  }
  if (fs::exists(dir / kEventsFile)) {
    throw Error(ErrorCode::InvalidArgument, "a project already exists at " + dir.string());
  }

  const SplitResult split = stratified_split(dataset, config.split);
  const auto seed_docs = select_seed_documents(dataset, config.seed_fraction, config.seed);
  const std::string content = serialize_dataset(dataset);
  const std::string snapshot = "snapshots/" + padded(1, 6) + "-CREATED.jsonl";

  ordered_json payload;
  payload["project_id"] = project_id;
  payload["config"] = to_json(config);
  payload["dataset_file"] = snapshot;
  payload["dataset_digest"] = sha256_hex(content);
  ordered_json assignment;
  for (const auto& [doc, s] : split.assignment) assignment[doc] = to_string(s);
  payload["assignment"] = std::move(assignment);
  payload["seed_documents"] = seed_docs;
  payload["imbalance"] = split.imbalance;

  fs::create_directories(dir / "snapshots");
  write_file_atomic(dir / snapshot, content);
  ProjectHandle handle(dir);
  handle.commit(handle.make_event(actor, "create", std::move(payload)));
  return handle;
}

ProjectHandle ProjectHandle::open(const fs::path& dir) {
  ProjectHandle handle(dir);
  if (!fs::exists(dir / kEventsFile)) {
    throw Error(ErrorCode::NotFound, "no project at " + dir.string());
  }
  for (const auto& e : handle.read_events()) {
    if (sha256_hex(e.payload.dump()) != e.payload_digest) {
      throw Error(ErrorCode::InvalidDataset,
                  "event " + std::to_string(e.seq) + " payload does not match its digest");
    }
    handle.project_.apply(e, dir);
  }
  return handle;
}

std::vector<Event> ProjectHandle::read_events() const {
  std::ifstream in(dir_ / kEventsFile, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read event log in " + dir_.string());
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = ordered_json::parse(line);
      Event e;
      e.seq = j.at("seq").get<std::uint64_t>();
      e.timestamp = j.at("timestamp").get<std::string>();
      e.actor = j.at("actor").get<std::string>();
      e.operation = j.at("operation").get<std::string>();
      e.payload = j.at("payload");
      e.payload_digest = j.at("payload_digest").get<std::string>();
      events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(ErrorCode::ParseError,
                  "event log line " + std::to_string(line_no) + ": " + ex.what(),
                  {{"line", std::to_string(line_no)}});
    }
  }
  return events;
}

void ProjectHandle::seed_annotate(const Gazetteer& gazetteer, std::string_view actor) {
  require_state({ProjectState::Created}, "seed-annotate");
  const auto& seed_docs = project_.seed_documents();
  auto items = ordered_json::array();
  for (const auto& doc : project_.dataset().documents) {
    if (std::find(seed_docs.begin(), seed_docs.end(), doc.id) == seed_docs.end()) continue;
    for (const auto& s : doc.sections) {
      ordered_json item;
      item["section_id"] = s.id;
      item["spans"] = spans_json(seed_preannotate(s, gazetteer));
      items.push_back(std::move(item));
    }
  }
  ordered_json payload;
  payload["items"] = std::move(items);
  commit(make_event(actor, "seed_annotate", std::move(payload)));
}

const ReviewItem& ProjectHandle::submit_review(std::string_view section_id,
                                               std::vector<EntitySpan> spans,
                                               std::optional<std::uint64_t> expected_revision,
                                               std::optional<int> pass, std::string_view actor) {
  const auto active = project_.active_pass();
  if (!active) state_violation("review", project_.state());
  if (pass && *pass != *active) {
    throw Error(ErrorCode::StateViolation,
                "pass " + std::to_string(*pass) + " is not the active review pass",
                {{"pass", std::to_string(*pass)}, {"active_pass", std::to_string(*active)}});
  }
  const ReviewItem* item = project_.queue(*active).find(section_id);
  if (!item) {
    throw Error(ErrorCode::NotFound,
                "section " + std::string(section_id) + " has no item in review pass " +
                    std::to_string(*active),
                {{"section_id", std::string(section_id)}});
  }
  if (expected_revision && *expected_revision != item->revision) {
    throw Error(ErrorCode::VersionConflict,
                "stale revision for section " + std::string(section_id),
                {{"section_id", std::string(section_id)},
                 {"expected", std::to_string(*expected_revision)},
                 {"current", std::to_string(item->revision)}});
  }
  const Section* section = project_.section(section_id);
  spans = normalize_review_spans(*section, std::move(spans));

  ordered_json payload;
  payload["pass"] = *active;
  payload["section_id"] = section_id;
  payload["revision"] = item->revision + 1;
  payload["replaces"] = item->status == ReviewStatus::Done;
  payload["spans"] = spans_json(spans);
  commit(make_event(actor, "review", std::move(payload)));
  return *project_.queue(*active).find(section_id);
}

TrainingPlan ProjectHandle::plan_training() const {
  require_state({ProjectState::Review1Done, ProjectState::ModelAnnotated}, "train");
  TrainingPlan plan;
  plan.round = project_.jobs().size() + 1;
  plan.job_id = "train-" + std::to_string(plan.round);
  plan.config = project_.config().train;

  std::vector<Section> reviewed;
  for (const auto& item : project_.queue(1).items()) {
    if (item.status != ReviewStatus::Done) continue;
    Section s = *project_.section(item.section_id);
    s.spans = item.reviewed;
    reviewed.push_back(std::move(s));
  }
  if (reviewed.empty()) throw Error(ErrorCode::StateViolation, "no reviewed sections to train on");

  std::vector<std::size_t> order(reviewed.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(project_.config().seed, 1000 + plan.round));
  shuffle(std::span(order), rng);

  std::vector<const Section*> train_sections, dev_sections;
  if (reviewed.size() == 1) {
    train_sections.push_back(&reviewed[0]);
    dev_sections.push_back(&reviewed[0]);
  } else {
    const auto n = reviewed.size();
    const auto dev_n = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(project_.config().dev_fraction * static_cast<double>(n) + 0.5)),
        1, n - 1);
    std::vector<std::size_t> dev_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_n));
    std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(dev_n), order.end());
    std::sort(dev_idx.begin(), dev_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    for (auto i : dev_idx) dev_sections.push_back(&reviewed[i]);
    for (auto i : train_idx) train_sections.push_back(&reviewed[i]);
  }
  for (const Section* s : train_sections) plan.train_sections.push_back(s->id);
  for (const Section* s : dev_sections) plan.dev_sections.push_back(s->id);
  plan.train_examples = make_examples(train_sections);
  plan.dev_examples = make_examples(dev_sections);
  return plan;
}

TrainingOutcome ProjectHandle::execute_training(TrainingPlan plan) {
  TrainingOutcome out;
  out.result = train(plan.train_examples, plan.dev_examples, plan.config);
  out.plan = std::move(plan);
  return out;
}

void ProjectHandle::commit_training(const TrainingOutcome& outcome, std::string_view actor) {
  require_state({ProjectState::Review1Done, ProjectState::ModelAnnotated}, "train");
  if (outcome.plan.round != project_.jobs().size() + 1) {
    throw Error(ErrorCode::VersionConflict, "training round is out of date");
  }
  const std::string file = "models/model-" + std::to_string(outcome.plan.round) + ".bin";
  fs::create_directories(dir_ / "models");
  save_model(outcome.result.model, dir_ / file);

  const auto& log = outcome.result.log;
  ordered_json payload;
  payload["round"] = outcome.plan.round;
  payload["job_id"] = outcome.plan.job_id;
  payload["model_file"] = file;
  payload["model_digest"] = sha256_hex(read_file(dir_ / file));
  payload["train_sections"] = outcome.plan.train_sections;
  payload["dev_sections"] = outcome.plan.dev_sections;
  payload["epochs_run"] = log.dev_f1.size();
  payload["best_epoch"] = log.best_epoch;
  payload["dev_f1_history"] = log.dev_f1;
  commit(make_event(actor, "train", std::move(payload)));
}

const TrainingJob& ProjectHandle::run_training_round(std::string_view actor) {
  commit_training(execute_training(plan_training()), actor);
  return project_.jobs().back();
}

void ProjectHandle::model_annotate(std::string_view actor) {
  require_state({ProjectState::ModelTrained}, "model-annotate");
  const TaggerModel model = load_model(dir_ / *project_.model_file());
  auto items = ordered_json::array();
  for (const auto& doc : project_.dataset().documents) {
    for (const auto& s : doc.sections) {
      ordered_json item;
      item["section_id"] = s.id;
      const ReviewItem* earlier = project_.queue(1).find(s.id);
      if (earlier && earlier->status == ReviewStatus::Done) {
        item["spans"] = spans_json(earlier->reviewed);
      } else {
        item["spans"] = spans_json(predict(model, s));
      }
      items.push_back(std::move(item));
    }
  }
  ordered_json payload;
  payload["round"] = project_.jobs().size();
  payload["items"] = std::move(items);
  commit(make_event(actor, "model_annotate", std::move(payload)));
}

void ProjectHandle::upload_predictions(std::string_view content, std::string_view actor) {
  const Predictions preds = parse_predictions(content);
  for (const auto& [id, spans] : preds) {
    const Section* s = project_.section(id);
    if (!s) {
      throw Error(ErrorCode::UnknownSection, "prediction for unknown section " + id,
                  {{"section_id", id}});
    }
    normalize_review_spans(*s, spans);
  }
  std::ostringstream ss;
  write_predictions(ss, preds);
  const std::string file = "predictions/latest.jsonl";
  fs::create_directories(dir_ / "predictions");
  write_file_atomic(dir_ / file, ss.str());
  ordered_json payload;
  payload["file"] = file;
  payload["digest"] = sha256_hex(ss.str());
  payload["sections"] = preds.size();
  commit(make_event(actor, "predictions", std::move(payload)));
}

FinalizeResult ProjectHandle::finalize() const {
  if (project_.state() != ProjectState::Finalized) {
    if (const ReviewItem* pending = project_.queue(2).next_pending()) {
      throw Error(ErrorCode::StateViolation,
                  "cannot finalize: section " + pending->section_id + " is still pending review",
                  {{"section_id", pending->section_id},
                   {"state", std::string(to_string(project_.state()))}});
    }
    state_violation("finalize", project_.state());
  }
  FinalizeResult out;
  out.gold = project_.dataset();
  TypeCounts counts{};
  for (auto& doc : out.gold.documents) {
    for (auto& s : doc.sections) {
      s.spans = project_.queue(2).find(s.id)->reviewed;
      for (const auto& span : s.spans) ++counts[index_of(span.type)];
    }
  }
  ordered_json stats;
  stats["documents"] = out.gold.documents.size();
  ordered_json passes;
  for (int pass : {1, 2}) {
    ordered_json pj;
    pj["PENDING"] = project_.queue(pass).size() - project_.queue(pass).done();
    pj["DONE"] = project_.queue(pass).done();
    passes[std::to_string(pass)] = std::move(pj);
  }
  stats["review_items"] = std::move(passes);
  ordered_json spans;
  for (EntityType t : kEntityTypes) spans[std::string(to_string(t))] = counts[index_of(t)];
  stats["span_counts"] = std::move(spans);
  out.stats = std::move(stats);
  return out;
}

MetricsReport ProjectHandle::score_predictions(Split against) const {
  if (!project_.predictions_file()) {
    throw Error(ErrorCode::NotFound, "no predictions have been uploaded");
  }
  const FinalizeResult gold = finalize();
  return score(gold.gold, project_.assignment(), against,
               read_predictions(dir_ / *project_.predictions_file()));
}

}  // namespace cvner
