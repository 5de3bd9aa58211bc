// cvner: batch front end for the resume NER toolkit.
//
// Exit status: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "cvner/bootstrap.hpp"
#include "cvner/corpus.hpp"
#include "cvner/error.hpp"
#include "cvner/eval.hpp"
#include "cvner/fixture.hpp"
#include "cvner/io.hpp"
#include "cvner/seed.hpp"
#include "cvner/service.hpp"
#include "cvner/split.hpp"
#include "cvner/tagger.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace cvner;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "-" or empty means stdout; files are written to a temp name, then renamed.
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_file_atomic(path, content);
  }
}

/// Reads a dataset and rejects it unless it passes validation.
Dataset read_valid_dataset(const std::string& path) {
  Dataset ds = read_dataset(path);
  const auto violations = validate_dataset(ds);
  if (!violations.empty()) {
    const auto& v = violations.front();
    throw Error(ErrorCode::InvalidDataset,
                path + ": " + std::to_string(violations.size()) + " violation(s), first: " + v.kind + " " +
                    v.section_id + ": " + v.message,
                {{"violations", std::to_string(violations.size())}});
  }
  return ds;
}

/// Accepts either a predictions file or a dataset file (its spans become the
/// predictions).
Predictions read_predictions_any(const std::string& path) {
  const std::string text = read_file(path);
  const auto first_line = text.substr(0, text.find('\n'));
  const json head = json::parse(first_line, nullptr, false);
  if (!head.is_object() || !head.contains("schema_version")) return parse_predictions(text);
  Predictions out;
  for (const auto& d : parse_dataset(text).documents) {
    for (const auto& sec : d.sections) {
      auto& spans = out[sec.id];
      for (auto sp : sec.spans) {
        sp.provenance = Provenance::Model;
        spans.push_back(sp);
      }
    }
  }
  return out;
}

std::string assignment_text(const SplitAssignment& a) {
  std::ostringstream ss;
  write_assignment(ss, a);
  return ss.str();
}

std::string histogram_text(const Dataset& ds, const SplitAssignment& a) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Entity type" << std::right;
  for (Split s : kSplits) out << std::setw(8) << to_string(s);
  out << '\n';
  std::array<TypeCounts, 3> counts;
  for (Split s : kSplits) counts[static_cast<std::size_t>(s)] = label_histogram(ds, a, s);
  for (EntityType t : kEntityTypes) {
    out << std::left << std::setw(16) << to_string(t) << std::right;
    for (Split s : kSplits) out << std::setw(8) << counts[static_cast<std::size_t>(s)][index_of(t)];
    out << '\n';
  }
  out << '\n' << std::left << std::setw(32) << "Field" << std::right;
  for (Split s : kSplits) out << std::setw(8) << to_string(s);
  out << '\n';
  std::array<std::map<std::string, std::size_t>, 3> fields;
  std::set<std::string> names;
  for (Split s : kSplits) {
    fields[static_cast<std::size_t>(s)] = field_histogram(ds, a, s);
    for (const auto& [name, n] : fields[static_cast<std::size_t>(s)]) names.insert(name);
  }
  for (const auto& name : names) {
    out << std::left << std::setw(32) << name << std::right;
    for (Split s : kSplits) {
      const auto& f = fields[static_cast<std::size_t>(s)];
      auto it = f.find(name);
      out << std::setw(8) << (it == f.end() ? 0 : it->second);
    }
    out << '\n';
  }
  return out.str();
}

std::array<double, 3> parse_ratios(const std::string& text) {
  std::array<double, 3> r{};
  std::stringstream ss(text);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 3) throw UsageError("--ratios takes exactly three comma-separated values");
    try {
      std::size_t used = 0;
      r[i++] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::logic_error&) {
      throw UsageError("--ratios: '" + part + "' is not a number");
    }
  }
  if (i != 3) throw UsageError("--ratios takes exactly three comma-separated values");
  return r;
}

void add_split_flags(CLI::App* cmd, std::string& ratios, SplitConfig& cfg) {
  cmd->add_option("--ratios", ratios, "train,dev,test fractions")->capture_default_str();
  cmd->add_option("--weight-labels", cfg.weight_labels, "weight of entity-type balance")->capture_default_str();
  cmd->add_option("--weight-fields", cfg.weight_fields, "weight of job-field balance")->capture_default_str();
  cmd->add_option("--restarts", cfg.restarts, "randomized greedy restarts")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--max-epochs", cfg.max_epochs)->capture_default_str();
  cmd->add_option("--patience", cfg.patience)->capture_default_str();
  cmd->add_option("--averaging", cfg.averaging, "average perceptron weights (true|false)")
      ->capture_default_str();
}

// ---------------------------------------------------------------------------

struct FixtureArgs {
  std::uint64_t seed = 0;
  std::string profile;
  std::string out = "-";
  std::string assignment_out;
};

int run_fixture(const FixtureArgs& a) {
  FixtureProfile profile = FixtureProfile::published();
  if (!a.profile.empty()) profile = profile_from_json(json::parse(read_file(a.profile)));
  const Fixture fx = generate_fixture(profile, a.seed);
  const std::string data = serialize_dataset(fx.dataset);
  const std::string split = assignment_text(fx.assignment);
  emit(a.out, data);
  if (!a.assignment_out.empty()) emit(a.assignment_out, split);
  std::cerr << "fixture: " << fx.dataset.documents.size() << " documents\n";
  return 0;
}

struct ValidateArgs {
  std::string dataset;
  std::string format = "text";
};

int run_validate(const ValidateArgs& a) {
  const Dataset ds = read_dataset(a.dataset);
  const auto violations = validate_dataset(ds);
  if (a.format == "structured") {
    ordered_json j;
    j["documents"] = ds.documents.size();
    auto list = ordered_json::array();
    for (const auto& v : violations) {
      ordered_json e;
      e["kind"] = v.kind;
      e["doc_id"] = v.doc_id;
      e["section_id"] = v.section_id;
      e["offset"] = v.offset ? ordered_json(*v.offset) : ordered_json(nullptr);
      e["message"] = v.message;
      list.push_back(std::move(e));
    }
    j["violations"] = std::move(list);
    std::cout << j.dump(2) << '\n';
  } else {
    for (const auto& v : violations) {
      std::cout << v.kind << '\t' << v.doc_id << '\t' << v.section_id << '\t' << v.message << '\n';
    }
    std::cout << ds.documents.size() << " documents, " << violations.size() << " violations\n";
  }
  return violations.empty() ? 0 : kExitData;
}

struct SplitArgs {
  std::string dataset;
  std::string ratios = "0.7,0.15,0.15";
  SplitConfig config;
  std::string out = "-";
};

int run_split(SplitArgs a) {
  a.config.ratios = parse_ratios(a.ratios);
  try {
    a.config.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = read_valid_dataset(a.dataset);
  const SplitResult result = stratified_split(ds, a.config);
  emit(a.out, assignment_text(result.assignment));
  std::cerr << "imbalance " << std::fixed << std::setprecision(6) << result.imbalance << "\n"
            << histogram_text(ds, result.assignment);
  return 0;
}

struct TrainArgs {
  std::string dataset;
  std::string assignment;
  TrainConfig config;
  std::string out;
  std::string log_out;
};

int run_train(TrainArgs a) {
  try {
    a.config.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Dataset ds = read_valid_dataset(a.dataset);
  const SplitAssignment assignment = read_assignment(a.assignment);
  std::vector<AlignmentWarning> warnings;
  const auto train_set = make_examples(ds, assignment, Split::Train, &warnings);
  const auto dev_set = make_examples(ds, assignment, Split::Dev, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w.message << '\n';

  const TrainResult result = train(train_set, dev_set, a.config);
  std::ostringstream model;
  save_model(result.model, model);
  write_file_atomic(a.out, model.str());

  ordered_json log;
  log["epochs_run"] = result.log.dev_f1.size();
  log["best_epoch"] = result.log.best_epoch;
  log["stopped_early"] = result.log.stopped_early;
  log["dev_f1"] = result.log.dev_f1;
  log["train_errors"] = result.log.train_errors;
  if (!a.log_out.empty()) emit(a.log_out, log.dump(2) + "\n");
  for (std::size_t e = 0; e < result.log.dev_f1.size(); ++e) {
    std::cerr << "epoch " << std::setw(3) << e + 1 << "  errors " << std::setw(6) << result.log.train_errors[e]
              << "  dev F1 " << format_score(result.log.dev_f1[e]) << '\n';
  }
  std::cerr << "best epoch " << result.log.best_epoch << (result.log.stopped_early ? " (early stop)" : "")
            << '\n';
  return 0;
}

struct PredictArgs {
  std::string model;
  std::string dataset;
  std::string assignment;
  std::string split;
  std::string out = "-";
};

int run_predict(const PredictArgs& a) {
  if (a.split.empty() != a.assignment.empty()) throw UsageError("--split and --assignment go together");
  const TaggerModel model = load_model(fs::path(a.model));
  const Dataset ds = read_dataset(a.dataset);
  SplitAssignment assignment;
  std::optional<Split> only;
  if (!a.split.empty()) {
    only = parse_split(a.split);
    assignment = read_assignment(a.assignment);
  }
  Predictions preds;
  for (const auto& doc : ds.documents) {
    if (only) {
      auto it = assignment.find(doc.id);
      if (it == assignment.end()) {
        throw Error(ErrorCode::InvalidDataset, "document " + doc.id + " has no split", {{"doc_id", doc.id}});
      }
      if (it->second != *only) continue;
    }
    for (const auto& s : doc.sections) preds[s.id] = predict(model, s);
  }
  std::ostringstream ss;
  write_predictions(ss, preds);
  emit(a.out, ss.str());
  return 0;
}

struct EvalArgs {
  std::string gold;
  std::string pred;
  std::string counts;
  std::string assignment;
  std::string split;
  std::string format = "text";
  std::string report_out;
  std::string name = "model";
};

// {"CITY": {"tp": 87, "fp": 5, "fn": 3}, ...}; all eight types required.
MetricsReport report_from_counts(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "counts file must hold an object keyed by entity type");
  std::array<std::size_t, kNumEntityTypes> tp{}, fp{}, fn{};
  std::array<bool, kNumEntityTypes> seen{};
  for (const auto& [key, row] : j.items()) {
    const auto i = index_of(parse_entity_type(key));
    try {
      tp[i] = row.at("tp").get<std::size_t>();
      fp[i] = row.at("fp").get<std::size_t>();
      fn[i] = row.at("fn").get<std::size_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "counts for " + key + ": " + e.what(), {{"type", key}});
    }
    seen[i] = true;
  }
  for (EntityType t : kEntityTypes) {
    if (!seen[index_of(t)]) {
      throw Error(ErrorCode::ParseError, "counts file lacks " + std::string(to_string(t)),
                  {{"type", std::string(to_string(t))}});
    }
  }
  return make_report(tp, fp, fn);
}

int run_eval(const EvalArgs& a) {
  if (a.format != "text" && a.format != "structured") throw UsageError("--format must be text or structured");
  const bool from_counts = !a.counts.empty();
  if (from_counts == !(a.gold.empty() && a.pred.empty())) {
    throw UsageError("give either --counts or both --gold and --pred");
  }
  if (!from_counts && (a.gold.empty() || a.pred.empty())) throw UsageError("--gold and --pred go together");
  if (a.split.empty() != a.assignment.empty()) throw UsageError("--split and --assignment go together");

  MetricsReport report;
  if (from_counts) {
    report = report_from_counts(json::parse(read_file(a.counts)));
  } else {
    const Dataset gold = read_valid_dataset(a.gold);
    const Predictions preds = read_predictions_any(a.pred);
    report = a.split.empty() ? score(gold, preds)
                             : score(gold, read_assignment(a.assignment), parse_split(a.split), preds);
  }
  const std::string structured = to_json(report).dump(2) + "\n";
  if (!a.report_out.empty()) emit(a.report_out, structured);
  if (a.format == "structured") {
    std::cout << structured;
  } else {
    std::cout << render_report(report, ReportStyle::ModelComparison, a.name) << '\n'
              << render_report(report, ReportStyle::PerType, a.name);
  }
  return 0;
}

struct ReportArgs {
  std::vector<std::string> reports;
  std::vector<std::string> names;
  std::string style = "per-type";
};

int run_report(const ReportArgs& a) {
  if (!a.names.empty() && a.names.size() != a.reports.size()) {
    throw UsageError("--name must be given once per report");
  }
  std::vector<std::pair<std::string, MetricsReport>> rows;
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    const std::string name = a.names.empty() ? fs::path(a.reports[i]).stem().string() : a.names[i];
    rows.emplace_back(name, report_from_json(json::parse(read_file(a.reports[i]))));
  }
  if (a.style == "comparison") {
    std::cout << render_comparison(rows);
  } else if (a.style == "per-type") {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i) std::cout << '\n';
      std::cout << rows[i].first << '\n' << render_report(rows[i].second, ReportStyle::PerType, rows[i].first);
    }
  } else {
    throw UsageError("--style must be per-type or comparison");
  }
  return 0;
}

struct BootstrapArgs {
  std::string stage;
  std::string project;
  std::string actor;
  // create
  std::string dataset;
  std::string project_id;
  std::string ratios = "0.7,0.15,0.15";
  ProjectConfig config;
  std::uint64_t split_seed = 0;
  std::uint64_t train_seed = 0;
  // seed-annotate
  std::string gazetteers;
  // review
  std::string section;
  std::string spans;
  bool accept_proposals = false;
  std::string from;
  std::optional<std::uint64_t> revision;
  // finalize
  std::string out;
  std::string stats_out;
};

void print_status(const ProjectHandle& h) { std::cout << describe(h.project()).dump(2) << '\n'; }

int run_bootstrap(BootstrapArgs a) {
  static const std::set<std::string> stages = {"create",         "seed-annotate", "review", "train",
                                               "model-annotate", "finalize",      "status"};
  if (!stages.count(a.stage)) throw UsageError("unknown stage '" + a.stage + "'");
  const fs::path dir = a.project;

  if (a.stage == "create") {
    if (a.dataset.empty()) throw UsageError("create needs --dataset");
    a.config.split.ratios = parse_ratios(a.ratios);
    a.config.split.seed = a.split_seed;
    a.config.train.seed = a.train_seed;
    try {
      a.config.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    const std::string id = a.project_id.empty() ? dir.filename().string() : a.project_id;
    const auto handle =
        ProjectHandle::create(dir, id, read_dataset(a.dataset), a.config, a.actor.empty() ? "system" : a.actor);
    print_status(handle);
    return 0;
  }

  ProjectHandle handle = ProjectHandle::open(dir);
  const std::string actor = a.actor.empty() ? (a.stage == "review" ? "annotator" : "system") : a.actor;
  if (a.stage == "status") {
    print_status(handle);
  } else if (a.stage == "seed-annotate") {
    handle.seed_annotate(a.gazetteers.empty() ? Gazetteer::shipped() : Gazetteer::load_directory(a.gazetteers),
                         actor);
    print_status(handle);
  } else if (a.stage == "review") {
    const int modes = int(!a.section.empty()) + int(a.accept_proposals) + int(!a.from.empty());
    if (modes != 1) throw UsageError("review takes exactly one of --section, --accept-proposals, --from");
    const auto pass = handle.project().active_pass();
    if (!pass) {
      throw Error(ErrorCode::StateViolation,
                  "no review pass is open in state " + std::string(to_string(handle.project().state())));
    }
    if (!a.section.empty()) {
      if (a.spans.empty()) throw UsageError("--section needs --spans (a JSON array file)");
      const json arr = json::parse(read_file(a.spans));
      if (!arr.is_array()) throw Error(ErrorCode::ParseError, "--spans file must hold a JSON array");
      std::vector<EntitySpan> spans;
      for (const auto& s : arr) spans.push_back(span_from_json(s));
      handle.submit_review(a.section, std::move(spans), a.revision, *pass, actor);
    } else {
      std::optional<Dataset> reference;
      if (!a.from.empty()) reference = read_dataset(a.from);
      std::vector<std::string> pending;
      for (const auto& item : handle.project().queue(*pass).items()) {
        if (item.status == ReviewStatus::Pending) pending.push_back(item.section_id);
      }
      for (const auto& id : pending) {
        std::vector<EntitySpan> spans;
        if (reference) {
          const Section* s = find_section(*reference, id);
          if (!s) throw Error(ErrorCode::UnknownSection, "section " + id + " is missing from " + a.from);
          spans = s->spans;
        } else {
          spans = handle.project().queue(*pass).find(id)->proposed;
        }
        handle.submit_review(id, std::move(spans), std::nullopt, *pass, actor);
      }
      std::cerr << "reviewed " << pending.size() << " sections in pass " << *pass << '\n';
    }
    print_status(handle);
  } else if (a.stage == "train") {
    const TrainingJob& job = handle.run_training_round(actor);
    std::cout << to_json(job).dump(2) << '\n';
  } else if (a.stage == "model-annotate") {
    handle.model_annotate(actor);
    print_status(handle);
  } else if (a.stage == "finalize") {
    const FinalizeResult result = handle.finalize();
    emit(a.out, serialize_dataset(result.gold));
    if (!a.stats_out.empty()) emit(a.stats_out, result.stats.dump(2) + "\n");
    if (!a.out.empty() && a.out != "-") std::cout << result.stats.dump(2) << '\n';
  }
  return 0;
}

struct ServeArgs {
  std::string data_root;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int run_serve(ServeArgs a) {
  if (a.data_root.empty()) {
    if (const char* env = std::getenv("CVNER_DATA_ROOT")) a.data_root = env;
  }
  if (a.data_root.empty()) throw UsageError("serve needs --data-root or CVNER_DATA_ROOT");
  return run_server(a.data_root, a.host, a.port) == 0 ? 0 : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resume named-entity recognition toolkit"};
  app.require_subcommand(1);

  FixtureArgs fixture;
  auto* c_fixture = app.add_subcommand("fixture", "generate the synthetic resume corpus");
  c_fixture->add_option("--seed", fixture.seed)->capture_default_str();
  c_fixture->add_option("--profile", fixture.profile, "JSON marginals (default: published tables)");
  c_fixture->add_option("--out", fixture.out, "dataset file")->capture_default_str();
  c_fixture->add_option("--assignment-out", fixture.assignment_out, "split assignment file");

  ValidateArgs validate;
  auto* c_validate = app.add_subcommand("validate", "check a dataset file");
  c_validate->add_option("dataset", validate.dataset)->required();
  c_validate->add_option("--format", validate.format)->check(CLI::IsMember({"text", "structured"}));

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "person-level stratified train/dev/test split");
  c_split->add_option("dataset", split.dataset)->required();
  add_split_flags(c_split, split.ratios, split.config);
  c_split->add_option("--seed", split.config.seed)->capture_default_str();
  c_split->add_option("--out", split.out, "assignment file")->capture_default_str();

  TrainArgs trainer;
  auto* c_train = app.add_subcommand("train", "train the tagger on the TRAIN split, early-stop on DEV");
  c_train->add_option("dataset", trainer.dataset)->required();
  c_train->add_option("--assignment", trainer.assignment)->required();
  add_train_flags(c_train, trainer.config);
  c_train->add_option("--seed", trainer.config.seed)->capture_default_str();
  c_train->add_option("--out", trainer.out, "model file")->required();
  c_train->add_option("--log-out", trainer.log_out, "training log (JSON)");

  PredictArgs predictor;
  auto* c_predict = app.add_subcommand("predict", "tag sections with a trained model");
  c_predict->add_option("model", predictor.model)->required();
  c_predict->add_option("dataset", predictor.dataset)->required();
  c_predict->add_option("--assignment", predictor.assignment);
  c_predict->add_option("--split", predictor.split);
  c_predict->add_option("--out", predictor.out)->capture_default_str();

  EvalArgs evaluator;
  auto* c_eval = app.add_subcommand("eval", "entity-level precision/recall/F1");
  c_eval->add_option("--gold", evaluator.gold);
  c_eval->add_option("--pred", evaluator.pred);
  c_eval->add_option("--counts", evaluator.counts, "per-type tp/fp/fn JSON instead of files");
  c_eval->add_option("--assignment", evaluator.assignment);
  c_eval->add_option("--split", evaluator.split);
  c_eval->add_option("--format", evaluator.format)->capture_default_str();
  c_eval->add_option("--report-out", evaluator.report_out, "structured report file");
  c_eval->add_option("--name", evaluator.name, "model name in the table")->capture_default_str();

  ReportArgs reporter;
  auto* c_report = app.add_subcommand("report", "render structured reports");
  c_report->add_option("reports", reporter.reports)->required();
  c_report->add_option("--name", reporter.names, "row name per report");
  c_report->add_option("--style", reporter.style, "per-type | comparison")->capture_default_str();

  BootstrapArgs boot;
  auto* c_boot = app.add_subcommand("bootstrap", "drive an annotation project");
  c_boot->add_option("stage", boot.stage,
                     "create | seed-annotate | review | train | model-annotate | finalize | status")
      ->required();
  c_boot->add_option("--project", boot.project, "project directory")->required();
  c_boot->add_option("--actor", boot.actor);
  c_boot->add_option("--dataset", boot.dataset, "create: input dataset");
  c_boot->add_option("--project-id", boot.project_id, "create: id (default: directory name)");
  add_split_flags(c_boot, boot.ratios, boot.config.split);
  c_boot->add_option("--split-seed", boot.split_seed)->capture_default_str();
  c_boot->add_option("--seed", boot.config.seed, "seed subset and dev carve-out")->capture_default_str();
  c_boot->add_option("--seed-fraction", boot.config.seed_fraction)->capture_default_str();
  c_boot->add_option("--dev-fraction", boot.config.dev_fraction)->capture_default_str();
  add_train_flags(c_boot, boot.config.train);
  c_boot->add_option("--train-seed", boot.train_seed)->capture_default_str();
  c_boot->add_option("--gazetteers", boot.gazetteers, "seed-annotate: term list directory");
  c_boot->add_option("--section", boot.section, "review: one section id");
  c_boot->add_option("--spans", boot.spans, "review: JSON array of spans for --section");
  c_boot->add_option("--revision", boot.revision, "review: expected revision");
  c_boot->add_flag("--accept-proposals", boot.accept_proposals, "review: accept every pending proposal");
  c_boot->add_option("--from", boot.from, "review: take spans for every pending item from a dataset");
  c_boot->add_option("--out", boot.out, "finalize: gold dataset file")->capture_default_str();
  c_boot->add_option("--stats-out", boot.stats_out, "finalize: statistics file");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "run the HTTP review service");
  c_serve->add_option("--data-root", serve.data_root, "project directory root (env CVNER_DATA_ROOT)");
  c_serve->add_option("--host", serve.host)->capture_default_str();
  c_serve->add_option("--port", serve.port)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_fixture) return run_fixture(fixture);
    if (*c_validate) return run_validate(validate);
    if (*c_split) return run_split(split);
    if (*c_train) return run_train(trainer);
    if (*c_predict) return run_predict(predictor);
    if (*c_eval) return run_eval(evaluator);
    if (*c_report) return run_report(reporter);
    if (*c_boot) return run_bootstrap(boot);
    if (*c_serve) return run_serve(serve);
  } catch (const UsageError& e) {
    std::cerr << "cvner: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "cvner: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == ErrorCode::InvalidArgument ? kExitUsage : kExitData;
  } catch (const json::exception& e) {
    std::cerr << "cvner: PARSE_ERROR: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "cvner: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
