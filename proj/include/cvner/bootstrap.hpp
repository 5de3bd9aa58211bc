#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvner/corpus.hpp"
#include "cvner/eval.hpp"
#include "cvner/seed.hpp"
#include "cvner/split.hpp"
#include "cvner/tagger.hpp"

namespace cvner {

// The annotation loop: rule-based pre-annotation of a small document subset,
// a first human pass over it, a tagger trained on the corrections, model
// pre-annotation of every section, and a second human pass over everything.

enum class ProjectState : std::uint8_t {
  Created,
  SeedAnnotated,
  Review1InProgress,
  Review1Done,
  ModelTrained,
  ModelAnnotated,
  Review2InProgress,
  Finalized,
};

std::string_view to_string(ProjectState state);
ProjectState parse_project_state(std::string_view name);

enum class ReviewStatus : std::uint8_t { Pending, Done };

struct ReviewItem {
  std::string section_id;
  int pass = 1;
  std::vector<EntitySpan> proposed;
  ReviewStatus status = ReviewStatus::Pending;
  std::vector<EntitySpan> reviewed;  // HUMAN provenance; meaningful only when Done
  std::uint64_t revision = 0;        // bumped by every accepted submission
  std::string reviewer;

  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

class ReviewQueue {
 public:
  void push(ReviewItem item);
  void clear();

  const ReviewItem* find(std::string_view section_id) const;
  ReviewItem* find(std::string_view section_id);
  /// First pending item in queue order.
  const ReviewItem* next_pending() const;

  const std::vector<ReviewItem>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t done() const;
  bool complete() const { return !items_.empty() && done() == items_.size(); }

  friend bool operator==(const ReviewQueue& a, const ReviewQueue& b) { return a.items_ == b.items_; }

 private:
  std::vector<ReviewItem> items_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct ProjectConfig {
  SplitConfig split;
  double seed_fraction = 0.2;
  std::uint64_t seed = 0;  // seed-subset selection and dev carve-out
  double dev_fraction = 0.15;
  TrainConfig train;

  void validate() const;
};

nlohmann::ordered_json to_json(const ProjectConfig& config);
/// Missing keys keep their defaults.
ProjectConfig project_config_from_json(const nlohmann::json& j);

struct Event {
  std::uint64_t seq = 0;
  std::string timestamp;
  std::string actor;
  std::string operation;
  nlohmann::ordered_json payload;
  std::string payload_digest;
};

struct TrainingJob {
  std::string job_id;
  std::size_t round = 0;
  std::string status;  // "succeeded" for persisted jobs
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
  std::vector<double> dev_f1_history;
  std::size_t train_sections = 0;
  std::size_t dev_sections = 0;

  friend bool operator==(const TrainingJob&, const TrainingJob&) = default;
};

nlohmann::ordered_json to_json(const TrainingJob& job);

/// In-memory project state. The only way to change it is apply(), which
/// folds one logged event; replaying the log from the start rebuilds the
/// same value.
class Project {
 public:
  const std::string& id() const { return id_; }
  ProjectState state() const { return state_; }
  const ProjectConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const SplitAssignment& assignment() const { return assignment_; }
  const std::vector<std::string>& seed_documents() const { return seed_documents_; }
  const ReviewQueue& queue(int pass) const { return pass == 1 ? pass1_ : pass2_; }
  const std::vector<TrainingJob>& jobs() const { return jobs_; }
  const std::optional<std::string>& model_file() const { return model_file_; }
  const std::optional<std::string>& predictions_file() const { return predictions_file_; }
  std::uint64_t event_count() const { return event_count_; }

  /// Pass accepting submissions in the current state, if any.
  std::optional<int> active_pass() const;
  const Section* section(std::string_view section_id) const;

  /// Best current spans per section (latest review, else latest proposal,
  /// else the uploaded annotation).
  Dataset working_dataset() const;

  /// Folds one event. `dir` resolves files the event refers to.
  void apply(const Event& event, const std::filesystem::path& dir);

  friend bool operator==(const Project& a, const Project& b);

 private:
  std::string id_;
  ProjectState state_ = ProjectState::Created;
  ProjectConfig config_;
  Dataset dataset_;
  SplitAssignment assignment_;
  std::vector<std::string> seed_documents_;
  ReviewQueue pass1_;
  ReviewQueue pass2_;
  std::vector<TrainingJob> jobs_;
  std::optional<std::string> model_file_;
  std::optional<std::string> predictions_file_;
  std::uint64_t event_count_ = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> section_index_;
};

/// Public view used by the CLI and the HTTP service.
nlohmann::ordered_json describe(const Project& project);
/// Full state dump, including every review item.
nlohmann::ordered_json state_json(const Project& project);

/// Deterministic seed subset: round(fraction * n) documents (at least one),
/// drawn from documents that have sections, returned in dataset order.
std::vector<std::string> select_seed_documents(const Dataset& dataset, double fraction,
                                               std::uint64_t seed);

struct TrainingPlan {
  std::size_t round = 0;
  std::string job_id;
  std::vector<std::string> train_sections;
  std::vector<std::string> dev_sections;
  std::vector<TrainingExample> train_examples;
  std::vector<TrainingExample> dev_examples;
  TrainConfig config;
};

struct TrainingOutcome {
  TrainingPlan plan;
  TrainResult result;
};

struct FinalizeResult {
  Dataset gold;
  nlohmann::ordered_json stats;
};

/// A project bound to its directory:
///
///   <dir>/project.json            descriptor (rewritten after every event)
///   <dir>/events.jsonl            append-only log, one event per line
///   <dir>/snapshots/*.jsonl       dataset snapshot per state advance
///   <dir>/models/model-<n>.bin    tagger per training round
///   <dir>/predictions/latest.jsonl
///
/// Every mutating call validates completely before touching the directory.
class ProjectHandle {
 public:
  static ProjectHandle create(const std::filesystem::path& dir, std::string project_id,
                              Dataset dataset, ProjectConfig config,
                              std::string_view actor = "system");
  /// Rebuilds the project by replaying its event log.
  static ProjectHandle open(const std::filesystem::path& dir);

  const Project& project() const { return project_; }
  const std::filesystem::path& dir() const { return dir_; }

  void seed_annotate(const Gazetteer& gazetteer, std::string_view actor = "system");

  /// Stores a human review for the active pass. `expected_revision`, when
  /// given, must equal the item's current revision.
  const ReviewItem& submit_review(std::string_view section_id, std::vector<EntitySpan> spans,
                                  std::optional<std::uint64_t> expected_revision = std::nullopt,
                                  std::optional<int> pass = std::nullopt,
                                  std::string_view actor = "annotator");

  /// Validates state and gathers reviewed sections; no side effects.
  TrainingPlan plan_training() const;
  /// Pure and potentially slow; safe to run off the project's lock.
  static TrainingOutcome execute_training(TrainingPlan plan);
  /// Writes the model file and logs the round.
  void commit_training(const TrainingOutcome& outcome, std::string_view actor = "system");
  const TrainingJob& run_training_round(std::string_view actor = "system");

  void model_annotate(std::string_view actor = "system");

  /// Stores an external predictions file (eval format) for later scoring.
  void upload_predictions(std::string_view content, std::string_view actor = "system");

  FinalizeResult finalize() const;
  MetricsReport score_predictions(Split against) const;

  std::vector<Event> read_events() const;

 private:
  ProjectHandle(std::filesystem::path dir) : dir_(std::move(dir)) {}

  Event make_event(std::string_view actor, std::string_view operation,
                   nlohmann::ordered_json payload) const;
  void commit(const Event& event);
  void require_state(std::initializer_list<ProjectState> allowed, std::string_view op) const;

  std::filesystem::path dir_;
  Project project_;
};

/// Validates spans for a section (bounds, overlap) and returns them sorted
/// with HUMAN provenance; throws Error(SpanOutOfBounds / SpanOverlap) naming
/// the offending offsets.
std::vector<EntitySpan> normalize_review_spans(const Section& section, std::vector<EntitySpan> spans);

}  // namespace cvner
