#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cvner/corpus.hpp"
#include "cvner/text.hpp"

namespace cvner {

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

using FeatureVector = std::vector<std::string>;

/// Each uppercase letter -> X, lowercase -> x, digit -> d, anything else kept;
/// runs of the same symbol collapse ("Istanbul" -> "Xx", "2019" -> "d").
std::string word_shape(std::string_view word);

/// Features for token i: bias, lowercased word, shape, 1-3 char prefixes and
/// suffixes, digit flag, lowercased neighbours at +-1 (<BOS>/<EOS> at the
/// edges) and the section kind. Throws Error(InvalidArgument) if i is out of
/// range.
FeatureVector extract_features(std::span<const Token> tokens, std::size_t i, SectionKind kind);

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

using ScoreMatrix = Eigen::MatrixXd;  // positions x tags
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct TransitionScores {
  Eigen::MatrixXd pair;   // from x to
  Eigen::VectorXd start;  // score for the tag at position 0

  static TransitionScores zeros(std::size_t tags);
};

struct TransitionMask {
  BoolMatrix allowed;       // from x to
  BoolVector start_allowed;

  static TransitionMask all_allowed(std::size_t tags);
};

/// Mask over the 17 BIO tags in BioTag::index() order: I-X may only follow
/// B-X or I-X, and may not open a sequence.
TransitionMask bio_transition_mask();

struct Decoded {
  std::vector<std::size_t> path;
  double score = 0.0;
};

/// Maximum-scoring sequence that never takes a masked transition. Among equal
/// scores the lexicographically smallest tag-index sequence wins (for BIO
/// tags this is the lexicographically smallest tag-string sequence). Empty
/// emissions decode to an empty path. Throws Error(InvalidArgument) on
/// dimension mismatch or when no legal sequence exists.
Decoded viterbi_decode(const ScoreMatrix& emissions, const TransitionScores& transitions,
                       const TransitionMask& mask);

// ---------------------------------------------------------------------------
// Model and training
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t max_epochs = 50;
  std::size_t patience = 5;
  std::uint64_t seed = 0;
  bool averaging = true;

  void validate() const;
};

struct TrainingMeta {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 before training
  std::vector<double> dev_f1_history;
  std::uint64_t seed = 0;
  bool averaged = true;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

/// Sparse-feature linear-chain tagger over the 17 BIO tags.
class TaggerModel {
 public:
  using WeightMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  TaggerModel();

  std::size_t feature_count() const { return features_.size(); }
  std::span<const std::string> features() const { return features_; }
  const WeightMatrix& emission_weights() const { return emission_; }
  const TransitionScores& transitions() const { return transitions_; }
  const TransitionMask& mask() const { return mask_; }
  const TrainingMeta& meta() const { return meta_; }

  /// Feature ids per position; unknown features are dropped.
  std::vector<std::vector<std::size_t>> feature_ids(std::span<const Token> tokens,
                                                    SectionKind kind) const;
  ScoreMatrix emission_scores(const std::vector<std::vector<std::size_t>>& ids) const;
  std::vector<BioTag> tag(std::span<const Token> tokens, SectionKind kind) const;

  friend bool operator==(const TaggerModel& a, const TaggerModel& b);

 private:
  friend class TaggerTrainer;
  friend TaggerModel load_model(std::istream& in);

  std::vector<std::string> features_;
  std::unordered_map<std::string, std::size_t> index_;
  WeightMatrix emission_;
  TransitionScores transitions_;
  TransitionMask mask_;
  TrainingMeta meta_;
};

struct TrainingExample {
  std::vector<Token> tokens;
  std::vector<BioTag> tags;
  SectionKind kind = SectionKind::Personal;
};

/// Tokenizes each section and encodes its spans; alignment warnings are
/// appended to `warnings` when given.
std::vector<TrainingExample> make_examples(std::span<const Section* const> sections,
                                           std::vector<AlignmentWarning>* warnings = nullptr);
std::vector<TrainingExample> make_examples(const Dataset& dataset, const SplitAssignment& assignment,
                                           Split split,
                                           std::vector<AlignmentWarning>* warnings = nullptr);

/// Patience-based stopping on a "higher is better" metric.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records one epoch; returns true when it strictly improves on the best.
  bool update(double metric);
  bool should_stop() const { return epochs_ > 0 && epochs_ - best_epoch_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best() const { return best_; }
  std::size_t epochs() const { return epochs_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  double best_ = 0.0;
};

struct TrainingLog {
  std::vector<double> dev_f1;            // entity-level micro F1 per epoch
  std::vector<std::size_t> train_errors;  // mis-decoded positions per epoch
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct TrainResult {
  TaggerModel model;
  TrainingLog log;
};

/// Structured perceptron with optional weight averaging. Epoch order is
/// shuffled from the seed; after each epoch the dev set is scored and the
/// best epoch's parameters are kept. Stops after `patience` epochs without
/// improvement or at max_epochs.
TrainResult train(std::span<const TrainingExample> train_set, std::span<const TrainingExample> dev_set,
                  const TrainConfig& config);

/// tokenize -> features -> Viterbi -> spans (provenance MODEL).
std::vector<EntitySpan> predict(const TaggerModel& model, const Section& section);

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline constexpr char kModelMagic[8] = {'C', 'V', 'N', 'E', 'R', 'T', 'G', 'R'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const TaggerModel& model, std::ostream& out);
void save_model(const TaggerModel& model, const std::filesystem::path& path);
TaggerModel load_model(std::istream& in);
TaggerModel load_model(const std::filesystem::path& path);

}  // namespace cvner
