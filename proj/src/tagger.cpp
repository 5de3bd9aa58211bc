#include "cvner/tagger.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "cvner/error.hpp"
#include "cvner/eval.hpp"
#include "cvner/io.hpp"
#include "cvner/random.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

std::string word_shape(std::string_view word) {
  std::u32string shape;
  for (char32_t c : utf8::decode(word)) {
    char32_t s = c;
    if (utf8::is_upper(c)) s = U'X';
    else if (utf8::is_lower(c)) s = U'x';
    else if (c >= U'0' && c <= U'9') s = U'd';
    if (shape.empty() || shape.back() != s) shape.push_back(s);
  }
  return utf8::encode(shape);
}

FeatureVector extract_features(std::span<const Token> tokens, std::size_t i, SectionKind kind) {
  if (i >= tokens.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature position out of range",
                {{"position", std::to_string(i)}, {"length", std::to_string(tokens.size())}});
  }
  const std::string lower = utf8::to_lower(tokens[i].text);
  const std::u32string cps = utf8::decode(lower);
  const std::string shape = word_shape(tokens[i].text);

  FeatureVector f;
  f.reserve(16);
  f.push_back("bias");
  f.push_back("w=" + lower);
  f.push_back("shape=" + shape);
  for (std::size_t k = 1; k <= 3 && k <= cps.size(); ++k) {
    f.push_back("pre" + std::to_string(k) + "=" + utf8::encode(cps.substr(0, k)));
    f.push_back("suf" + std::to_string(k) + "=" + utf8::encode(cps.substr(cps.size() - k)));
  }
  const bool digits = !cps.empty() && std::all_of(cps.begin(), cps.end(),
                                                   [](char32_t c) { return c >= U'0' && c <= U'9'; });
  f.push_back(digits ? "isdigit=true" : "isdigit=false");
  f.push_back("prev=" + (i == 0 ? std::string("<BOS>") : utf8::to_lower(tokens[i - 1].text)));
  f.push_back("next=" + (i + 1 == tokens.size() ? std::string("<EOS>")
                                                 : utf8::to_lower(tokens[i + 1].text)));
  const std::string kind_name(to_string(kind));
  f.push_back("kind=" + kind_name);
  f.push_back("kind|shape=" + kind_name + "|" + shape);
  return f;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

TransitionScores TransitionScores::zeros(std::size_t tags) {
  const auto n = static_cast<Eigen::Index>(tags);
  return {Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
}

TransitionMask TransitionMask::all_allowed(std::size_t tags) {
  const auto n = static_cast<Eigen::Index>(tags);
  return {BoolMatrix::Constant(n, n, true), BoolVector::Constant(n, true)};
}

TransitionMask bio_transition_mask() {
  auto mask = TransitionMask::all_allowed(BioTag::kCount);
  const auto tags = all_bio_tags();
  for (std::size_t to = 0; to < tags.size(); ++to) {
    if (tags[to].prefix() != BioTag::Prefix::I) continue;
    mask.start_allowed(static_cast<Eigen::Index>(to)) = false;
    for (std::size_t from = 0; from < tags.size(); ++from) {
      const bool same_entity = !tags[from].is_outside() && tags[from].type() == tags[to].type();
      if (!same_entity) mask.allowed(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to)) = false;
    }
  }
  return mask;
}

Decoded viterbi_decode(const ScoreMatrix& emissions, const TransitionScores& transitions,
                       const TransitionMask& mask) {
  const Eigen::Index n = emissions.rows();
  const Eigen::Index tags = emissions.cols();
  if (transitions.pair.rows() != tags || transitions.pair.cols() != tags ||
      transitions.start.size() != tags || mask.allowed.rows() != tags ||
      mask.allowed.cols() != tags || mask.start_allowed.size() != tags) {
    throw Error(ErrorCode::InvalidArgument, "emission, transition and mask dimensions disagree");
  }
  Decoded out;
  if (n == 0) return out;
  if (tags == 0) throw Error(ErrorCode::InvalidArgument, "empty tag set");

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  // suffix(t, j): best score of positions t..n-1 given tag j at t.
  Eigen::MatrixXd suffix(n, tags);
  suffix.row(n - 1) = emissions.row(n - 1);
  for (Eigen::Index t = n - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < tags; ++i) {
      double best = kNegInf;
      for (Eigen::Index j = 0; j < tags; ++j) {
        if (!mask.allowed(i, j) || suffix(t + 1, j) == kNegInf) continue;
        best = std::max(best, transitions.pair(i, j) + suffix(t + 1, j));
      }
      suffix(t, i) = best == kNegInf ? kNegInf : emissions(t, i) + best;
    }
  }

  // Forward greedy choice over exact suffix values; the first (smallest
  // index) maximiser at each step yields the lexicographically smallest
  // optimal path.
  out.path.resize(static_cast<std::size_t>(n));
  double best = kNegInf;
  Eigen::Index arg = -1;
  for (Eigen::Index j = 0; j < tags; ++j) {
    if (!mask.start_allowed(j) || suffix(0, j) == kNegInf) continue;
    const double v = transitions.start(j) + suffix(0, j);
    if (v > best) {
      best = v;
      arg = j;
    }
  }
  if (arg < 0) throw Error(ErrorCode::InvalidArgument, "no legal tag sequence under the mask");
  out.score = best;
  out.path[0] = static_cast<std::size_t>(arg);
  for (Eigen::Index t = 1; t < n; ++t) {
    const auto prev = static_cast<Eigen::Index>(out.path[static_cast<std::size_t>(t - 1)]);
    double step_best = kNegInf;
    Eigen::Index step_arg = -1;
    for (Eigen::Index j = 0; j < tags; ++j) {
      if (!mask.allowed(prev, j) || suffix(t, j) == kNegInf) continue;
      const double v = transitions.pair(prev, j) + suffix(t, j);
      if (v > step_best) {
        step_best = v;
        step_arg = j;
      }
    }
    out.path[static_cast<std::size_t>(t)] = static_cast<std::size_t>(step_arg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (max_epochs == 0) throw Error(ErrorCode::InvalidArgument, "max_epochs must be positive");
  if (patience == 0) throw Error(ErrorCode::InvalidArgument, "patience must be positive");
  if (patience > max_epochs) {
    throw Error(ErrorCode::InvalidArgument, "patience must not exceed max_epochs");
  }
}

TaggerModel::TaggerModel()
    : emission_(0, static_cast<Eigen::Index>(BioTag::kCount)),
      transitions_(TransitionScores::zeros(BioTag::kCount)),
      mask_(bio_transition_mask()) {}

std::vector<std::vector<std::size_t>> TaggerModel::feature_ids(std::span<const Token> tokens,
                                                               SectionKind kind) const {
  std::vector<std::vector<std::size_t>> ids(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    for (const auto& f : extract_features(tokens, i, kind)) {
      auto it = index_.find(f);
      if (it != index_.end()) ids[i].push_back(it->second);
    }
  }
  return ids;
}

ScoreMatrix TaggerModel::emission_scores(const std::vector<std::vector<std::size_t>>& ids) const {
  ScoreMatrix e = ScoreMatrix::Zero(static_cast<Eigen::Index>(ids.size()),
                                    static_cast<Eigen::Index>(BioTag::kCount));
  for (std::size_t t = 0; t < ids.size(); ++t) {
    for (std::size_t f : ids[t]) e.row(static_cast<Eigen::Index>(t)) += emission_.row(static_cast<Eigen::Index>(f));
  }
  return e;
}

std::vector<BioTag> TaggerModel::tag(std::span<const Token> tokens, SectionKind kind) const {
  if (tokens.empty()) return {};
  const Decoded d = viterbi_decode(emission_scores(feature_ids(tokens, kind)), transitions_, mask_);
  std::vector<BioTag> tags;
  tags.reserve(d.path.size());
  for (std::size_t i : d.path) tags.push_back(BioTag::from_index(i));
  return tags;
}

bool operator==(const TaggerModel& a, const TaggerModel& b) {
  return a.features_ == b.features_ && a.emission_ == b.emission_ &&
         a.transitions_.pair == b.transitions_.pair &&
         a.transitions_.start == b.transitions_.start && a.meta_ == b.meta_;
}

std::vector<EntitySpan> predict(const TaggerModel& model, const Section& section) {
  const auto tokens = tokenize(section.text);
  return tags_to_spans(tokens, model.tag(tokens, section.kind), Provenance::Model);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

std::vector<TrainingExample> make_examples(std::span<const Section* const> sections,
                                           std::vector<AlignmentWarning>* warnings) {
  std::vector<TrainingExample> out;
  out.reserve(sections.size());
  for (const Section* s : sections) {
    TrainingExample ex;
    ex.tokens = tokenize(s->text);
    auto aligned = spans_to_tags(ex.tokens, s->spans);
    ex.tags = std::move(aligned.tags);
    ex.kind = s->kind;
    if (warnings) warnings->insert(warnings->end(), aligned.warnings.begin(), aligned.warnings.end());
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingExample> make_examples(const Dataset& dataset, const SplitAssignment& assignment,
                                           Split split, std::vector<AlignmentWarning>* warnings) {
  std::vector<const Section*> sections;
  for (const auto& doc : dataset.documents) {
    auto it = assignment.find(doc.id);
    if (it == assignment.end() || it->second != split) continue;
    for (const auto& s : doc.sections) sections.push_back(&s);
  }
  return make_examples(sections, warnings);
}

bool EarlyStopping::update(double metric) {
  ++epochs_;
  if (best_epoch_ == 0 || metric > best_) {
    best_ = metric;
    best_epoch_ = epochs_;
    return true;
  }
  return false;
}

class TaggerTrainer {
 public:
  TaggerTrainer(std::span<const TrainingExample> train_set, const TrainConfig& config)
      : config_(config) {
    const auto tag_count = static_cast<Eigen::Index>(BioTag::kCount);
    // Dictionary from training features, in first-seen order.
    for (const auto& ex : train_set) {
      Encoded enc;
      enc.ids.resize(ex.tokens.size());
      for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
        for (auto& f : extract_features(ex.tokens, i, ex.kind)) {
          auto [it, inserted] = model_.index_.emplace(f, model_.features_.size());
          if (inserted) model_.features_.push_back(std::move(f));
          enc.ids[i].push_back(it->second);
        }
      }
      // Repair orphan I- tags so every gold sequence is legal under the mask.
      for (const BioTag& t : spans_to_tags(ex.tokens, tags_to_spans(ex.tokens, ex.tags)).tags) {
        enc.gold.push_back(t.index());
      }
      train_.push_back(std::move(enc));
    }
    const auto feature_count = static_cast<Eigen::Index>(model_.features_.size());
    weights_ = TaggerModel::WeightMatrix::Zero(feature_count, tag_count);
    weight_sums_ = weights_;
    trans_ = TransitionScores::zeros(BioTag::kCount);
    trans_sums_ = trans_;
  }

  std::size_t size() const { return train_.size(); }

  /// One shuffled pass; returns the number of mis-decoded positions.
  std::size_t epoch(std::size_t epoch_no) {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config_.seed, epoch_no));
    shuffle(std::span(order), rng);

    std::size_t errors = 0;
    for (std::size_t idx : order) {
      const Encoded& ex = train_[idx];
      if (!ex.gold.empty()) {
        ScoreMatrix e = ScoreMatrix::Zero(static_cast<Eigen::Index>(ex.ids.size()),
                                          static_cast<Eigen::Index>(BioTag::kCount));
        for (std::size_t t = 0; t < ex.ids.size(); ++t) {
          for (std::size_t f : ex.ids[t]) e.row(static_cast<Eigen::Index>(t)) += weights_.row(static_cast<Eigen::Index>(f));
        }
        const Decoded d = viterbi_decode(e, trans_, model_.mask_);
        if (d.path != ex.gold) errors += update(ex, d.path);
      }
      ++step_;
    }
    return errors;
  }

  /// Current parameters (averaged when configured) as a model.
  TaggerModel snapshot() const {
    TaggerModel m = model_;
    if (config_.averaging) {
      const double c = static_cast<double>(step_);
      m.emission_ = weights_ - weight_sums_ / c;
      m.transitions_.pair = trans_.pair - trans_sums_.pair / c;
      m.transitions_.start = trans_.start - trans_sums_.start / c;
    } else {
      m.emission_ = weights_;
      m.transitions_ = trans_;
    }
    return m;
  }

  static void set_meta(TaggerModel& m, TrainingMeta meta) { m.meta_ = std::move(meta); }

 private:
  struct Encoded {
    std::vector<std::vector<std::size_t>> ids;
    std::vector<std::size_t> gold;
  };

  // Averaging uses the lazy-sum trick: sums accumulate step * delta so the
  // average is w - sums / step.
  void bump_emission(std::size_t f, std::size_t tag, double delta) {
    const auto r = static_cast<Eigen::Index>(f);
    const auto c = static_cast<Eigen::Index>(tag);
    weights_(r, c) += delta;
    weight_sums_(r, c) += static_cast<double>(step_) * delta;
  }
  void bump_pair(std::size_t from, std::size_t to, double delta) {
    const auto r = static_cast<Eigen::Index>(from);
    const auto c = static_cast<Eigen::Index>(to);
    trans_.pair(r, c) += delta;
    trans_sums_.pair(r, c) += static_cast<double>(step_) * delta;
  }
  void bump_start(std::size_t tag, double delta) {
    const auto c = static_cast<Eigen::Index>(tag);
    trans_.start(c) += delta;
    trans_sums_.start(c) += static_cast<double>(step_) * delta;
  }

  std::size_t update(const Encoded& ex, const std::vector<std::size_t>& pred) {
    std::size_t errors = 0;
    const auto& gold = ex.gold;
    for (std::size_t t = 0; t < gold.size(); ++t) {
      if (gold[t] != pred[t]) {
        ++errors;
        for (std::size_t f : ex.ids[t]) {
          bump_emission(f, gold[t], 1.0);
          bump_emission(f, pred[t], -1.0);
        }
      }
      if (t == 0) {
        if (gold[0] != pred[0]) {
          bump_start(gold[0], 1.0);
          bump_start(pred[0], -1.0);
        }
      } else if (gold[t - 1] != pred[t - 1] || gold[t] != pred[t]) {
        bump_pair(gold[t - 1], gold[t], 1.0);
        bump_pair(pred[t - 1], pred[t], -1.0);
      }
    }
    return errors;
  }

  TrainConfig config_;
  TaggerModel model_;
  std::vector<Encoded> train_;
  TaggerModel::WeightMatrix weights_;
  TaggerModel::WeightMatrix weight_sums_;
  TransitionScores trans_;
  TransitionScores trans_sums_;
  std::size_t step_ = 1;
};

namespace {

double dev_micro_f1(const TaggerModel& model, std::span<const TrainingExample> dev_set) {
  SpanCounts counts;
  for (const auto& ex : dev_set) {
    const auto gold = tags_to_spans(ex.tokens, ex.tags);
    const auto pred = tags_to_spans(ex.tokens, model.tag(ex.tokens, ex.kind));
    counts.add(gold, pred);
  }
  return counts.report().micro_f1;
}

void check_examples(std::span<const TrainingExample> set, const char* name) {
  for (const auto& ex : set) {
    if (ex.tokens.size() != ex.tags.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  std::string(name) + " example has mismatched token and tag counts");
    }
  }
}

}  // namespace

TrainResult train(std::span<const TrainingExample> train_set, std::span<const TrainingExample> dev_set,
                  const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw Error(ErrorCode::InvalidArgument, "training set is empty");
  if (dev_set.empty()) throw Error(ErrorCode::InvalidArgument, "dev set is empty");
  check_examples(train_set, "training");
  check_examples(dev_set, "dev");

  TaggerTrainer trainer(train_set, config);
  EarlyStopping stopping(config.patience);
  TrainResult result;
  for (std::size_t e = 1; e <= config.max_epochs; ++e) {
    result.log.train_errors.push_back(trainer.epoch(e));
    TaggerModel current = trainer.snapshot();
    const double f1 = dev_micro_f1(current, dev_set);
    result.log.dev_f1.push_back(f1);
    if (stopping.update(f1)) result.model = std::move(current);
    if (stopping.should_stop()) {
      result.log.stopped_early = e < config.max_epochs;
      break;
    }
  }
  result.log.best_epoch = stopping.best_epoch();
  TaggerTrainer::set_meta(result.model, TrainingMeta{stopping.epochs(), stopping.best_epoch(),
                                                     result.log.dev_f1, config.seed,
                                                     config.averaging});
  return result;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "model files store raw little-endian doubles");

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void doubles(const double* p, std::size_t n) { bytes(p, n * sizeof(double)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(ErrorCode::ParseError, "model file is truncated");
    }
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 24)) throw Error(ErrorCode::ParseError, "model file string too long");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::uint64_t count(std::uint64_t limit) {
    const std::uint64_t n = u64();
    if (n > limit) throw Error(ErrorCode::ParseError, "model file count out of range");
    return n;
  }
  void doubles(double* p, std::size_t n) { bytes(p, n * sizeof(double)); }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(const TaggerModel& model, std::ostream& out) {
  Writer w(out);
  w.bytes(kModelMagic, sizeof kModelMagic);
  w.u32(kModelFormatVersion);
  const auto tags = all_bio_tags();
  w.u32(static_cast<std::uint32_t>(tags.size()));
  for (const auto& t : tags) w.str(t.str());
  w.u64(model.feature_count());
  for (const auto& f : model.features()) w.str(f);
  w.doubles(model.emission_weights().data(), static_cast<std::size_t>(model.emission_weights().size()));
  w.doubles(model.transitions().pair.data(), static_cast<std::size_t>(model.transitions().pair.size()));
  w.doubles(model.transitions().start.data(), static_cast<std::size_t>(model.transitions().start.size()));
  const auto& meta = model.meta();
  w.u64(meta.epochs_run);
  w.u64(meta.best_epoch);
  w.u64(meta.seed);
  w.u8(meta.averaged ? 1 : 0);
  w.u64(meta.dev_f1_history.size());
  w.doubles(meta.dev_f1_history.data(), meta.dev_f1_history.size());
  if (!out) throw Error(ErrorCode::Io, "failed writing model");
}

void save_model(const TaggerModel& model, const std::filesystem::path& path) {
  std::ostringstream ss(std::ios::binary);
  save_model(model, ss);
  write_file_atomic(path, ss.str());
}

TaggerModel load_model(std::istream& in) {
  Reader r(in);
  char magic[sizeof kModelMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::ParseError, "not a tagger model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                "unsupported model format version " + std::to_string(version),
                {{"version", std::to_string(version)}});
  }
  const auto tags = all_bio_tags();
  if (r.u32() != tags.size()) throw Error(ErrorCode::ParseError, "model label set mismatch");
  for (const auto& t : tags) {
    if (r.str() != t.str()) throw Error(ErrorCode::ParseError, "model label set mismatch");
  }

  TaggerModel m;
  const std::uint64_t features = r.count(1ull << 28);
  m.features_.reserve(features);
  for (std::uint64_t i = 0; i < features; ++i) {
    m.features_.push_back(r.str());
    if (!m.index_.emplace(m.features_.back(), i).second) {
      throw Error(ErrorCode::ParseError, "duplicate feature in model file");
    }
  }
  m.emission_.resize(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(tags.size()));
  r.doubles(m.emission_.data(), static_cast<std::size_t>(m.emission_.size()));
  r.doubles(m.transitions_.pair.data(), static_cast<std::size_t>(m.transitions_.pair.size()));
  r.doubles(m.transitions_.start.data(), static_cast<std::size_t>(m.transitions_.start.size()));
  m.meta_.epochs_run = r.u64();
  m.meta_.best_epoch = r.u64();
  m.meta_.seed = r.u64();
  m.meta_.averaged = r.u8() != 0;
  m.meta_.dev_f1_history.resize(r.count(1ull << 24));
  r.doubles(m.meta_.dev_f1_history.data(), m.meta_.dev_f1_history.size());
  if (!r.at_end()) throw Error(ErrorCode::ParseError, "trailing bytes after model data");
  return m;
}

TaggerModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return load_model(in);
}

}  // namespace cvner
