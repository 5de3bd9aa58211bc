#include "cvner/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include "cvner/error.hpp"
#include "cvner/random.hpp"

namespace cvner {

void SplitConfig::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error(ErrorCode::InvalidArgument, "split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "split ratios must sum to 1",
                {{"sum", std::to_string(sum)}});
  }
  if (!(weight_labels >= 0.0) || !(weight_fields >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "stratum weights must be non-negative");
  }
  if (restarts < 1) throw Error(ErrorCode::InvalidArgument, "restarts must be positive");
}

std::array<std::size_t, 3> largest_remainder_sizes(std::size_t n, const std::array<double, 3>& ratios) {
  constexpr double kEps = 1e-9;
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = ratios[s] * static_cast<double>(n);
    const double fl = std::floor(exact + kEps);
    sizes[s] = static_cast<std::size_t>(fl);
    frac[s] = std::max(0.0, exact - fl);
    assigned += sizes[s];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b] + kEps; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  while (assigned > n) {
    // Only reachable when ratios overshoot 1 by rounding; trim from the back.
    for (std::size_t s = 3; s-- > 0 && assigned > n;) {
      if (sizes[s] > 0) {
        --sizes[s];
        --assigned;
      }
    }
  }
  return sizes;
}

namespace {

// Per-document stratum counts: 8 entity types followed by one column per job field.
struct Strata {
  std::vector<std::vector<double>> doc_counts;
  std::vector<double> weights;
  std::vector<double> totals;
  std::vector<std::vector<std::size_t>> doc_nonzero;
};

Strata build_strata(const Dataset& dataset, const SplitConfig& config) {
  std::map<std::string, std::size_t> field_index;
  for (const auto& doc : dataset.documents) field_index.emplace(doc.field, 0);
  std::size_t next = kNumEntityTypes;
  for (auto& [_, idx] : field_index) idx = next++;

  Strata st;
  st.weights.assign(next, config.weight_fields);
  std::fill_n(st.weights.begin(), kNumEntityTypes, config.weight_labels);
  st.totals.assign(next, 0.0);
  for (const auto& doc : dataset.documents) {
    std::vector<double> c(next, 0.0);
    for (const auto& section : doc.sections) {
      for (const auto& span : section.spans) c[index_of(span.type)] += 1.0;
    }
    c[field_index.at(doc.field)] = 1.0;
    std::vector<std::size_t> nz;
    for (std::size_t k = 0; k < next; ++k) {
      st.totals[k] += c[k];
      if (c[k] > 0.0) nz.push_back(k);
    }
    st.doc_counts.push_back(std::move(c));
    st.doc_nonzero.push_back(std::move(nz));
  }
  return st;
}

// Contribution of one stratum given per-split counts, shares taken over `total`.
double stratum_term(const std::array<double, 3>& counts, double total,
                    const std::array<double, 3>& ratios) {
  if (total <= 0.0) return 0.0;
  double t = 0.0;
  for (std::size_t s = 0; s < 3; ++s) t += std::abs(counts[s] / total - ratios[s]);
  return t;
}

double final_score(const Strata& st, const std::vector<std::size_t>& split_of,
                   const std::array<double, 3>& ratios) {
  std::vector<std::array<double, 3>> counts(st.weights.size(), std::array<double, 3>{});
  for (std::size_t d = 0; d < split_of.size(); ++d) {
    for (std::size_t k : st.doc_nonzero[d]) counts[k][split_of[d]] += st.doc_counts[d][k];
  }
  double score = 0.0;
  for (std::size_t k = 0; k < st.weights.size(); ++k) {
    score += st.weights[k] * stratum_term(counts[k], st.totals[k], ratios);
  }
  return score;
}

struct Candidate {
  std::vector<std::size_t> split_of;  // per document
  double score;
};

Candidate greedy_pass(const Dataset& dataset, const Strata& st, const SplitConfig& config,
                      const std::array<std::size_t, 3>& caps, Rng& rng) {
  const std::size_t n = dataset.documents.size();
  const std::size_t k_count = st.weights.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(std::span(order), rng);
  std::vector<double> span_total(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t k = 0; k < kNumEntityTypes; ++k) span_total[d] += st.doc_counts[d][k];
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return span_total[a] > span_total[b]; });

  // The partial score takes shares over what has been assigned so far, so the
  // greedy step keeps proportions balanced throughout the pass.
  std::vector<std::array<double, 3>> counts(k_count, std::array<double, 3>{});
  std::vector<double> assigned(k_count, 0.0);
  std::array<std::size_t, 3> sizes{};
  Candidate cand{std::vector<std::size_t>(n, 0), 0.0};

  for (std::size_t d : order) {
    const auto& x = st.doc_counts[d];
    std::size_t best_split = 3;
    double best_delta = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < 3; ++s) {
      if (sizes[s] >= caps[s]) continue;
      double delta = 0.0;
      for (std::size_t k : st.doc_nonzero[d]) {
        const double before = stratum_term(counts[k], assigned[k], config.ratios);
        auto after_counts = counts[k];
        after_counts[s] += x[k];
        const double after = stratum_term(after_counts, assigned[k] + x[k], config.ratios);
        delta += st.weights[k] * (after - before);
      }
      if (delta < best_delta) {
        best_delta = delta;
        best_split = s;
      }
    }
    for (std::size_t k : st.doc_nonzero[d]) {
      counts[k][best_split] += x[k];
      assigned[k] += x[k];
    }
    ++sizes[best_split];
    cand.split_of[d] = best_split;
  }

  cand.score = final_score(st, cand.split_of, config.ratios);
  return cand;
}

}  // namespace

double imbalance_score(const Dataset& dataset, const SplitAssignment& assignment,
                       const SplitConfig& config) {
  const Strata st = build_strata(dataset, config);
  std::vector<std::size_t> split_of(dataset.documents.size());
  for (std::size_t d = 0; d < dataset.documents.size(); ++d) {
    auto it = assignment.find(dataset.documents[d].id);
    if (it == assignment.end()) {
      throw Error(ErrorCode::InvalidArgument,
                  "assignment does not cover document " + dataset.documents[d].id);
    }
    split_of[d] = static_cast<std::size_t>(it->second);
  }
  return final_score(st, split_of, config.ratios);
}

SplitResult stratified_split(const Dataset& dataset, const SplitConfig& config) {
  config.validate();
  if (dataset.documents.empty()) {
    throw Error(ErrorCode::InvalidArgument, "cannot split an empty dataset");
  }
  const Strata st = build_strata(dataset, config);
  const auto caps = largest_remainder_sizes(dataset.documents.size(), config.ratios);

  SplitResult result;
  std::optional<Candidate> best;
  for (int r = 0; r < config.restarts; ++r) {
    Rng rng(mix_seed(config.seed, static_cast<std::uint64_t>(r)));
    Candidate cand = greedy_pass(dataset, st, config, caps, rng);
    result.candidate_scores.push_back(cand.score);
    if (!best || cand.score < best->score) best = std::move(cand);
  }
  for (std::size_t d = 0; d < dataset.documents.size(); ++d) {
    result.assignment.emplace(dataset.documents[d].id, kSplits[best->split_of[d]]);
  }
  result.imbalance = best->score;
  return result;
}

}  // namespace cvner
