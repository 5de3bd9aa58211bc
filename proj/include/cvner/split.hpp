#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cvner/corpus.hpp"

namespace cvner {

struct SplitConfig {
  std::array<double, 3> ratios = {0.70, 0.15, 0.15};  // train, dev, test
  std::uint64_t seed = 0;
  double weight_labels = 1.0;
  double weight_fields = 1.0;
  int restarts = 16;

  /// Throws Error(InvalidArgument) on negative ratios/weights, ratios not
  /// summing to 1 within 1e-9, or restarts < 1.
  void validate() const;
};

/// Floors each `ratio * n`, then hands out the remainder by largest
/// fractional part; ties go to train, then dev, then test.
std::array<std::size_t, 3> largest_remainder_sizes(std::size_t n, const std::array<double, 3>& ratios);

struct SplitResult {
  SplitAssignment assignment;
  double imbalance = 0.0;
  /// Score of every restart's candidate, in restart order.
  std::vector<double> candidate_scores;
};

/// Sum over splits s and strata k (entity types weighted by weight_labels,
/// job fields by weight_fields) of weight_k * |share of k in s - ratio_s|.
/// Strata with zero total are skipped.
double imbalance_score(const Dataset& dataset, const SplitAssignment& assignment,
                       const SplitConfig& config);

/// Person-level stratified split: documents are never divided. Runs
/// `restarts` randomized greedy passes and keeps the lowest-scoring
/// assignment (earliest restart wins ties). Deterministic for fixed inputs.
SplitResult stratified_split(const Dataset& dataset, const SplitConfig& config);

}  // namespace cvner
