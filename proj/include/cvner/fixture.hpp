#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cvner/corpus.hpp"

namespace cvner {

/// Target marginals for a synthetic corpus: entity counts per split and
/// document counts per (split, job field).
struct FixtureProfile {
  std::vector<std::string> fields;
  std::array<TypeCounts, 3> labels{};
  std::array<std::vector<std::size_t>, 3> field_docs;

  /// Label distribution and job-field distribution of the published resume
  /// corpus (286 documents, five fields).
  static FixtureProfile published();

  std::size_t document_count() const;
};

FixtureProfile profile_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const FixtureProfile& profile);

struct Fixture {
  Dataset dataset;
  SplitAssignment assignment;
};

/// Builds a templated synthetic corpus whose per-split label and field
/// histograms equal the profile exactly. Every document gets all five
/// section kinds. Deterministic per seed. Throws Error(Infeasible) when a
/// split cannot host its label counts under the per-section template limits.
Fixture generate_fixture(const FixtureProfile& profile, std::uint64_t seed);

}  // namespace cvner
