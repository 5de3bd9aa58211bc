#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cvner/corpus.hpp"
#include "cvner/io.hpp"
#include "cvner/random.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cvner") {
    static int counter = 0;
    cvner::Rng rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rng() % 1000000000) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Relative path -> content digest for every regular file below `dir`.
inline std::map<std::string, std::string> tree_digest(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    out[std::filesystem::relative(e.path(), dir).string()] = cvner::sha256_hex(cvner::read_file(e.path()));
  }
  return out;
}

inline cvner::Section section(std::string id, cvner::SectionKind kind, std::string text,
                              std::vector<cvner::EntitySpan> spans = {}) {
  return cvner::Section{std::move(id), kind, std::move(text), std::move(spans)};
}

inline cvner::EntitySpan span(std::size_t start, std::size_t end, cvner::EntityType type,
                              cvner::Provenance p = cvner::Provenance::Human) {
  return cvner::EntitySpan{start, end, type, p};
}

/// `n` small resumes, each with a SKILL and a LANGUAGE section; document i
/// belongs to field "f<i % fields>".
inline cvner::Dataset small_dataset(std::size_t n, std::size_t fields = 2) {
  using namespace cvner;
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "doc-" + std::to_string(i);
    Document d{id, "f" + std::to_string(i % fields), {}};
    d.sections.push_back(section(id + "-skill", SectionKind::Skill, "Python , Git and Docker",
                                 {span(0, 6, EntityType::Skill), span(9, 12, EntityType::Skill),
                                  span(17, 23, EntityType::Skill)}));
    d.sections.push_back(section(id + "-language", SectionKind::Language, "English and German",
                                 {span(0, 7, EntityType::Language), span(12, 18, EntityType::Language)}));
    ds.documents.push_back(std::move(d));
  }
  return ds;
}

}  // namespace testing
