#include <doctest.h>

#include <numeric>
#include <sstream>

#include "cvner/corpus.hpp"
#include "cvner/error.hpp"
#include "cvner/utf8.hpp"
#include "support.hpp"

using namespace cvner;
using testing::span;

namespace {

std::vector<std::string> kinds(const std::vector<Violation>& vs) {
  std::vector<std::string> out;
  for (const auto& v : vs) out.push_back(v.kind);
  return out;
}

Dataset random_dataset(Rng& rng) {
  static const std::vector<std::string> words = {"Python", "Ankara", "İstanbul", "2019", "Müdür", "C++",
                                                 "and",    "İngilizce", "Git",  "Berlin", ",", "ß"};
  Dataset ds;
  const std::size_t docs = uniform_index(rng, 4);
  for (std::size_t d = 0; d < docs; ++d) {
    Document doc{"d" + std::to_string(d), uniform_index(rng, 2) ? "Android Developer" : "Ai Engineer", {}};
    for (std::size_t k = 0; k < kSectionKinds.size(); ++k) {
      if (uniform_index(rng, 2) == 0) continue;
      std::string text;
      const std::size_t n = uniform_index(rng, 6);
      for (std::size_t w = 0; w < n; ++w) text += (w ? " " : "") + words[uniform_index(rng, words.size())];
      const std::size_t len = utf8::length(text);
      std::vector<EntitySpan> spans;
      std::size_t pos = 0;
      while (pos < len) {
        const std::size_t start = pos + uniform_index(rng, len - pos);
        const std::size_t end = start + 1 + uniform_index(rng, std::min<std::size_t>(3, len - start));
        spans.push_back(span(start, end, kEntityTypes[uniform_index(rng, 8)],
                             static_cast<Provenance>(uniform_index(rng, 3))));
        pos = end + uniform_index(rng, 3);
      }
      doc.sections.push_back({doc.id + "-" + std::to_string(k), kSectionKinds[k], text, spans});
    }
    ds.documents.push_back(std::move(doc));
  }
  return ds;
}

}  // namespace

TEST_CASE("closed vocabularies parse their own names and nothing else") {
  for (EntityType t : kEntityTypes) CHECK(parse_entity_type(to_string(t)) == t);
  for (SectionKind k : kSectionKinds) CHECK(parse_section_kind(to_string(k)) == k);
  CHECK(to_string(EntityType::DiplomaMajor) == "DIPLOMA_MAJOR");
  CHECK_THROWS_AS(parse_entity_type("PERSON"), Error);
  CHECK_THROWS_AS(parse_entity_type("city"), Error);
  CHECK_THROWS_AS(parse_section_kind("HOBBIES"), Error);
  CHECK(parse_split("test") == Split::Test);
}

TEST_CASE("validation") {
  SUBCASE("empty dataset is valid") { CHECK(validate_dataset(Dataset{}).empty()); }

  SUBCASE("end one past the text is out of bounds") {
    Dataset ds = testing::small_dataset(1);
    ds.documents[0].sections[1].spans = {span(0, 19, EntityType::Language)};
    const auto vs = validate_dataset(ds);
    REQUIRE(vs.size() == 1);
    CHECK(vs[0].kind == "span_out_of_bounds");
    CHECK(vs[0].section_id == "doc-0-language");
    CHECK(vs[0].offset == 19u);
  }

  SUBCASE("overlapping skills") {
    const std::vector<EntitySpan> spans = {span(0, 6, EntityType::Skill), span(4, 9, EntityType::Skill)};
    CHECK(kinds(validate_spans(20, spans)) == std::vector<std::string>{"span_overlap"});
  }

  SUBCASE("touching spans do not overlap") {
    const std::vector<EntitySpan> spans = {span(0, 4, EntityType::Skill), span(4, 9, EntityType::Skill)};
    CHECK(validate_spans(9, spans).empty());
  }

  SUBCASE("empty and unsorted spans") {
    CHECK(kinds(validate_spans(9, std::vector{span(3, 3, EntityType::Date)})) ==
          std::vector<std::string>{"span_empty"});
    CHECK(kinds(validate_spans(9, std::vector{span(5, 6, EntityType::Date), span(0, 2, EntityType::Date)})) ==
          std::vector<std::string>{"span_unsorted"});
  }

  SUBCASE("document structure") {
    Dataset ds = testing::small_dataset(2);
    ds.documents[1].id = "doc-0";
    ds.documents[0].sections[1].kind = SectionKind::Skill;
    const auto ks = kinds(validate_dataset(ds));
    CHECK(std::count(ks.begin(), ks.end(), "duplicate_doc_id") == 1);
    CHECK(std::count(ks.begin(), ks.end(), "duplicate_section_kind") == 1);
  }

  SUBCASE("offsets count code points") {
    // "İstanbul" is 8 scalar values but 9 bytes.
    Dataset ds;
    ds.documents.push_back({"d", "f", {testing::section("d-p", SectionKind::Personal, "İstanbul",
                                                        {span(0, 8, EntityType::City)})}});
    CHECK(validate_dataset(ds).empty());
    ds.documents[0].sections[0].spans[0].end = 9;
    CHECK(kinds(validate_dataset(ds)) == std::vector<std::string>{"span_out_of_bounds"});
  }
}

TEST_CASE("label histogram") {
  Dataset ds;
  for (int i = 0; i < 2; ++i) {
    const std::string id = "d" + std::to_string(i);
    ds.documents.push_back({id, "f", {testing::section(id + "-s", SectionKind::Skill, "Python",
                                                       {span(0, 6, EntityType::Skill)})}});
  }
  const SplitAssignment a = {{"d0", Split::Test}, {"d1", Split::Test}};
  const TypeCounts test = label_histogram(ds, a, Split::Test);
  CHECK(test[index_of(EntityType::Skill)] == 2);
  CHECK(std::accumulate(test.begin(), test.end(), std::size_t{0}) == 2);
  CHECK(label_histogram(ds, a, Split::Train) == TypeCounts{});
  CHECK_THROWS_AS(label_histogram(ds, SplitAssignment{{"d0", Split::Test}}, Split::Test), Error);

  SUBCASE("splits sum to the whole") {
    Rng rng(5);
    for (int round = 0; round < 50; ++round) {
      const Dataset r = random_dataset(rng);
      SplitAssignment assign;
      for (const auto& d : r.documents) assign[d.id] = kSplits[uniform_index(rng, 3)];
      TypeCounts sum{};
      for (Split s : kSplits) {
        const auto h = label_histogram(r, assign, s);
        for (std::size_t t = 0; t < sum.size(); ++t) sum[t] += h[t];
      }
      CHECK(sum == label_histogram(r));
    }
  }
}

TEST_CASE("dataset file round trip") {
  SUBCASE("three documents") {
    const Dataset ds = testing::small_dataset(3);
    CHECK(parse_dataset(serialize_dataset(ds)) == ds);
  }
  SUBCASE("random datasets") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const Dataset ds = random_dataset(rng);
      const std::string text = serialize_dataset(ds);
      const Dataset back = parse_dataset(text);
      REQUIRE(back == ds);
      CHECK(serialize_dataset(back) == text);
    }
  }
  SUBCASE("header line") {
    CHECK(serialize_dataset(Dataset{}) == "{\"schema_version\":1}\n");
  }
}

TEST_CASE("dataset parse errors") {
  const std::string header = "{\"schema_version\":1}\n";
  const std::string good =
      R"({"doc_id":"a","field":"f","sections":[{"section_id":"a-s","kind":"SKILL","text":"Go","spans":[]}]})";
  const std::string missing_text =
      R"({"doc_id":"b","field":"f","sections":[{"section_id":"b-s","kind":"SKILL","spans":[]}]})";

  SUBCASE("missing text names the line") {
    try {
      parse_dataset(header + good + "\n" + missing_text + "\n");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      CHECK(std::string(e.what()).find("text") != std::string::npos);
      CHECK(e.context().at("line") == "3");
    }
  }

  SUBCASE("unsupported version") {
    try {
      parse_dataset("{\"schema_version\":999}\n");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedVersion);
    }
  }

  SUBCASE("unknown entity type") {
    const std::string bad =
        R"({"doc_id":"a","field":"f","sections":[{"section_id":"a-s","kind":"SKILL","text":"Go","spans":[{"start":0,"end":2,"type":"PERSON"}]}]})";
    try {
      parse_dataset(header + bad + "\n");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnknownEntityType);
    }
  }

  SUBCASE("invalid UTF-8") {
    std::string bad = good;
    bad.replace(bad.find("Go"), 2, "G\xC3");
    CHECK_THROWS_AS(parse_dataset(header + bad + "\n"), Error);
  }

  SUBCASE("missing header") { CHECK_THROWS_AS(parse_dataset(good + "\n"), Error); }
}

TEST_CASE("assignment file round trip") {
  const SplitAssignment a = {{"x", Split::Train}, {"y", Split::Dev}, {"z", Split::Test}};
  std::stringstream ss;
  write_assignment(ss, a);
  CHECK(parse_assignment(ss) == a);

  std::stringstream twice("{\"doc_id\":\"x\",\"split\":\"TRAIN\"}\n{\"doc_id\":\"x\",\"split\":\"DEV\"}\n");
  CHECK_THROWS_AS(parse_assignment(twice), Error);
}

TEST_CASE("atomic dataset write leaves no temp files") {
  testing::TempDir dir;
  const Dataset ds = testing::small_dataset(2);
  write_dataset(ds, dir / "out.jsonl");
  CHECK(read_dataset(dir / "out.jsonl") == ds);
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}
