#include <doctest.h>

#include <fstream>

#include "cvner/seed.hpp"
#include "cvner/utf8.hpp"
#include "support.hpp"

using namespace cvner;
using testing::section;

namespace {

std::vector<std::string> surfaces(const Section& s, const std::vector<EntitySpan>& spans) {
  std::vector<std::string> out;
  for (const auto& sp : spans) out.push_back(utf8::substr(s.text, sp.start, sp.end));
  return out;
}

}  // namespace

TEST_CASE("shipped gazetteers load") {
  const Gazetteer g = Gazetteer::shipped();
  CHECK(g.size() > 50);
  const Section s = section("x-language", SectionKind::Language, "English and German");
  const auto spans = seed_preannotate(s, g);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].type == EntityType::Language);
  CHECK(spans[0].provenance == Provenance::Seed);
  CHECK(surfaces(s, spans) == std::vector<std::string>{"English", "German"});
}

TEST_CASE("gazetteer hit") {
  Gazetteer g;
  g.add(EntityType::Language, "English");
  const Section s = section("a", SectionKind::Language, "Fluent english (C1)");
  const auto spans = seed_preannotate(s, g);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].type == EntityType::Language);
  CHECK(surfaces(s, spans) == std::vector<std::string>{"english"});

  SUBCASE("token boundaries only") {
    CHECK(seed_preannotate(section("b", SectionKind::Language, "Englishman"), g).empty());
  }
  SUBCASE("no hits gives no spans") {
    CHECK(seed_preannotate(section("c", SectionKind::Experience, "nothing here"), g).empty());
  }
}

TEST_CASE("date patterns") {
  const Gazetteer g;
  const Section s = section("d", SectionKind::Experience, "June 2019 - July 2021");
  auto spans = seed_preannotate(s, g);
  CHECK(surfaces(s, spans) == std::vector<std::string>{"June 2019", "July 2021"});
  for (const auto& sp : spans) CHECK(sp.type == EntityType::Date);

  const Section r = section("r", SectionKind::Education, "2018 - 2020, 06/2019 and Sep 2017");
  CHECK(surfaces(r, seed_preannotate(r, g)) == std::vector<std::string>{"2018", "2020", "06/2019", "Sep 2017"});

  DatePatterns only_years;
  only_years.month_year = false;
  only_years.numeric = false;
  CHECK(surfaces(r, seed_preannotate(r, g, only_years)) ==
        std::vector<std::string>{"2018", "2020", "2017"});
  CHECK(seed_preannotate(section("n", SectionKind::Experience, "room 3120"), g).empty());
}

TEST_CASE("longest match wins") {
  Gazetteer g;
  g.add(EntityType::City, "New York");
  g.add(EntityType::City, "York");
  const Section s = section("c", SectionKind::Personal, "Lives in New York now");
  const auto spans = seed_preannotate(s, g);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].type == EntityType::City);
  CHECK(surfaces(s, spans) == std::vector<std::string>{"New York"});

  Gazetteer h;
  h.add(EntityType::Skill, "machine learning");
  h.add(EntityType::Skill, "learning rate");
  const Section t = section("t", SectionKind::Skill, "machine learning rate");
  CHECK(surfaces(t, seed_preannotate(t, h)) == std::vector<std::string>{"machine learning"});
}

TEST_CASE("gazetteer files") {
  testing::TempDir dir;
  std::ofstream(dir / "city.txt") << "# comment\n\nİstanbul\nAnkara\n";
  const Gazetteer g = Gazetteer::load_directory(dir.path());
  CHECK(g.size() == 2);
  const Section s = section("p", SectionKind::Personal, "İSTANBUL / Ankara");
  const auto spans = seed_preannotate(s, g);
  CHECK(surfaces(s, spans) == std::vector<std::string>{"İSTANBUL", "Ankara"});
  CHECK(validate_spans(utf8::length(s.text), spans).empty());
}
