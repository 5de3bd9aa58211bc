#include <doctest.h>

#include <functional>

#include "cvner/bootstrap.hpp"
#include "cvner/error.hpp"
#include "cvner/utf8.hpp"
#include "support.hpp"

using namespace cvner;
using testing::span;

namespace {

ProjectConfig small_config(double fraction = 0.2, std::uint64_t seed = 5) {
  ProjectConfig c;
  c.seed_fraction = fraction;
  c.seed = seed;
  c.train.max_epochs = 10;
  c.train.patience = 3;
  return c;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

const Section& gold_section(const Dataset& ds, std::string_view id) {
  for (const auto& d : ds.documents)
    for (const auto& s : d.sections)
      if (s.id == id) return s;
  throw std::out_of_range(std::string(id));
}

void review_all(ProjectHandle& h, const Dataset& gold, int pass) {
  while (const ReviewItem* item = h.project().queue(pass).next_pending()) {
    h.submit_review(item->section_id, gold_section(gold, item->section_id).spans);
  }
}

}  // namespace

TEST_CASE("create") {
  testing::TempDir dir;
  const Dataset ds = testing::small_dataset(10);
  ProjectHandle h = ProjectHandle::create(dir / "p", "p", ds, small_config());
  CHECK(h.project().state() == ProjectState::Created);
  CHECK(h.project().queue(1).size() == 0);
  CHECK(h.project().queue(2).size() == 0);
  CHECK(h.project().event_count() == 1);
  CHECK(h.read_events().at(0).operation == "create");
  CHECK(std::filesystem::exists(dir / "p/snapshots/000001-CREATED.jsonl"));
  CHECK(h.project().assignment().size() == 10);

  SUBCASE("same seed, same subset") {
    const ProjectHandle again = ProjectHandle::create(dir / "q", "q", ds, small_config());
    CHECK(again.project().seed_documents() == h.project().seed_documents());
    CHECK(h.project().seed_documents().size() == 2);
  }
  SUBCASE("invalid dataset is rejected with its violations") {
    Dataset bad = ds;
    bad.documents[3].sections[0].spans.push_back(span(30, 40, EntityType::Skill));
    bad.documents[4].sections[1].spans.push_back(span(5, 9, EntityType::Language));
    try {
      ProjectHandle::create(dir / "bad", "bad", bad, small_config());
      FAIL("accepted an invalid dataset");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidDataset);
      CHECK(e.context().at("violations") == "2");
      CHECK(std::string(e.what()).find("doc-3") != std::string::npos);
      CHECK(std::string(e.what()).find("doc-4") != std::string::npos);
    }
    CHECK_FALSE(std::filesystem::exists(dir / "bad/events.jsonl"));
  }
  SUBCASE("bad config") {
    CHECK(code_of([&] { ProjectHandle::create(dir / "c", "c", ds, small_config(0.0)); }) ==
          ErrorCode::InvalidArgument);
  }
  SUBCASE("subset selection") {
    CHECK(select_seed_documents(ds, 0.2, 1).size() == 2);
    CHECK(select_seed_documents(ds, 0.01, 1).size() == 1);
    CHECK(select_seed_documents(ds, 1.0, 1).size() == 10);
    CHECK(select_seed_documents(ds, 0.5, 1) == select_seed_documents(ds, 0.5, 1));
    CHECK(select_seed_documents(ds, 0.5, 1) != select_seed_documents(ds, 0.5, 2));
  }
}

TEST_CASE("full loop") {
  testing::TempDir dir;
  Dataset gold = testing::small_dataset(10);
  gold.documents[0].sections.push_back(testing::section("doc-0-empty", SectionKind::Experience, "nothing to find"));
  Dataset blank = gold;
  for (auto& d : blank.documents)
    for (auto& s : d.sections) s.spans.clear();
  ProjectHandle h = ProjectHandle::create(dir / "p", "p", blank, small_config());

  CHECK(code_of([&] { h.run_training_round(); }) == ErrorCode::StateViolation);
  CHECK(code_of([&] { h.model_annotate(); }) == ErrorCode::StateViolation);

  h.seed_annotate(Gazetteer::shipped());
  CHECK(h.project().state() == ProjectState::SeedAnnotated);
  std::size_t seed_sections = 0;
  for (const auto& d : blank.documents) {
    const auto& sd = h.project().seed_documents();
    if (std::find(sd.begin(), sd.end(), d.id) != sd.end()) seed_sections += d.sections.size();
  }
  CHECK(h.project().queue(1).size() == seed_sections);
  for (const auto& item : h.project().queue(1).items()) {
    CHECK(item.status == ReviewStatus::Pending);
    for (const auto& s : item.proposed) CHECK(s.provenance == Provenance::Seed);
  }
  CHECK(code_of([&] { h.seed_annotate(Gazetteer::shipped()); }) == ErrorCode::StateViolation);

  const std::string first = h.project().queue(1).items().front().section_id;
  const Section& sec = *h.project().section(first);
  const auto events_before = h.project().event_count();

  SUBCASE("overlapping spans leave the item pending") {
    CHECK(code_of([&] {
            h.submit_review(first, {span(0, 6, EntityType::Skill), span(3, 9, EntityType::Skill)});
          }) == ErrorCode::SpanOverlap);
    CHECK(h.project().queue(1).find(first)->status == ReviewStatus::Pending);
    CHECK(h.project().event_count() == events_before);
  }
  SUBCASE("out of bounds names the offsets") {
    const std::size_t len = utf8::length(sec.text);
    try {
      h.submit_review(first, {span(0, len + 3, EntityType::Skill)});
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SpanOutOfBounds);
      CHECK(e.context().at("end") == std::to_string(len + 3));
      CHECK(e.context().at("text_length") == std::to_string(len));
    }
  }
  SUBCASE("resubmission replaces and is logged") {
    h.submit_review(first, {});
    CHECK(h.project().state() == ProjectState::Review1InProgress);
    const auto rev = h.project().queue(1).find(first)->revision;
    CHECK(code_of([&] { h.submit_review(first, {}, rev - 1); }) == ErrorCode::VersionConflict);
    h.submit_review(first, gold_section(gold, first).spans, rev);
    const ReviewItem* item = h.project().queue(1).find(first);
    CHECK(item->reviewed == gold_section(gold, first).spans);
    CHECK(item->revision == rev + 1);
    CHECK(h.read_events().back().payload.contains("replaces"));
    CHECK(h.project().event_count() == events_before + 2);
  }

  review_all(h, gold, 1);
  CHECK(h.project().state() == ProjectState::Review1Done);
  CHECK(code_of([&] { h.submit_review(first, {}); }) == ErrorCode::StateViolation);

  const TrainingJob& job = h.run_training_round();
  CHECK(h.project().state() == ProjectState::ModelTrained);
  REQUIRE(h.project().model_file());
  CHECK(std::filesystem::exists(dir / "p" / *h.project().model_file()));
  CHECK(job.best_dev_f1 == 100.0);
  CHECK(job.dev_sections >= 1);
  CHECK(job.train_sections + job.dev_sections == seed_sections);

  h.model_annotate();
  CHECK(h.project().state() == ProjectState::ModelAnnotated);
  CHECK(code_of([&] { h.model_annotate(); }) == ErrorCode::StateViolation);
  CHECK(h.project().queue(2).size() == 21);
  for (const auto& item : h.project().queue(1).items()) {
    CHECK(h.project().queue(2).find(item.section_id)->proposed == item.reviewed);
  }

  const ReviewItem* last_pending = nullptr;
  while (true) {
    const ReviewItem* item = h.project().queue(2).next_pending();
    if (h.project().queue(2).done() + 1 == h.project().queue(2).size()) {
      last_pending = item;
      break;
    }
    h.submit_review(item->section_id, gold_section(gold, item->section_id).spans);
  }
  try {
    h.finalize();
    FAIL("finalized early");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StateViolation);
    CHECK(e.context().at("section_id") == last_pending->section_id);
  }
  h.submit_review(last_pending->section_id, {});
  CHECK(h.project().state() == ProjectState::Finalized);

  const FinalizeResult fin = h.finalize();
  CHECK(validate_dataset(fin.gold).empty());
  for (const auto& d : fin.gold.documents)
    for (const auto& s : d.sections)
      for (const auto& sp : s.spans) CHECK(sp.provenance == Provenance::Human);
  CHECK(fin.stats["review_items"]["2"]["DONE"] == 21);

  const ProjectHandle reopened = ProjectHandle::open(dir / "p");
  CHECK(reopened.project() == h.project());
  CHECK(state_json(reopened.project()) == state_json(h.project()));
}

TEST_CASE("random operation sequences") {
  const Dataset gold = testing::small_dataset(6, 2);
  const Gazetteer gaz = Gazetteer::shipped();
  Rng rng(17);
  ProjectState furthest = ProjectState::Created;
  for (int run = 0; run < 4; ++run) {
    testing::TempDir dir;
    ProjectHandle h = ProjectHandle::create(dir / "p", "p", gold, small_config(0.34, run));
    std::size_t failures = 0;
    for (int step = 0; step < 80; ++step) {
      const auto before_json = state_json(h.project());
      const auto before_count = h.project().event_count();
      const auto before_tree = testing::tree_digest(dir / "p");
      const std::size_t op = uniform_index(rng, 10);
      bool mutating = true;
      try {
        if (op == 0) {
          h.seed_annotate(gaz);
        } else if (op == 1) {
          h.run_training_round();
        } else if (op == 2) {
          h.model_annotate();
        } else if (op == 3) {
          mutating = false;
          h.finalize();
        } else {
          const auto& doc = gold.documents[uniform_index(rng, gold.documents.size())];
          const auto& sec = doc.sections[uniform_index(rng, doc.sections.size())];
          auto spans = sec.spans;
          if (op == 9) spans.push_back(span(0, 200, EntityType::Skill));
          std::optional<int> pass;
          if (uniform_index(rng, 4) == 0) pass = 1 + static_cast<int>(uniform_index(rng, 2));
          h.submit_review(sec.id, spans, std::nullopt, pass);
        }
        if (mutating) CHECK(h.project().event_count() == before_count + 1);
        else CHECK(h.project().event_count() == before_count);
      } catch (const Error&) {
        ++failures;
        CHECK(state_json(h.project()) == before_json);
        CHECK(h.project().event_count() == before_count);
        CHECK(testing::tree_digest(dir / "p") == before_tree);
      }
    }
    CHECK(failures > 0);
    furthest = std::max(furthest, h.project().state());
    CHECK(h.read_events().size() == h.project().event_count());
    CHECK(ProjectHandle::open(dir / "p").project() == h.project());
  }
  CHECK(furthest >= ProjectState::Review2InProgress);
}

TEST_CASE("open errors") {
  testing::TempDir dir;
  CHECK(code_of([&] { ProjectHandle::open(dir / "missing"); }) == ErrorCode::NotFound);

  ProjectHandle h = ProjectHandle::create(dir / "p", "p", testing::small_dataset(3), small_config());
  h.seed_annotate(Gazetteer::shipped());
  SUBCASE("tampered snapshot") {
    write_file_atomic(dir / "p/snapshots/000001-CREATED.jsonl", "{}\n");
    CHECK(code_of([&] { ProjectHandle::open(dir / "p"); }) == ErrorCode::InvalidDataset);
  }
  SUBCASE("duplicate create") {
    CHECK_THROWS_AS(ProjectHandle::create(dir / "p", "p", testing::small_dataset(3), small_config()), Error);
  }
}
