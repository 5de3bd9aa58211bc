#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <regex>

#include "cvner/eval.hpp"
#include "cvner/io.hpp"
#include "support.hpp"

using namespace cvner;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with `args` inside `dir`, capturing both streams.
Run cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / ".stdout";
  const auto err = dir / ".stderr";
  const std::string cmd = "cd '" + dir.path().string() + "' && '" CVNER_CLI "' " + args + " > '" + out.string() +
                          "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

std::vector<std::string> percentages(const std::string& text) {
  static const std::regex pct(R"(\b\d+\.\d\d\b)");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pct); it != std::sregex_iterator(); ++it)
    out.push_back(it->str());
  return out;
}

}  // namespace

TEST_CASE("fixture, validate, split") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "fixture --seed 4 --out ds.jsonl --assignment-out fx.json").status == 0);
  CHECK(cli(dir, "validate ds.jsonl").status == 0);

  REQUIRE(cli(dir, "split ds.jsonl --ratios 0.7,0.15,0.15 --seed 7 --out a.json").status == 0);
  REQUIRE(cli(dir, "split ds.jsonl --ratios 0.7,0.15,0.15 --seed 7 --out b.json").status == 0);
  CHECK(read_file(dir / "a.json") == read_file(dir / "b.json"));
  REQUIRE(cli(dir, "split ds.jsonl --ratios 0.7,0.15,0.15 --seed 8 --out c.json").status == 0);
  CHECK(read_file(dir / "a.json") != read_file(dir / "c.json"));
}

TEST_CASE("eval") {
  testing::TempDir dir;
  SUBCASE("reconstructed counts reproduce the published aggregates") {
    const Run r = cli(dir, "eval --counts '" CVNER_TEST_DATA "/electra_counts.json' --name ELECTRA");
    REQUIRE(r.status == 0);
    CHECK(r.out.find("88.56") != std::string::npos);
    CHECK(r.out.find("90.19") != std::string::npos);
    CHECK(r.out.find("88.55") != std::string::npos);
  }
  SUBCASE("gold against itself") {
    write_file_atomic(dir / "gold.jsonl", serialize_dataset(testing::small_dataset(4)));
    const Run r = cli(dir, "eval --gold gold.jsonl --pred gold.jsonl --report-out rep.json");
    REQUIRE(r.status == 0);
    // Types absent from the data score 0; every type present is perfect.
    const auto report = report_from_json(nlohmann::json::parse(read_file(dir / "rep.json")));
    CHECK(report.micro_f1 == 100.0);
    CHECK(report.weighted_f1 == 100.0);
    CHECK(r.out.find("100.00") != std::string::npos);
  }
  SUBCASE("full fixture gold against itself renders only 100.00") {
    REQUIRE(cli(dir, "fixture --seed 2 --out ds.jsonl").status == 0);
    const Run r = cli(dir, "eval --gold ds.jsonl --pred ds.jsonl --report-out rep.json --name self");
    REQUIRE(r.status == 0);
    const auto pcts = percentages(r.out);
    CHECK(pcts.size() >= 27);
    for (const auto& p : pcts) CHECK(p == "100.00");

    REQUIRE(cli(dir, "report rep.json rep.json --name a --name b --style comparison").status == 0);
  }
}

TEST_CASE("train, predict, eval round") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "fixture --seed 6 --out ds.jsonl --assignment-out a.json").status == 0);
  const Run t = cli(dir, "train ds.jsonl --assignment a.json --max-epochs 8 --patience 3 --out m.bin --log-out log.json");
  REQUIRE(t.status == 0);
  CHECK(std::filesystem::exists(dir / "m.bin"));
  CHECK(nlohmann::json::parse(read_file(dir / "log.json")).contains("dev_f1"));
  REQUIRE(cli(dir, "predict m.bin ds.jsonl --assignment a.json --split TEST --out pred.jsonl").status == 0);
  const Run e = cli(dir, "eval --gold ds.jsonl --pred pred.jsonl --assignment a.json --split TEST");
  CHECK(e.status == 0);
  CHECK(e.out.find("Micro F1") != std::string::npos);
}

TEST_CASE("exit codes and no partial output") {
  testing::TempDir dir;
  write_file_atomic(dir / "gold.jsonl", serialize_dataset(testing::small_dataset(4)));
  write_file_atomic(dir / "keep.json", "old");

  CHECK(cli(dir, "").status == 1);
  CHECK(cli(dir, "frobnicate").status == 1);
  CHECK(cli(dir, "split gold.jsonl --bogus").status == 1);
  CHECK(cli(dir, "split gold.jsonl --ratios 0.7,0.2,0.2 --out keep.json").status == 1);
  CHECK(cli(dir, "eval --gold gold.jsonl").status == 1);

  Run r = cli(dir, "validate missing.jsonl");
  CHECK(r.status == 2);
  CHECK_FALSE(r.err.empty());

  std::string lines;
  for (int i = 1; i <= 8; ++i) lines += i == 7 ? "not json\n" : "{\"section_id\":\"doc-0-skill\",\"start\":0,\"end\":6,\"type\":\"SKILL\"}\n";
  write_file_atomic(dir / "bad.jsonl", lines);
  r = cli(dir, "eval --gold gold.jsonl --pred bad.jsonl --report-out keep.json");
  CHECK(r.status == 2);
  CHECK(r.err.find("7") != std::string::npos);
  CHECK(read_file(dir / "keep.json") == "old");

  std::string text = serialize_dataset(testing::small_dataset(3));
  text.replace(text.find("\"end\":6"), 7, "\"end\":99");
  write_file_atomic(dir / "broken.jsonl", text);
  CHECK(cli(dir, "validate broken.jsonl").status == 2);
  CHECK(cli(dir, "split broken.jsonl --out out.json").status == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "out.json"));
  REQUIRE(cli(dir, "split gold.jsonl --out a.json").status == 0);
  CHECK(cli(dir, "train broken.jsonl --assignment a.json --out m.bin").status == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "m.bin"));

  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
}

TEST_CASE("bootstrap stages") {
  testing::TempDir dir;
  const Dataset gold = testing::small_dataset(10);
  write_file_atomic(dir / "gold.jsonl", serialize_dataset(gold));
  REQUIRE(cli(dir, "bootstrap create --project p --dataset gold.jsonl --seed 3 --max-epochs 6 --patience 2").status == 0);
  CHECK(cli(dir, "bootstrap train --project p").status == 2);
  REQUIRE(cli(dir, "bootstrap seed-annotate --project p").status == 0);
  REQUIRE(cli(dir, "bootstrap review --project p --from gold.jsonl").status == 0);
  REQUIRE(cli(dir, "bootstrap train --project p").status == 0);
  REQUIRE(cli(dir, "bootstrap model-annotate --project p").status == 0);
  CHECK(cli(dir, "bootstrap finalize --project p --out early.jsonl").status == 2);
  CHECK_FALSE(std::filesystem::exists(dir / "early.jsonl"));
  REQUIRE(cli(dir, "bootstrap review --project p --from gold.jsonl").status == 0);
  REQUIRE(cli(dir, "bootstrap finalize --project p --out final.jsonl --stats-out stats.json").status == 0);
  CHECK(read_file(dir / "final.jsonl") == serialize_dataset(gold));
  const Run s = cli(dir, "bootstrap status --project p");
  CHECK(s.status == 0);
  CHECK(s.out.find("FINALIZED") != std::string::npos);
}
