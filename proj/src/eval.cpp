#include "cvner/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cvner/error.hpp"
#include "cvner/io.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double ratio_pct(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

PerTypeScore PerTypeScore::from_counts(EntityType type, std::size_t tp, std::size_t fp,
                                       std::size_t fn) {
  PerTypeScore s;
  s.type = type;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.support = tp + fn;
  s.precision = ratio_pct(tp, tp + fp);
  s.recall = ratio_pct(tp, s.support);
  s.f1 = harmonic(s.precision, s.recall);
  return s;
}

PerTypeScore PerTypeScore::published(EntityType type, double precision, double recall, double f1,
                                     std::size_t support) {
  PerTypeScore s;
  s.type = type;
  s.support = support;
  s.precision = precision;
  s.recall = recall;
  s.f1 = f1;
  return s;
}

Aggregates aggregate(std::span<const PerTypeScore> per_type) {
  std::array<bool, kNumEntityTypes> seen{};
  for (const auto& s : per_type) {
    if (seen[index_of(s.type)]) {
      throw Error(ErrorCode::InvalidArgument,
                  "duplicate entity type " + std::string(to_string(s.type)));
    }
    seen[index_of(s.type)] = true;
  }
  for (EntityType t : kEntityTypes) {
    if (!seen[index_of(t)]) {
      throw Error(ErrorCode::InvalidArgument, "missing entity type " + std::string(to_string(t)));
    }
  }

  std::size_t tp = 0, fp = 0, fn = 0, support = 0;
  double f1_sum = 0.0, weighted_sum = 0.0;
  for (const auto& s : per_type) {
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
    support += s.support;
    f1_sum += s.f1;
    weighted_sum += static_cast<double>(s.support) * s.f1;
  }
  Aggregates a;
  a.micro_f1 = harmonic(ratio_pct(tp, tp + fp), ratio_pct(tp, tp + fn));
  a.macro_f1 = f1_sum / static_cast<double>(kNumEntityTypes);
  a.weighted_f1 = support == 0 ? 0.0 : weighted_sum / static_cast<double>(support);
  return a;
}

MetricsReport make_report(const std::array<std::size_t, kNumEntityTypes>& tp,
                          const std::array<std::size_t, kNumEntityTypes>& fp,
                          const std::array<std::size_t, kNumEntityTypes>& fn) {
  MetricsReport report;
  for (EntityType t : kEntityTypes) {
    const auto i = index_of(t);
    report.per_type[i] = PerTypeScore::from_counts(t, tp[i], fp[i], fn[i]);
  }
  const Aggregates a = aggregate(report.per_type);
  report.micro_f1 = a.micro_f1;
  report.macro_f1 = a.macro_f1;
  report.weighted_f1 = a.weighted_f1;
  return report;
}

void SpanCounts::add(std::span<const EntitySpan> gold, std::span<const EntitySpan> predicted) {
  using Key = std::tuple<std::size_t, std::size_t, EntityType>;
  std::multiset<Key> unmatched;
  for (const auto& g : gold) unmatched.emplace(g.start, g.end, g.type);
  for (const auto& p : predicted) {
    auto it = unmatched.find(Key{p.start, p.end, p.type});
    if (it != unmatched.end()) {
      ++tp[index_of(p.type)];
      unmatched.erase(it);
    } else {
      ++fp[index_of(p.type)];
    }
  }
  for (const auto& [start, end, type] : unmatched) ++fn[index_of(type)];
}

namespace {

void check_prediction_spans(const Section& section, const std::vector<EntitySpan>& spans) {
  std::vector<EntitySpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t length = utf8::length(section.text);
  for (const auto& v : validate_spans(length, sorted)) {
    const ErrorCode code =
        v.kind == "span_overlap" ? ErrorCode::SpanOverlap : ErrorCode::SpanOutOfBounds;
    throw Error(code, "section " + section.id + ": " + v.message,
                {{"section_id", section.id}, {"offset", std::to_string(v.offset.value_or(0))}});
  }
}

template <typename Include>
MetricsReport score_impl(const Dataset& gold, const Predictions& predictions, Include include) {
  std::map<std::string_view, const Section*> sections;
  for (const auto& doc : gold.documents) {
    if (!include(doc)) continue;
    for (const auto& s : doc.sections) sections.emplace(s.id, &s);
  }
  for (const auto& [id, spans] : predictions) {
    auto it = sections.find(id);
    if (it == sections.end()) {
      throw Error(ErrorCode::UnknownSection, "prediction for unknown section " + id,
                  {{"section_id", id}});
    }
    check_prediction_spans(*it->second, spans);
  }
  SpanCounts counts;
  static const std::vector<EntitySpan> kNone;
  for (const auto& [id, section] : sections) {
    auto it = predictions.find(std::string(id));
    counts.add(section->spans, it == predictions.end() ? kNone : it->second);
  }
  return counts.report();
}

}  // namespace

MetricsReport score(const Dataset& gold, const SplitAssignment& assignment, Split split,
                    const Predictions& predictions) {
  return score_impl(gold, predictions, [&](const Document& doc) {
    auto it = assignment.find(doc.id);
    return it != assignment.end() && it->second == split;
  });
}

MetricsReport score(const Dataset& gold, const Predictions& predictions) {
  return score_impl(gold, predictions, [](const Document&) { return true; });
}

// ---------------------------------------------------------------------------

Confusion reconstruct_confusion(double precision, double recall, std::size_t support) {
  auto bad = [&](const std::string& why) {
    return Error(ErrorCode::InvalidArgument, why,
                 {{"precision", std::to_string(precision)},
                  {"recall", std::to_string(recall)},
                  {"support", std::to_string(support)}});
  };
  if (!(precision >= 0.0 && precision <= 100.0) || !(recall >= 0.0 && recall <= 100.0)) {
    throw bad("precision and recall must lie in [0, 100]");
  }
  if (support == 0) throw bad("support must be positive");

  Confusion c;
  c.tp = static_cast<std::size_t>(std::llround(recall * static_cast<double>(support) / 100.0));
  if (c.tp > support) throw bad("recall exceeds support");
  if (precision == 0.0) {
    if (c.tp != 0) throw bad("zero precision with positive recall");
    throw bad("false positives are indeterminate at zero precision");
  }
  if (precision == 100.0) {
    c.fp = 0;
  } else {
    const double fp = static_cast<double>(c.tp) * 100.0 / precision - static_cast<double>(c.tp);
    c.fp = static_cast<std::size_t>(std::llround(std::max(0.0, fp)));
  }
  c.fn = support - c.tp;

  auto round2 = [](double v) { return std::floor(v * 100.0 + 0.5 + 1e-9) / 100.0; };
  const double p = round2(ratio_pct(c.tp, c.tp + c.fp));
  const double r = round2(ratio_pct(c.tp, support));
  if (std::abs(p - precision) > 0.005 + 1e-9 || std::abs(r - recall) > 0.005 + 1e-9) {
    throw bad("inputs are not consistent with any integer confusion counts");
  }
  return c;
}

// ---------------------------------------------------------------------------

Predictions parse_predictions(std::istream& in) {
  Predictions out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      const json j = json::parse(line);
      if (!j.is_object() || !j.contains("section_id") || !j["section_id"].is_string()) {
        throw Error(ErrorCode::ParseError, "missing string field \"section_id\"");
      }
      EntitySpan span = span_from_json(j);
      span.provenance = Provenance::Model;
      out[j["section_id"].get<std::string>()].push_back(span);
    } catch (const Error& e) {
      auto ctx = e.context();
      ctx["line"] = std::to_string(line_no);
      throw Error(e.code(), where + e.what(), std::move(ctx));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + e.what(), {{"line", std::to_string(line_no)}});
    }
  }
  for (auto& [_, spans] : out) std::sort(spans.begin(), spans.end());
  return out;
}

Predictions parse_predictions(std::string_view text) {
  std::istringstream ss{std::string(text)};
  return parse_predictions(ss);
}

Predictions read_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return parse_predictions(in);
}

void write_predictions(std::ostream& out, const Predictions& predictions) {
  for (const auto& [id, spans] : predictions) {
    for (const auto& s : spans) {
      ordered_json j;
      j["section_id"] = id;
      j["start"] = s.start;
      j["end"] = s.end;
      j["type"] = to_string(s.type);
      out << j.dump() << '\n';
    }
  }
}

void write_predictions(const Predictions& predictions, const std::filesystem::path& path) {
  std::ostringstream ss;
  write_predictions(ss, predictions);
  write_file_atomic(path, ss.str());
}

// ---------------------------------------------------------------------------

std::string format_score(double value) {
  // The epsilon absorbs binary representation error (95.595 is stored as
  // 95.59499...), so decimal half-up is honoured.
  const double scaled = std::floor(std::abs(value) * 100.0 + 0.5 + 1e-9);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%.2f", value < 0 && scaled != 0.0 ? "-" : "", scaled / 100.0);
  return buf;
}

namespace {

std::string pad_right(std::string_view s, std::size_t width) {
  std::string out(s);
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

std::string pad_left(std::string_view s, std::size_t width) {
  std::string out;
  if (s.size() < width) out.append(width - s.size(), ' ');
  out += s;
  return out;
}

}  // namespace

std::string render_comparison(std::span<const std::pair<std::string, MetricsReport>> rows) {
  std::size_t name_width = 10;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size() + 2);
  std::string out = pad_right("Model", name_width) + pad_left("Micro F1", 10) +
                    pad_left("Macro F1", 10) + pad_left("Weighted F1", 13) + "\n";
  for (const auto& [name, r] : rows) {
    out += pad_right(name, name_width) + pad_left(format_score(r.micro_f1), 10) +
           pad_left(format_score(r.macro_f1), 10) + pad_left(format_score(r.weighted_f1), 13) +
           "\n";
  }
  return out;
}

std::string render_report(const MetricsReport& report, ReportStyle style,
                          std::string_view model_name) {
  if (style == ReportStyle::ModelComparison) {
    const std::pair<std::string, MetricsReport> row{std::string(model_name), report};
    return render_comparison(std::span(&row, 1));
  }
  std::string out = pad_right("Entity type", 16) + pad_left("Precision", 11) +
                    pad_left("Recall", 9) + pad_left("F1", 9) + pad_left("Support", 9) + "\n";
  for (const auto& s : report.per_type) {
    out += pad_right(to_string(s.type), 16) + pad_left(format_score(s.precision), 11) +
           pad_left(format_score(s.recall), 9) + pad_left(format_score(s.f1), 9) +
           pad_left(std::to_string(s.support), 9) + "\n";
  }
  return out;
}

ordered_json to_json(const MetricsReport& report) {
  ordered_json j;
  auto rows = ordered_json::array();
  for (const auto& s : report.per_type) {
    ordered_json r;
    r["type"] = to_string(s.type);
    r["tp"] = s.tp;
    r["fp"] = s.fp;
    r["fn"] = s.fn;
    r["support"] = s.support;
    r["precision"] = s.precision;
    r["recall"] = s.recall;
    r["f1"] = s.f1;
    rows.push_back(std::move(r));
  }
  j["per_type"] = std::move(rows);
  j["micro_f1"] = report.micro_f1;
  j["macro_f1"] = report.macro_f1;
  j["weighted_f1"] = report.weighted_f1;
  return j;
}

MetricsReport report_from_json(const json& j) {
  try {
    MetricsReport report;
    std::array<bool, kNumEntityTypes> seen{};
    for (const auto& r : j.at("per_type")) {
      PerTypeScore s;
      s.type = parse_entity_type(r.at("type").get<std::string>());
      s.tp = r.at("tp").get<std::size_t>();
      s.fp = r.at("fp").get<std::size_t>();
      s.fn = r.at("fn").get<std::size_t>();
      s.support = r.at("support").get<std::size_t>();
      s.precision = r.at("precision").get<double>();
      s.recall = r.at("recall").get<double>();
      s.f1 = r.at("f1").get<double>();
      if (seen[index_of(s.type)]) throw Error(ErrorCode::ParseError, "duplicate type in report");
      seen[index_of(s.type)] = true;
      report.per_type[index_of(s.type)] = s;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw Error(ErrorCode::ParseError, "report must list all eight entity types");
    }
    report.micro_f1 = j.at("micro_f1").get<double>();
    report.macro_f1 = j.at("macro_f1").get<double>();
    report.weighted_f1 = j.at("weighted_f1").get<double>();
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid metrics report: ") + e.what());
  }
}

}  // namespace cvner
