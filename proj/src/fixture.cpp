#include "cvner/fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <string_view>

#include "cvner/error.hpp"
#include "cvner/random.hpp"
#include "cvner/utf8.hpp"

namespace cvner {

FixtureProfile FixtureProfile::published() {
  FixtureProfile p;
  p.fields = {"Ai Engineer", "Android Developer", "Developer Partner Engineer",
              "Developer Support Engineer", "Senior Software Developer"};
  // CITY, DATE, DEGREE, DIPLOMA_MAJOR, JOB_TITLE, LANGUAGE, COUNTRY, SKILL
  p.labels[0] = {463, 975, 176, 291, 641, 393, 329, 2885};
  p.labels[1] = {78, 192, 45, 63, 125, 101, 65, 610};
  p.labels[2] = {90, 234, 33, 65, 147, 85, 56, 618};
  p.field_docs[0] = {54, 37, 40, 32, 35};
  p.field_docs[1] = {12, 8, 9, 7, 7};
  p.field_docs[2] = {12, 8, 9, 8, 8};
  return p;
}

std::size_t FixtureProfile::document_count() const {
  std::size_t n = 0;
  for (const auto& row : field_docs) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

nlohmann::ordered_json to_json(const FixtureProfile& profile) {
  nlohmann::ordered_json j;
  j["fields"] = profile.fields;
  for (Split s : kSplits) {
    nlohmann::ordered_json split;
    nlohmann::ordered_json labels;
    for (EntityType t : kEntityTypes) labels[std::string(to_string(t))] = profile.labels[static_cast<std::size_t>(s)][index_of(t)];
    split["labels"] = std::move(labels);
    split["field_docs"] = profile.field_docs[static_cast<std::size_t>(s)];
    j[std::string(to_string(s))] = std::move(split);
  }
  return j;
}

FixtureProfile profile_from_json(const nlohmann::json& j) {
  try {
    FixtureProfile p;
    p.fields = j.at("fields").get<std::vector<std::string>>();
    for (Split s : kSplits) {
      const auto& split = j.at(std::string(to_string(s)));
      const auto si = static_cast<std::size_t>(s);
      p.labels[si] = {};
      for (const auto& [name, count] : split.at("labels").items()) {
        p.labels[si][index_of(parse_entity_type(name))] = count.get<std::size_t>();
      }
      p.field_docs[si] = split.at("field_docs").get<std::vector<std::size_t>>();
      if (p.field_docs[si].size() != p.fields.size()) {
        throw Error(ErrorCode::ParseError, "field_docs length must match fields");
      }
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("invalid fixture profile: ") + e.what());
  }
}

namespace {

using Kind = SectionKind;
using Type = EntityType;

struct Host {
  Kind kind;
  std::size_t cap;  // max mentions of the type per section of this kind
};

std::vector<Host> hosts_for(Type t) {
  switch (t) {
    case Type::City: return {{Kind::Personal, 2}, {Kind::Education, 3}, {Kind::Experience, 6}};
    case Type::Date: return {{Kind::Education, 8}, {Kind::Experience, 16}};
    case Type::Degree: return {{Kind::Education, 4}};
    case Type::DiplomaMajor: return {{Kind::Education, 4}};
    case Type::JobTitle: return {{Kind::Personal, 2}, {Kind::Experience, 10}};
    case Type::Language: return {{Kind::Language, 8}};
    case Type::Country: return {{Kind::Personal, 2}, {Kind::Education, 3}, {Kind::Experience, 6}};
    case Type::Skill: return {{Kind::Skill, 60}, {Kind::Experience, 15}};
  }
  return {};
}

const std::vector<std::string_view>& vocabulary(Type t) {
  static const std::vector<std::string_view> city = {
      "Istanbul", "Ankara", "Izmir", "Bursa", "London", "Berlin", "Munich", "Paris",
      "Amsterdam", "New York", "San Francisco", "Shenzhen", "Toronto", "Dublin"};
  static const std::vector<std::string_view> degree = {
      "Bachelor of Science", "Master of Science", "PhD", "BSc", "MSc", "Associate Degree",
      "Bachelor of Engineering", "MBA"};
  static const std::vector<std::string_view> major = {
      "Computer Engineering", "Computer Science", "Electrical and Electronics Engineering",
      "Software Engineering", "Mathematics", "Physics", "Industrial Engineering",
      "Information Systems"};
  static const std::vector<std::string_view> job = {
      "Software Engineer", "Senior Software Developer", "Android Developer", "AI Engineer",
      "Data Scientist", "Support Engineer", "Team Lead", "Backend Developer",
      "Machine Learning Engineer", "Partner Engineer"};
  static const std::vector<std::string_view> language = {
      "English", "Turkish", "German", "French", "Spanish", "Arabic", "Russian", "Chinese"};
  static const std::vector<std::string_view> country = {
      "Turkey", "Germany", "United Kingdom", "France", "China", "Netherlands", "Canada",
      "Ireland", "United States"};
  static const std::vector<std::string_view> skill = {
      "Python", "Java", "C++", "C#", "Git", "Docker", "Kubernetes", "TensorFlow", "PyTorch",
      "SQL", "Kotlin", "Linux", ".NET", "React", "Spring Boot", "Node.js", "JavaScript",
      "Android SDK", "Jenkins", "PostgreSQL", "scikit-learn", "Pandas", "REST", "Jira"};
  static const std::vector<std::string_view> none;
  switch (t) {
    case Type::City: return city;
    case Type::Degree: return degree;
    case Type::DiplomaMajor: return major;
    case Type::JobTitle: return job;
    case Type::Language: return language;
    case Type::Country: return country;
    case Type::Skill: return skill;
    case Type::Date: break;
  }
  return none;
}

std::string random_date(Rng& rng) {
  static constexpr std::string_view kMonths[] = {
      "January", "February", "March", "April", "May", "June", "July", "August",
      "September", "October", "November", "December"};
  const int year = 2000 + static_cast<int>(uniform_index(rng, 24));
  char buf[32];
  switch (uniform_index(rng, 3)) {
    case 0:
      return std::string(kMonths[uniform_index(rng, 12)]) + " " + std::to_string(year);
    case 1:
      return std::to_string(year);
    default:
      std::snprintf(buf, sizeof buf, "%02d/%d", 1 + static_cast<int>(uniform_index(rng, 12)), year);
      return buf;
  }
}

std::string_view pick_template(Kind kind, Type type, Rng& rng) {
  static const std::vector<std::string_view> city = {"Based in {}.", "Lives in {}.", "Office location: {}."};
  static const std::vector<std::string_view> country = {"Nationality: {}.", "Worked remotely from {}.", "Relocated to {}."};
  static const std::vector<std::string_view> date = {"Started in {}.", "Until {}.", "Completed in {}."};
  static const std::vector<std::string_view> degree = {"Holds a {}.", "Earned a {}.", "Awarded {}."};
  static const std::vector<std::string_view> major = {"Studied {}.", "Major: {}.", "Field of study: {}."};
  static const std::vector<std::string_view> job = {"Worked as {}.", "Position: {}.", "Promoted to {}."};
  static const std::vector<std::string_view> language = {"Speaks {}.", "Language: {}.", "Fluent in {}."};
  static const std::vector<std::string_view> skill = {"Used {} daily.", "Built services with {}.", "Maintained {} tooling."};
  (void)kind;
  const std::vector<std::string_view>* pool = nullptr;
  switch (type) {
    case Type::City: pool = &city; break;
    case Type::Country: pool = &country; break;
    case Type::Date: pool = &date; break;
    case Type::Degree: pool = &degree; break;
    case Type::DiplomaMajor: pool = &major; break;
    case Type::JobTitle: pool = &job; break;
    case Type::Language: pool = &language; break;
    case Type::Skill: pool = &skill; break;
  }
  return (*pool)[uniform_index(rng, pool->size())];
}

std::string_view filler(Kind kind) {
  switch (kind) {
    case Kind::Personal: return "Contact details available on request.";
    case Kind::Education: return "Education history follows.";
    case Kind::Experience: return "Professional experience follows.";
    case Kind::Language: return "Language proficiency follows.";
    case Kind::Skill: return "Technical skills follow.";
  }
  return "";
}

std::string lower_name(Kind kind) { return utf8::to_lower(to_string(kind)); }

// Appends text and returns the scalar-value length added.
std::size_t append_text(std::string& text, std::string_view piece) {
  text += piece;
  return utf8::length(piece);
}

class SectionWriter {
 public:
  explicit SectionWriter(Section& s) : s_(s) {}

  void sentence(std::string_view tmpl, std::string_view value, Type type) {
    separate();
    const auto brace = tmpl.find("{}");
    pos_ += append_text(s_.text, tmpl.substr(0, brace));
    mention(value, type);
    pos_ += append_text(s_.text, tmpl.substr(brace + 2));
  }

  void list(std::string_view lead, const std::vector<std::string>& values, Type type) {
    separate();
    pos_ += append_text(s_.text, lead);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) pos_ += append_text(s_.text, ", ");
      mention(values[i], type);
    }
    pos_ += append_text(s_.text, ".");
  }

  void plain(std::string_view text) {
    separate();
    pos_ += append_text(s_.text, text);
  }

 private:
  void separate() {
    if (!s_.text.empty()) pos_ += append_text(s_.text, " ");
  }
  void mention(std::string_view value, Type type) {
    const std::size_t start = pos_;
    pos_ += append_text(s_.text, value);
    s_.spans.push_back({start, pos_, type, Provenance::Human});
  }

  Section& s_;
  std::size_t pos_ = 0;
};

std::string surface(Type t, Rng& rng) {
  if (t == Type::Date) return random_date(rng);
  const auto& vocab = vocabulary(t);
  return std::string(vocab[uniform_index(rng, vocab.size())]);
}

}  // namespace

Fixture generate_fixture(const FixtureProfile& profile, std::uint64_t seed) {
  for (const auto& row : profile.field_docs) {
    if (row.size() != profile.fields.size()) {
      throw Error(ErrorCode::InvalidArgument, "field_docs rows must match the field list");
    }
  }
  Rng rng(mix_seed(seed, 0));

  // Documents: (split, field) pairs, shuffled so ids do not reveal the split.
  struct Slot {
    std::size_t split;
    std::size_t field;
  };
  std::vector<Slot> slots;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t f = 0; f < profile.fields.size(); ++f) {
      for (std::size_t k = 0; k < profile.field_docs[s][f]; ++k) slots.push_back({s, f});
    }
  }
  shuffle(std::span(slots), rng);

  const std::size_t width = std::max<std::size_t>(4, std::to_string(slots.size()).size());
  Fixture fx;
  std::array<std::vector<std::size_t>, 3> split_docs;
  for (std::size_t d = 0; d < slots.size(); ++d) {
    std::string num = std::to_string(d + 1);
    Document doc;
    doc.id = "cv-" + std::string(width - num.size(), '0') + num;
    doc.field = profile.fields[slots[d].field];
    for (Kind kind : kSectionKinds) {
      doc.sections.push_back(Section{doc.id + "-" + lower_name(kind), kind, {}, {}});
    }
    fx.assignment.emplace(doc.id, kSplits[slots[d].split]);
    split_docs[slots[d].split].push_back(d);
    fx.dataset.documents.push_back(std::move(doc));
  }

  // mentions[d][kind] = list of entity types to render, in allocation order.
  std::vector<std::array<std::vector<Type>, kNumSectionKinds>> mentions(slots.size());
  for (std::size_t s = 0; s < 3; ++s) {
    for (Type type : kEntityTypes) {
      const std::size_t want = profile.labels[s][index_of(type)];
      if (want == 0) continue;
      struct Cell {
        std::size_t doc;
        Kind kind;
        std::size_t left;
      };
      std::vector<Cell> cells;
      std::size_t capacity = 0;
      for (std::size_t d : split_docs[s]) {
        for (const Host& h : hosts_for(type)) {
          cells.push_back({d, h.kind, h.cap});
          capacity += h.cap;
        }
      }
      if (want > capacity) {
        throw Error(ErrorCode::Infeasible,
                    std::string(to_string(kSplits[s])) + " split cannot host " +
                        std::to_string(want) + " " + std::string(to_string(type)) +
                        " spans (capacity " + std::to_string(capacity) + ")",
                    {{"split", std::string(to_string(kSplits[s]))},
                     {"type", std::string(to_string(type))}});
      }
      for (std::size_t k = 0; k < want; ++k) {
        const std::size_t c = uniform_index(rng, cells.size());
        mentions[cells[c].doc][static_cast<std::size_t>(cells[c].kind)].push_back(type);
        if (--cells[c].left == 0) {
          cells[c] = cells.back();
          cells.pop_back();
        }
      }
    }
  }

  for (std::size_t d = 0; d < slots.size(); ++d) {
    auto& doc = fx.dataset.documents[d];
    for (std::size_t k = 0; k < kNumSectionKinds; ++k) {
      Section& section = doc.sections[k];
      SectionWriter w(section);
      auto types = mentions[d][k];
      shuffle(std::span(types), rng);
      if (section.kind == Kind::Skill) {
        // Skills are rendered as comma lists of up to six items.
        std::vector<std::string> batch;
        for (std::size_t i = 0; i < types.size(); ++i) {
          batch.push_back(surface(Type::Skill, rng));
          if (batch.size() == 6 || i + 1 == types.size()) {
            w.list(uniform_index(rng, 2) == 0 ? "Skills: " : "Tools: ", batch, Type::Skill);
            batch.clear();
          }
        }
      } else {
        for (Type t : types) w.sentence(pick_template(section.kind, t, rng), surface(t, rng), t);
      }
      if (types.empty()) w.plain(filler(section.kind));
    }
  }
  return fx;
}

}  // namespace cvner
