#include "aipoll/survey.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "aipoll/error.hpp"

namespace aipoll {
namespace {

template <typename Enum, typename Parser>
std::map<std::string, Enum> read_code_map(const nlohmann::json& doc, const char* field, Parser parse) {
  std::map<std::string, Enum> out;
  if (!doc.contains(field)) return out;
  for (const auto& [code, name] : doc.at(field).items()) {
    const auto value = parse(name.template get<std::string>());
    if (!value) {
      throw Error(ErrorCode::Schema, std::string("demographic mapping: unknown ") + field + " value '" +
                                         name.template get<std::string>() + "'");
    }
    out.emplace(code, *value);
  }
  return out;
}

std::set<std::string> read_code_set(const nlohmann::json& doc, const char* field) {
  if (!doc.contains(field)) return {};
  return doc.at(field).get<std::set<std::string>>();
}

template <typename Enum>
nlohmann::json write_code_map(const std::map<std::string, Enum>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [code, value] : m) j[code] = to_string(value);
  return j;
}

int parse_category(std::string_view field, int cardinality, const std::string& where) {
  int value = 0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw Error(ErrorCode::Schema, where + ": answer '" + std::string(field) + "' is not an integer");
  }
  if (value < 1 || value > cardinality) {
    throw Error(ErrorCode::Schema, where + ": answer " + std::to_string(value) + " outside 1.." +
                                       std::to_string(cardinality));
  }
  return value;
}

}  // namespace

DemographicMapping DemographicMapping::from_json(const nlohmann::json& doc) {
  try {
    DemographicMapping m;
    m.ideology = read_code_map<Ideology>(doc, "ideology", parse_ideology);
    m.gender = read_code_map<Gender>(doc, "gender", parse_gender);
    m.race = read_code_map<Race>(doc, "race", parse_race);
    if (doc.contains("missing")) {
      const auto& missing = doc.at("missing");
      m.missing_ideology = read_code_set(missing, "ideology");
      m.missing_gender = read_code_set(missing, "gender");
      m.missing_race = read_code_set(missing, "race");
    }
    m.non_binary_gender = read_code_set(doc, "non_binary_gender");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Schema, std::string("demographic mapping: ") + e.what());
  }
}

nlohmann::json DemographicMapping::to_json() const {
  return {{"ideology", write_code_map(ideology)},
          {"gender", write_code_map(gender)},
          {"race", write_code_map(race)},
          {"missing", {{"ideology", missing_ideology}, {"gender", missing_gender}, {"race", missing_race}}},
          {"non_binary_gender", non_binary_gender}};
}

std::string_view to_string(DropReason r) noexcept {
  switch (r) {
    case DropReason::MissingDemographic: return "missing-demographic";
    case DropReason::OutsideBinarySchema: return "outside-binary-schema";
    case DropReason::UnmappedCode: return "unmapped-code";
  }
  return "";
}

Classification classify(const RespondentRecord& record, const DemographicMapping& mapping) {
  const auto missing = [](const std::string& v, const std::set<std::string>& codes) {
    return v.empty() || codes.contains(v);
  };
  if (missing(record.ideology_raw, mapping.missing_ideology)) {
    return Dropped{DropReason::MissingDemographic, "ideology"};
  }
  if (missing(record.gender_raw, mapping.missing_gender)) {
    return Dropped{DropReason::MissingDemographic, "gender"};
  }
  if (missing(record.race_raw, mapping.missing_race)) {
    return Dropped{DropReason::MissingDemographic, "race"};
  }
  if (mapping.non_binary_gender.contains(record.gender_raw)) {
    return Dropped{DropReason::OutsideBinarySchema, "gender=" + record.gender_raw};
  }
  const auto ideology = mapping.ideology.find(record.ideology_raw);
  if (ideology == mapping.ideology.end()) {
    return Dropped{DropReason::UnmappedCode, "ideology=" + record.ideology_raw};
  }
  const auto gender = mapping.gender.find(record.gender_raw);
  if (gender == mapping.gender.end()) {
    return Dropped{DropReason::UnmappedCode, "gender=" + record.gender_raw};
  }
  const auto race = mapping.race.find(record.race_raw);
  if (race == mapping.race.end()) {
    return Dropped{DropReason::UnmappedCode, "race=" + record.race_raw};
  }
  return DemographicCell{ideology->second, gender->second, race->second};
}

AggregateResult aggregate(std::span<const RespondentRecord> records, const QuestionCorpus& corpus,
                          const DemographicMapping& mapping, const AggregateOptions& options) {
  const auto& questions = corpus.questions();
  struct Tally {
    int n = 0;
    std::vector<double> counts;
  };
  // [question][cell]
  std::vector<std::vector<Tally>> tallies(questions.size(), std::vector<Tally>(kNumCells));
  for (std::size_t q = 0; q < questions.size(); ++q) {
    for (auto& t : tallies[q]) t.counts.assign(static_cast<std::size_t>(questions[q].cardinality()), 0.0);
  }

  for (const auto& record : records) {
    const auto cls = classify(record, mapping);
    const auto* cell = std::get_if<DemographicCell>(&cls);
    if (!cell) continue;
    const std::size_t c = cell->index();
    const double w = options.weighted ? record.weight : 1.0;
    for (std::size_t q = 0; q < questions.size(); ++q) {
      const auto it = record.answers.find(questions[q].id());
      if (it == record.answers.end()) continue;
      const int category = it->second;
      if (category < 1 || category > questions[q].cardinality()) {
        throw Error(ErrorCode::Schema, "respondent " + record.respondent_id + " answered " +
                                           std::to_string(category) + " on " + questions[q].id());
      }
      auto& t = tallies[q][c];
      t.n += 1;
      t.counts[static_cast<std::size_t>(category - 1)] += w;
    }
  }

  AggregateResult result;
  for (std::size_t q = 0; q < questions.size(); ++q) {
    for (std::size_t c = 0; c < kNumCells; ++c) {
      auto& t = tallies[q][c];
      const auto cell = DemographicCell::from_index(c);
      double mass = 0.0;
      for (double v : t.counts) mass += v;
      if (t.n == 0 || !(mass > 0.0)) {
        result.empty_cells.push_back({questions[q].id(), cell});
        continue;
      }
      auto dist = make_distribution(t.counts, questions[q].cardinality());
      result.distributions.push_back({questions[q].id(), cell, t.n, std::move(t.counts), std::move(dist)});
    }
  }
  return result;
}

double DropReport::fraction(DropReason reason) const {
  if (total == 0) return 0.0;
  const auto it = counts.find(reason);
  return it == counts.end() ? 0.0 : static_cast<double>(it->second) / static_cast<double>(total);
}

nlohmann::json DropReport::to_json() const {
  nlohmann::json reasons = nlohmann::json::object();
  for (auto r : kDropReasons) {
    const auto it = counts.find(r);
    reasons[std::string(to_string(r))] = {{"count", it == counts.end() ? 0 : it->second},
                                          {"fraction", fraction(r)}};
  }
  return {{"total", total}, {"classified", classified}, {"dropped", dropped}, {"reasons", reasons}};
}

std::string DropReport::to_text() const {
  std::ostringstream out;
  out << "respondents  " << total << "\n";
  out << "classified   " << classified << "\n";
  out << "dropped      " << dropped << "\n";
  for (auto r : kDropReasons) {
    const auto it = counts.find(r);
    const std::size_t n = it == counts.end() ? 0 : it->second;
    std::string name(to_string(r));
    name.resize(24, ' ');
    out << "  " << name << n << "  (" << format_fixed(100.0 * fraction(r), 2) << "%)\n";
  }
  return out.str();
}

DropReport drop_report(std::span<const RespondentRecord> records, const DemographicMapping& mapping) {
  DropReport report;
  for (auto r : kDropReasons) report.counts[r] = 0;
  for (const auto& record : records) {
    ++report.total;
    const auto cls = classify(record, mapping);
    if (const auto* d = std::get_if<Dropped>(&cls)) {
      ++report.dropped;
      ++report.counts[d->reason];
    } else {
      ++report.classified;
    }
  }
  return report;
}

std::vector<RespondentRecord> read_respondents_csv(const std::filesystem::path& path,
                                                   const QuestionCorpus& corpus,
                                                   const std::optional<std::string>& weight_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Schema, path.string() + ": empty file");
  const auto header = split_csv_line(line);

  const auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto require_column = [&](const std::string& name) {
    const auto idx = column_of(name);
    if (!idx) throw Error(ErrorCode::Schema, path.string() + ": missing column '" + name + "'");
    return *idx;
  };

  const std::size_t id_col = require_column("respondent_id");
  const std::size_t ideology_col = require_column("ideology");
  const std::size_t gender_col = require_column("gender");
  const std::size_t race_col = require_column("race");
  std::optional<std::size_t> weight_col;
  if (weight_column) weight_col = require_column(*weight_column);

  std::vector<std::pair<const Question*, std::size_t>> question_cols;
  for (const auto& q : corpus.questions()) question_cols.emplace_back(&q, require_column(q.id()));

  std::vector<RespondentRecord> records;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::Schema, where + ": expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(fields.size()));
    }
    RespondentRecord r;
    r.respondent_id = fields[id_col];
    r.ideology_raw = fields[ideology_col];
    r.gender_raw = fields[gender_col];
    r.race_raw = fields[race_col];
    if (weight_col) {
      try {
        r.weight = std::stod(fields[*weight_col]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Schema, where + ": bad weight '" + fields[*weight_col] + "'");
      }
      if (!(r.weight >= 0.0)) throw Error(ErrorCode::Schema, where + ": negative weight");
    }
    for (const auto& [q, col] : question_cols) {
      const auto& field = fields[col];
      if (field.empty()) continue;
      r.answers.emplace(q->id(), parse_category(field, q->cardinality(), where + " (" + q->id() + ")"));
    }
    records.push_back(std::move(r));
  }
  return records;
}

nlohmann::json cell_to_json(const DemographicCell& cell) {
  return {{"ideology", to_string(cell.ideology)},
          {"gender", to_string(cell.gender)},
          {"race", to_string(cell.race)}};
}

DemographicCell cell_from_json(const nlohmann::json& j) {
  const auto ideology = parse_ideology(j.at("ideology").get<std::string>());
  const auto gender = parse_gender(j.at("gender").get<std::string>());
  const auto race = parse_race(j.at("race").get<std::string>());
  if (!ideology || !gender || !race) throw Error(ErrorCode::Parse, "bad cell " + j.dump());
  return {*ideology, *gender, *race};
}

nlohmann::json to_json(const HumanCellDistribution& d) {
  return {{"question_id", d.question_id},
          {"cell", cell_to_json(d.cell)},
          {"n_respondents", d.n_respondents},
          {"counts", d.counts},
          {"probs", std::vector<double>(d.distribution.probs().begin(), d.distribution.probs().end())}};
}

HumanCellDistribution human_distribution_from_json(const nlohmann::json& j) {
  try {
    auto counts = j.at("counts").get<std::vector<double>>();
    auto dist = make_distribution(counts, static_cast<int>(counts.size()));
    return {j.at("question_id").get<std::string>(), cell_from_json(j.at("cell")),
            j.at("n_respondents").get<int>(), std::move(counts), std::move(dist)};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("human distribution record: ") + e.what());
  }
}

void write_human_distributions(const std::filesystem::path& path,
                               std::span<const HumanCellDistribution> distributions,
                               const Provenance& provenance) {
  std::string out = provenance.jsonl_header() + "\n";
  for (const auto& d : distributions) out += to_json(d).dump() + "\n";
  write_text_file(path, out);
}

std::vector<HumanCellDistribution> read_human_distributions(const std::filesystem::path& path) {
  std::vector<HumanCellDistribution> out;
  for_each_jsonl(path, [&](const nlohmann::json& j) { out.push_back(human_distribution_from_json(j)); });
  return out;
}

}  // namespace aipoll
