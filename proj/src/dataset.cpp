#include "crowdsim/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crowdsim/error.hpp"

namespace crowdsim {

std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<double> hashed_features(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ConfigError("feature dimension must be positive");
  std::vector<double> v(dim, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    const std::uint64_t h = fnv1a(token);
    const double sign = (h >> 63) ? -1.0 : 1.0;
    v[h % dim] += sign;
    token.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      token.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

std::string format_number(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

namespace {

std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

/// Splits one CSV record; supports double-quoted fields with "" escapes.
std::optional<std::vector<std::string>> split_csv(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

ProblemSet::ProblemSet(std::vector<Problem> problems) {
  for (auto& p : problems) add(std::move(p));
}

void ProblemSet::add(Problem problem) {
  if (problem.id.empty()) throw DataError("problem id must not be empty");
  if (index_.contains(problem.id)) throw DataError("duplicate problem id '" + problem.id + "'");
  if (problem.features.empty()) throw DataError("problem '" + problem.id + "' has no features");
  if (problems_.empty()) {
    feature_dim_ = problem.features.size();
  } else if (problem.features.size() != feature_dim_) {
    throw DataError("problem '" + problem.id + "' has feature dimension " +
                    std::to_string(problem.features.size()) + ", expected " + std::to_string(feature_dim_));
  }
  index_.emplace(problem.id, problems_.size());
  problems_.push_back(std::move(problem));
}

const Problem* ProblemSet::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &problems_[it->second];
}

const Problem& ProblemSet::at(std::string_view id) const {
  if (const Problem* p = find(id)) return *p;
  throw DataError("unknown problem '" + std::string(id) + "'");
}

std::size_t ProblemSet::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown problem '" + std::string(id) + "'");
  return it->second;
}

ProblemSet load_problems(const std::filesystem::path& path, std::size_t feature_dim) {
  auto in = open_input(path);
  ProblemSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Problem p;
      p.id = j.at("id").get<std::string>();
      p.description = j.value("description", "");
      p.requirements = j.value("requirements", "");
      p.context = j.value("context", "");
      p.scale = scale_from_json(j.at("scale"));
      if (j.contains("features")) {
        p.features = j.at("features").get<std::vector<double>>();
      } else {
        p.features = hashed_features(p.description, feature_dim);
      }
      set.add(std::move(p));
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    } catch (const std::exception& e) {
      throw DataError(std::string("malformed problem: ") + e.what(), line_no);
    }
  }
  return set;
}

void save_problems(const ProblemSet& problems, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  for (const auto& p : problems.problems()) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["description"] = p.description;
    j["requirements"] = p.requirements;
    j["context"] = p.context;
    nlohmann::json scale;
    to_json(scale, p.scale);
    j["scale"] = scale;
    j["features"] = p.features;
    out << j.dump() << '\n';
  }
}

void ResponseMatrix::add(Response response, const DecisionScale& scale) {
  if (!scale.contains(response.value)) {
    throw DataError("value " + format_number(response.value) + " for problem '" + response.problem_id +
                    "' is off its " + to_string(scale.kind()) + " scale");
  }
  add_unchecked(std::move(response));
}

void ResponseMatrix::add_unchecked(Response response) {
  if (response.participant_id.empty() || response.problem_id.empty()) {
    throw DataError("participant_id and problem_id must not be empty");
  }
  if (!std::isfinite(response.value)) throw DataError("response value must be finite");
  auto [pit, new_participant] = participant_index_.try_emplace(response.participant_id, participants_.size());
  auto [tit, new_problem] = problem_index_.try_emplace(response.problem_id, problems_.size());
  const std::size_t i = pit->second;
  const std::size_t t = tit->second;
  if (!new_participant && !new_problem && cell_.contains({i, t})) {
    throw DataError("duplicate response for participant '" + response.participant_id + "' on problem '" +
                    response.problem_id + "'");
  }
  if (new_participant) {
    participants_.push_back(response.participant_id);
    tasks_per_participant_.push_back(0);
  }
  if (new_problem) {
    problems_.push_back(response.problem_id);
    by_problem_.emplace_back();
  }
  cell_.emplace(std::pair{i, t}, responses_.size());
  by_problem_[t].push_back(responses_.size());
  ++tasks_per_participant_[i];
  responses_.push_back(std::move(response));
}

bool ResponseMatrix::participates(std::string_view participant_id, std::string_view problem_id) const {
  return value(participant_id, problem_id).has_value();
}

std::optional<double> ResponseMatrix::value(std::string_view participant_id, std::string_view problem_id) const {
  auto pit = participant_index_.find(participant_id);
  auto tit = problem_index_.find(problem_id);
  if (pit == participant_index_.end() || tit == problem_index_.end()) return std::nullopt;
  auto c = cell_.find({pit->second, tit->second});
  if (c == cell_.end()) return std::nullopt;
  return responses_[c->second].value;
}

std::size_t ResponseMatrix::count(std::string_view problem_id) const {
  auto tit = problem_index_.find(problem_id);
  return tit == problem_index_.end() ? 0 : by_problem_[tit->second].size();
}

std::size_t ResponseMatrix::tasks_of(std::string_view participant_id) const {
  auto pit = participant_index_.find(participant_id);
  return pit == participant_index_.end() ? 0 : tasks_per_participant_[pit->second];
}

std::vector<ResponseMatrix::Entry> ResponseMatrix::for_problem(std::string_view problem_id) const {
  std::vector<Entry> out;
  auto tit = problem_index_.find(problem_id);
  if (tit == problem_index_.end()) return out;
  for (std::size_t r : by_problem_[tit->second]) {
    out.push_back({participant_index_.find(responses_[r].participant_id)->second, responses_[r].value});
  }
  return out;
}

std::vector<double> ResponseMatrix::values_for_problem(std::string_view problem_id) const {
  std::vector<double> out;
  for (const auto& e : for_problem(problem_id)) out.push_back(e.value);
  return out;
}

ResponseFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ResponseFormat::csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return ResponseFormat::jsonl;
  throw ConfigError("cannot infer response format from '" + path.string() + "'");
}

ResponseMatrix load_responses(const std::filesystem::path& path, ResponseFormat format, const ProblemSet& problems) {
  auto in = open_input(path);
  ResponseMatrix matrix;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t col_participant = 0, col_problem = 1, col_value = 2;

  auto ingest = [&](Response r) {
    const Problem* p = problems.find(r.problem_id);
    if (p == nullptr) throw DataError("unknown problem '" + r.problem_id + "'", line_no);
    try {
      matrix.add(std::move(r), p->scale);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;

    if (format == ResponseFormat::csv) {
      auto fields = split_csv(line);
      if (!fields) throw DataError("unterminated quoted field", line_no);
      if (!header_seen) {
        header_seen = true;
        std::map<std::string, std::size_t> cols;
        for (std::size_t c = 0; c < fields->size(); ++c) cols[(*fields)[c]] = c;
        if (!cols.contains("participant_id") || !cols.contains("problem_id") || !cols.contains("value")) {
          throw DataError("CSV header must contain participant_id,problem_id,value", line_no);
        }
        col_participant = cols["participant_id"];
        col_problem = cols["problem_id"];
        col_value = cols["value"];
        continue;
      }
      const std::size_t needed = std::max({col_participant, col_problem, col_value}) + 1;
      if (fields->size() < needed) {
        throw DataError("malformed row: expected " + std::to_string(needed) + " fields", line_no);
      }
      auto value = parse_number((*fields)[col_value]);
      if (!value) throw DataError("malformed row: value '" + (*fields)[col_value] + "' is not a number", line_no);
      ingest({(*fields)[col_participant], (*fields)[col_problem], *value});
    } else {
      Response r;
      try {
        const auto j = nlohmann::json::parse(line);
        r.participant_id = j.at("participant_id").get<std::string>();
        r.problem_id = j.at("problem_id").get<std::string>();
        r.value = j.at("value").get<double>();
      } catch (const std::exception& e) {
        throw DataError(std::string("malformed row: ") + e.what(), line_no);
      }
      ingest(std::move(r));
    }
  }
  return matrix;
}

void save_responses(const ResponseMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  if (format_from_path(path) == ResponseFormat::csv) {
    out << "participant_id,problem_id,value\n";
    for (const auto& r : matrix.responses()) {
      out << csv_field(r.participant_id) << ',' << csv_field(r.problem_id) << ',' << format_number(r.value) << '\n';
    }
  } else {
    for (const auto& r : matrix.responses()) {
      nlohmann::ordered_json j{{"participant_id", r.participant_id}, {"problem_id", r.problem_id}, {"value", r.value}};
      out << j.dump() << '\n';
    }
  }
}

}  // namespace crowdsim
