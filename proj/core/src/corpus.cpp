#include "fsml/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fsml/errors.hpp"

namespace fsml {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

[[noreturn]] void fail(const fs::path& file, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << file.string();
  if (line > 0) msg << ":" << line;
  msg << ": " << what;
  throw DataError(msg.str());
}

std::vector<std::string> string_array(const json& j, const char* key, const fs::path& file,
                                      std::size_t line) {
  if (!j.contains(key)) fail(file, line, std::string("missing field \"") + key + "\"");
  const auto& arr = j.at(key);
  if (!arr.is_array()) fail(file, line, std::string("field \"") + key + "\" is not an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_string()) fail(file, line, std::string("field \"") + key + "\" has a non-string entry");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string string_field(const json& j, const char* key, const fs::path& file, std::size_t line) {
  if (!j.contains(key)) fail(file, line, std::string("missing field \"") + key + "\"");
  if (!j.at(key).is_string()) fail(file, line, std::string("field \"") + key + "\" is not a string");
  return j.at(key).get<std::string>();
}

}  // namespace

bool LabeledUtterance::has_label(int label) const noexcept {
  return std::binary_search(labels.begin(), labels.end(), label);
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  name_tokens_.reserve(names_.size());
  for (std::size_t i = 0; i < names_.size(); ++i) {
    auto tokens = tokenize_label_name(names_[i]);
    if (tokens.empty()) throw DataError("label name \"" + names_[i] + "\" has no tokens");
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("duplicate label name \"" + names_[i] + "\"");
    }
    name_tokens_.push_back(std::move(tokens));
  }
}

std::optional<int> LabelSpace::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Domain::label_names(const LabeledUtterance& u) const {
  std::vector<std::string> out;
  out.reserve(u.labels.size());
  for (int l : u.labels) out.push_back(label_space.name(l));
  return out;
}

std::optional<std::size_t> Domain::find(std::string_view id) const {
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].id() == id) return i;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) tokens.push_back(lowercase(tok));
  return tokens;
}

std::vector<std::string> tokenize_label_name(std::string_view name) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : name) {
    if (c == '_' || c == '-' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) tokens.push_back(lowercase(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) tokens.push_back(lowercase(cur));
  return tokens;
}

void validate_domain(const Domain& domain) {
  const int n = domain.n_labels();
  if (n == 0) throw DataError("domain \"" + domain.name + "\" has an empty label space");
  std::set<std::string, std::less<>> ids;
  std::vector<int> usage(n, 0);
  for (const auto& u : domain.pool) {
    if (!ids.insert(u.id()).second) {
      throw DataError("domain \"" + domain.name + "\": duplicate utterance id \"" + u.id() + "\"");
    }
    if (u.utterance.tokens.empty()) {
      throw DataError("domain \"" + domain.name + "\": utterance \"" + u.id() + "\" has no tokens");
    }
    if (u.labels.empty()) {
      throw DataError("domain \"" + domain.name + "\": utterance \"" + u.id() + "\" has no labels");
    }
    if (!std::is_sorted(u.labels.begin(), u.labels.end()) ||
        std::adjacent_find(u.labels.begin(), u.labels.end()) != u.labels.end()) {
      throw DataError("domain \"" + domain.name + "\": utterance \"" + u.id() +
                      "\" labels are not sorted and unique");
    }
    for (int l : u.labels) {
      if (l < 0 || l >= n) {
        throw DataError("domain \"" + domain.name + "\": utterance \"" + u.id() +
                        "\" has label index out of range");
      }
      ++usage[l];
    }
  }
  for (int l = 0; l < n; ++l) {
    if (usage[l] == 0) {
      throw DataError("domain \"" + domain.name + "\": label \"" + domain.label_space.name(l) +
                      "\" never appears in the pool");
    }
  }
}

Domain load_domain(const fs::path& domain_dir) {
  const fs::path labels_file = domain_dir / "labels.json";
  const fs::path data_file = domain_dir / "data.jsonl";

  std::ifstream labels_in(labels_file);
  if (!labels_in) fail(labels_file, 0, "cannot open file");
  json labels_json;
  try {
    labels_in >> labels_json;
  } catch (const json::exception& e) {
    fail(labels_file, 0, std::string("invalid JSON: ") + e.what());
  }
  if (!labels_json.is_object()) fail(labels_file, 0, "expected a JSON object");

  Domain domain;
  domain.name = string_field(labels_json, "domain", labels_file, 0);
  try {
    domain.label_space = LabelSpace(string_array(labels_json, "labels", labels_file, 0));
  } catch (const DataError& e) {
    fail(labels_file, 0, e.what());
  }

  std::ifstream data_in(data_file);
  if (!data_in) fail(data_file, 0, "cannot open file");
  std::set<std::string, std::less<>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(data_in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(data_file, lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) fail(data_file, lineno, "expected a JSON object");

    LabeledUtterance lu;
    lu.utterance.id = string_field(rec, "id", data_file, lineno);
    lu.utterance.text = string_field(rec, "text", data_file, lineno);
    for (auto& tok : string_array(rec, "tokens", data_file, lineno)) {
      // Exported tokens may themselves contain whitespace-separated pieces.
      for (auto& piece : tokenize(tok)) lu.utterance.tokens.push_back(std::move(piece));
    }
    if (lu.utterance.tokens.empty()) fail(data_file, lineno, "empty tokens for id \"" + lu.id() + "\"");
    const auto names = string_array(rec, "labels", data_file, lineno);
    if (names.empty()) fail(data_file, lineno, "empty labels for id \"" + lu.id() + "\"");
    for (const auto& name : names) {
      const auto idx = domain.label_space.index_of(name);
      if (!idx) fail(data_file, lineno, "label \"" + name + "\" is not in the label space");
      lu.labels.push_back(*idx);
    }
    std::sort(lu.labels.begin(), lu.labels.end());
    if (std::adjacent_find(lu.labels.begin(), lu.labels.end()) != lu.labels.end()) {
      fail(data_file, lineno, "duplicate label for id \"" + lu.id() + "\"");
    }
    if (!seen.insert(lu.id()).second) fail(data_file, lineno, "duplicate id \"" + lu.id() + "\"");
    domain.pool.push_back(std::move(lu));
  }

  try {
    validate_domain(domain);
  } catch (const DataError& e) {
    fail(data_file, 0, e.what());
  }
  return domain;
}

std::vector<Domain> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory " + dir.string() + " does not exist");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "labels.json")) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw DataError("corpus directory " + dir.string() + " contains no domains");
  std::vector<Domain> domains;
  domains.reserve(subdirs.size());
  for (const auto& d : subdirs) domains.push_back(load_domain(d));
  return domains;
}

void save_domain(const Domain& domain, const fs::path& dir) {
  const fs::path out = dir / domain.name;
  fs::create_directories(out);

  json labels = {{"domain", domain.name}, {"labels", domain.label_space.names()}};
  {
    std::ofstream f(out / "labels.json", std::ios::binary);
    if (!f) throw DataError("cannot write " + (out / "labels.json").string());
    f << labels.dump(2) << '\n';
  }
  std::ofstream f(out / "data.jsonl", std::ios::binary);
  if (!f) throw DataError("cannot write " + (out / "data.jsonl").string());
  for (const auto& u : domain.pool) {
    json rec = {{"id", u.id()},
                {"text", u.utterance.text},
                {"tokens", u.utterance.tokens},
                {"labels", domain.label_names(u)}};
    f << rec.dump() << '\n';
  }
}

}  // namespace fsml
