#include "fsml/lexicons.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "fsml/errors.hpp"

namespace fsml {
namespace {

#include "shipped_lexicons.inc"

std::set<std::string, std::less<>> parse_word_list(std::istream& in) {
  std::set<std::string, std::less<>> words;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    std::string word = line.substr(first, last - first + 1);
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    words.insert(std::move(word));
  }
  return words;
}

std::set<std::string, std::less<>> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file " + path.string());
  return parse_word_list(in);
}

std::set<std::string, std::less<>> parse_word_list(const char* text) {
  std::istringstream in(text);
  return parse_word_list(in);
}

}  // namespace

Lexicons Lexicons::load(const std::filesystem::path& dir) {
  Lexicons lex;
  lex.conjunctions = read_word_list(dir / "conjunctions.txt");
  lex.verbs = read_word_list(dir / "verbs.txt");
  lex.interrogatives = read_word_list(dir / "interrogatives.txt");
  return lex;
}

Lexicons Lexicons::shipped() {
  Lexicons lex;
  lex.conjunctions = parse_word_list(kShippedConjunctions);
  lex.verbs = parse_word_list(kShippedVerbs);
  lex.interrogatives = parse_word_list(kShippedInterrogatives);
  return lex;
}

bool Lexicons::reserved(std::string_view token) const {
  return conjunctions.contains(token) || verbs.contains(token) || interrogatives.contains(token);
}

bool is_punctuation_token(std::string_view token) noexcept {
  if (token.empty()) return false;
  bool all_punct = true;
  for (unsigned char c : token) {
    if (!std::ispunct(c)) {
      all_punct = false;
      break;
    }
  }
  if (all_punct) return true;
  switch (token.back()) {
    case '.':
    case ',':
    case '!':
    case '?':
    case ';':
      return true;
    default:
      return false;
  }
}

}  // namespace fsml
