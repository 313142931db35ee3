#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>

namespace fsml {

/// Word lists backing the linguistic features.
struct Lexicons {
  std::set<std::string, std::less<>> conjunctions;
  std::set<std::string, std::less<>> verbs;
  std::set<std::string, std::less<>> interrogatives;

  /// Reads conjunctions.txt, verbs.txt and interrogatives.txt from `dir`.
  /// One lowercase token per line; blank lines and '#' comments are skipped.
  static Lexicons load(const std::filesystem::path& dir);
  /// The word lists of core/data/lexicons, compiled into the library.
  static Lexicons shipped();

  bool reserved(std::string_view token) const;
};

/// True for tokens made only of ASCII punctuation, or ending in . , ! ? ;
bool is_punctuation_token(std::string_view token) noexcept;

}  // namespace fsml
