#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fsml {

struct Utterance {
  std::string id;
  std::vector<std::string> tokens;  // lowercase, never empty
  std::string text;

  bool operator==(const Utterance&) const = default;
};

/// An utterance with its gold label set. Labels are indices into the owning
/// domain's LabelSpace, sorted ascending and duplicate-free.
struct LabeledUtterance {
  Utterance utterance;
  std::vector<int> labels;

  const std::string& id() const noexcept { return utterance.id; }
  bool has_label(int label) const noexcept;

  bool operator==(const LabeledUtterance&) const = default;
};

class LabelSpace {
 public:
  LabelSpace() = default;
  /// Throws DataError on duplicate names or names without tokens.
  explicit LabelSpace(std::vector<std::string> names);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(int index) const { return names_.at(index); }
  const std::vector<std::string>& name_tokens(int index) const { return name_tokens_.at(index); }
  std::optional<int> index_of(std::string_view name) const;

  bool operator==(const LabelSpace& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> name_tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Domain {
  std::string name;
  LabelSpace label_space;
  std::vector<LabeledUtterance> pool;

  int n_labels() const noexcept { return label_space.size(); }
  /// Label names of an utterance in label-space order.
  std::vector<std::string> label_names(const LabeledUtterance& u) const;
  /// Pool position of an utterance id, if present.
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const Domain& other) const {
    return name == other.name && label_space == other.label_space && pool == other.pool;
  }
};

/// Whitespace split followed by lowercasing. Punctuation is left untouched.
std::vector<std::string> tokenize(std::string_view text);

/// Splits a label name on '_', '-' and whitespace, then lowercases.
std::vector<std::string> tokenize_label_name(std::string_view name);

/// Checks the domain invariants: unique ids, non-empty tokens and label sets,
/// labels in range, every label used at least once. Throws DataError.
void validate_domain(const Domain& domain);

/// Reads a corpus directory: one subdirectory per domain, each holding
/// labels.json and data.jsonl. Domains are returned sorted by directory name;
/// records keep file order. Errors name the file, line and violation.
std::vector<Domain> load_corpus(const std::filesystem::path& dir);

/// Loads a single domain directory.
Domain load_domain(const std::filesystem::path& domain_dir);

/// Writes `domain` into dir/<domain.name>/{labels.json,data.jsonl}.
void save_domain(const Domain& domain, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct SynthSpec {
  std::string name = "synth";
  int n_labels = 8;
  int vocab_per_label = 6;
  int noise_vocab = 12;
  int pool_size = 300;
  double p_multi = 0.2;
  int min_tokens_per_label = 2;
  int max_tokens_per_label = 4;
  /// Probability that a content slot draws a shared noise word instead of a
  /// label word.
  double noise_rate = 0.25;
};

/// Deterministic synthetic domain. Single-label utterances draw mostly from
/// their label's private vocabulary; multi-label utterances (probability
/// p_multi) concatenate segments of 2 or 3 labels, joined by "and" half the
/// time. Label names are built from words of the label's own vocabulary.
/// Throws ConfigError on an unusable spec.
Domain generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

/// Per-domain settings used by `gen-synth`: domains differ in segment lengths so
/// that score scales vary between domains.
SynthSpec default_synth_spec(int domain_index, int n_labels = 8, int pool_size = 300);

}  // namespace fsml
