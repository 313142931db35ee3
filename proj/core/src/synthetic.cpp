#include <algorithm>
#include <cstdio>
#include <set>

#include "fsml/corpus.hpp"
#include "fsml/errors.hpp"
#include "fsml/lexicons.hpp"
#include "fsml/rng.hpp"

namespace fsml {
namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::uint64_t kNoiseStreamSeed = 0x5eed0f0015e5ULL;

// Connective tokens used by the generator; all of them are lexicon entries.
constexpr std::string_view kVerbs[] = {"find", "show", "book", "check", "tell", "get"};
constexpr std::string_view kQuestionWords[] = {"what", "where", "when", "how", "which"};

std::string pseudo_word(Rng& rng, int syllables) {
  std::string w;
  for (int s = 0; s < syllables; ++s) {
    w += kConsonants[rng.uniform_int(kConsonants.size())];
    w += kVowels[rng.uniform_int(kVowels.size())];
  }
  if (rng.bernoulli(0.5)) w += kConsonants[rng.uniform_int(kConsonants.size())];
  return w;
}

/// Draws `n` fresh words not in `taken` and not reserved by the lexicons.
std::vector<std::string> draw_words(Rng& rng, int n, std::set<std::string>& taken,
                                    const Lexicons& lexicons) {
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < n) {
    auto w = pseudo_word(rng, 2);
    if (lexicons.reserved(w) || !taken.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

template <typename T, std::size_t N>
std::string pick(Rng& rng, const T (&arr)[N]) {
  return std::string(arr[rng.uniform_int(N)]);
}

}  // namespace

SynthSpec default_synth_spec(int domain_index, int n_labels, int pool_size) {
  SynthSpec spec;
  char name[32];
  std::snprintf(name, sizeof name, "synth%d", domain_index);
  spec.name = name;
  spec.n_labels = n_labels;
  spec.pool_size = pool_size;
  // Segment lengths rotate through three regimes.
  switch (domain_index % 3) {
    case 0:
      spec.min_tokens_per_label = 2;
      spec.max_tokens_per_label = 4;
      break;
    case 1:
      spec.min_tokens_per_label = 3;
      spec.max_tokens_per_label = 6;
      break;
    default:
      spec.min_tokens_per_label = 1;
      spec.max_tokens_per_label = 3;
      break;
  }
  return spec;
}

Domain generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.n_labels < 2) throw ConfigError("synthetic spec needs at least 2 labels");
  if (spec.vocab_per_label < 2) throw ConfigError("synthetic spec needs vocab_per_label >= 2");
  if (spec.noise_vocab < 1) throw ConfigError("synthetic spec needs a non-empty noise vocabulary");
  if (spec.pool_size < spec.n_labels) throw ConfigError("synthetic pool_size must be >= n_labels");
  if (spec.p_multi < 0.0 || spec.p_multi > 1.0) throw ConfigError("p_multi must be in [0, 1]");
  if (spec.noise_rate < 0.0 || spec.noise_rate >= 1.0) throw ConfigError("noise_rate must be in [0, 1)");
  if (spec.min_tokens_per_label < 1 || spec.max_tokens_per_label < spec.min_tokens_per_label) {
    throw ConfigError("invalid tokens-per-label span");
  }
  if (spec.name.empty()) throw ConfigError("synthetic domain needs a name");

  const Lexicons lexicons = Lexicons::shipped();
  std::set<std::string> taken;

  // Noise words come from a fixed stream so every domain shares them.
  Rng noise_rng(kNoiseStreamSeed);
  const auto noise = draw_words(noise_rng, spec.noise_vocab, taken, lexicons);

  Rng rng(seed ^ hash64(spec.name));
  const int n = spec.n_labels;
  std::vector<std::vector<std::string>> vocab(n);
  std::vector<std::string> names;
  for (int l = 0; l < n; ++l) {
    vocab[l] = draw_words(rng, spec.vocab_per_label, taken, lexicons);
    names.push_back(vocab[l][0] + "_" + vocab[l][1]);
  }

  Domain domain;
  domain.name = spec.name;
  domain.label_space = LabelSpace(names);

  for (int i = 0; i < spec.pool_size; ++i) {
    std::vector<int> labels{i % n};
    if (rng.bernoulli(spec.p_multi)) {
      const int extra = std::min(n - 1, rng.bernoulli(0.7) ? 1 : 2);
      while (static_cast<int>(labels.size()) < 1 + extra) {
        const int l = static_cast<int>(rng.uniform_int(n));
        if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
      }
    }
    // Segment order follows draw order; the primary label is not always first.
    rng.shuffle(labels);

    std::vector<std::string> tokens;
    bool question = false;
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (s > 0 && rng.bernoulli(0.5)) tokens.emplace_back("and");
      if (rng.bernoulli(0.3)) {
        tokens.push_back(pick(rng, kQuestionWords));
        question = true;
      }
      if (rng.bernoulli(0.8)) tokens.push_back(pick(rng, kVerbs));
      const auto span = spec.max_tokens_per_label - spec.min_tokens_per_label + 1;
      const int len = spec.min_tokens_per_label + static_cast<int>(rng.uniform_int(span));
      const auto& words = vocab[labels[s]];
      for (int t = 0; t < len; ++t) {
        if (rng.bernoulli(spec.noise_rate)) {
          tokens.push_back(noise[rng.uniform_int(noise.size())]);
        } else {
          tokens.push_back(words[rng.uniform_int(words.size())]);
        }
      }
    }
    if (question) {
      tokens.emplace_back("?");
    } else if (rng.bernoulli(0.5)) {
      tokens.emplace_back(".");
    }

    LabeledUtterance lu;
    lu.utterance.tokens = std::move(tokens);
    std::sort(labels.begin(), labels.end());
    lu.labels = std::move(labels);
    domain.pool.push_back(std::move(lu));
  }

  rng.shuffle(domain.pool);
  for (std::size_t i = 0; i < domain.pool.size(); ++i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s-%04zu", spec.name.c_str(), i);
    auto& u = domain.pool[i].utterance;
    u.id = id;
    for (std::size_t t = 0; t < u.tokens.size(); ++t) {
      if (t > 0) u.text += ' ';
      u.text += u.tokens[t];
    }
  }
  validate_domain(domain);
  return domain;
}

}  // namespace fsml
