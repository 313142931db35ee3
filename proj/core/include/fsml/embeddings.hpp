#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fsml/corpus.hpp"
#include "fsml/linalg.hpp"

namespace fsml {

enum class RecordKind : std::uint8_t { kUtterance = 0, kLabel = 1 };

/// Frozen encoder output: per-utterance and per-label-name token vectors.
/// Records keep insertion order, and writing follows it.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim);

  int dim() const noexcept { return dim_; }

  /// Throws DataError on a duplicate id of the same kind or a column count
  /// different from dim().
  void add(RecordKind kind, std::string id, TokenMatrix vecs);

  bool has_utterance(std::string_view id) const;
  bool has_label(std::string_view name) const;
  /// Throw DataError when the entry is missing.
  const TokenMatrix& utterance(std::string_view id) const;
  const TokenMatrix& label(std::string_view name) const;

  struct Record {
    RecordKind kind;
    std::string id;
    TokenMatrix vecs;
  };
  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  bool operator==(const EmbeddingTable& other) const;

 private:
  int dim_;
  std::vector<Record> records_;
  std::unordered_map<std::string, std::size_t> utterance_index_;
  std::unordered_map<std::string, std::size_t> label_index_;
};

/// FSML interchange format: "FSML", u32 version (1), u32 dim, then records of
/// u8 kind, u16 id length, id bytes, u32 n_vectors, n_vectors*dim f32.
/// All integers and floats little-endian.
EmbeddingTable load_embedding_table(const std::filesystem::path& path);
EmbeddingTable parse_embedding_table(std::span<const std::uint8_t> bytes);
void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_embedding_table(const EmbeddingTable& table);

/// Deterministic toy embedder. Each token seeds a SplitMix64 stream with
/// hash64(token) ^ seed, draws `dim` approximate normals (sum of 12 uniforms
/// minus 6) and normalizes to unit length. Throws ConfigError if dim < 2.
TokenMatrix toy_embed(std::span<const std::string> tokens, int dim, std::uint64_t seed);

/// Toy-embeds every utterance and label name of the given domains.
EmbeddingTable toy_embed_corpus(std::span<const Domain> domains, int dim, std::uint64_t seed);

/// Mean over rows. Throws DataError on an empty matrix.
Vector sentence_embedding(const TokenMatrix& vecs);

/// Mean over the label's name-token vectors.
Vector label_name_embedding(std::string_view label, const EmbeddingTable& table);

/// Sentence embedding of an utterance looked up by id.
Vector utterance_embedding(const Utterance& u, const EmbeddingTable& table);

/// Checks that every utterance of every domain has an entry whose row count
/// equals its token count, and that every label name has an entry.
void bind_embeddings(const EmbeddingTable& table, std::span<const Domain> domains);

}  // namespace fsml
