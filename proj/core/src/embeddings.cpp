#include "fsml/embeddings.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fsml/errors.hpp"
#include "fsml/rng.hpp"

namespace fsml {
namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'S', 'M', 'L'};
constexpr std::uint32_t kVersion = 1;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw DataError("FSML: truncated " + std::string(what) + " at byte offset " +
                      std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, have " +
                      std::to_string(bytes_.size() - pos_) + ")");
    }
  }

  std::uint64_t uint(int width, const char* what) {
    need(width, what);
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += width;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_uint(std::vector<std::uint8_t>& out, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

const char* kind_name(RecordKind kind) {
  return kind == RecordKind::kUtterance ? "utterance" : "label";
}

}  // namespace

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim) {
  if (dim <= 0) throw DataError("embedding dim must be positive");
}

void EmbeddingTable::add(RecordKind kind, std::string id, TokenMatrix vecs) {
  if (vecs.cols() != dim_) {
    throw DataError("embedding record \"" + id + "\" has " + std::to_string(vecs.cols()) +
                    " columns, expected " + std::to_string(dim_));
  }
  auto& index = kind == RecordKind::kUtterance ? utterance_index_ : label_index_;
  if (!index.emplace(id, records_.size()).second) {
    throw DataError(std::string("duplicate ") + kind_name(kind) + " embedding id \"" + id + "\"");
  }
  records_.push_back({kind, std::move(id), std::move(vecs)});
}

bool EmbeddingTable::has_utterance(std::string_view id) const {
  return utterance_index_.contains(std::string(id));
}

bool EmbeddingTable::has_label(std::string_view name) const {
  return label_index_.contains(std::string(name));
}

const TokenMatrix& EmbeddingTable::utterance(std::string_view id) const {
  const auto it = utterance_index_.find(std::string(id));
  if (it == utterance_index_.end()) {
    throw DataError("no embedding for utterance \"" + std::string(id) + "\"");
  }
  return records_[it->second].vecs;
}

const TokenMatrix& EmbeddingTable::label(std::string_view name) const {
  const auto it = label_index_.find(std::string(name));
  if (it == label_index_.end()) throw DataError("no embedding for label \"" + std::string(name) + "\"");
  return records_[it->second].vecs;
}

bool EmbeddingTable::operator==(const EmbeddingTable& other) const {
  if (dim_ != other.dim_ || records_.size() != other.records_.size()) return false;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& a = records_[i];
    const auto& b = other.records_[i];
    if (a.kind != b.kind || a.id != b.id || a.vecs.rows() != b.vecs.rows()) return false;
    for (Eigen::Index j = 0; j < a.vecs.size(); ++j) {
      if (std::bit_cast<std::uint32_t>(a.vecs.data()[j]) !=
          std::bit_cast<std::uint32_t>(b.vecs.data()[j])) {
        return false;
      }
    }
  }
  return true;
}

EmbeddingTable parse_embedding_table(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "header");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
    throw DataError("FSML: bad magic bytes");
  }
  const auto version = in.uint(4, "header");
  if (version != kVersion) {
    throw DataError("FSML: unsupported version " + std::to_string(version));
  }
  const auto dim = in.uint(4, "header");
  if (dim == 0 || dim > (1u << 20)) throw DataError("FSML: invalid dim " + std::to_string(dim));
  EmbeddingTable table(static_cast<int>(dim));

  while (!in.done()) {
    const auto record_offset = in.offset();
    const auto kind = in.uint(1, "record kind");
    if (kind > 1) {
      throw DataError("FSML: invalid record kind " + std::to_string(kind) + " at byte offset " +
                      std::to_string(record_offset));
    }
    const auto id_len = in.uint(2, "record id length");
    const auto id_bytes = in.take(id_len, "record id");
    std::string id(id_bytes.begin(), id_bytes.end());
    const auto n_vectors = in.uint(4, "vector count");
    const std::size_t n_values = n_vectors * dim;
    in.need(n_values * 4, "vector payload");
    const auto payload = in.take(n_values * 4, "vector payload");
    TokenMatrix vecs(static_cast<Eigen::Index>(n_vectors), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n_values; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[i * 4 + b]) << (8 * b);
      vecs.data()[i] = std::bit_cast<float>(bits);
    }
    table.add(static_cast<RecordKind>(kind), std::move(id), std::move(vecs));
  }
  return table;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open embedding file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return parse_embedding_table(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> serialize_embedding_table(const EmbeddingTable& table) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_uint(out, kVersion, 4);
  put_uint(out, static_cast<std::uint32_t>(table.dim()), 4);
  for (const auto& rec : table.records()) {
    if (rec.id.size() > 0xffff) throw DataError("embedding id too long: " + rec.id.substr(0, 32));
    out.push_back(static_cast<std::uint8_t>(rec.kind));
    put_uint(out, rec.id.size(), 2);
    out.insert(out.end(), rec.id.begin(), rec.id.end());
    put_uint(out, static_cast<std::uint64_t>(rec.vecs.rows()), 4);
    for (Eigen::Index i = 0; i < rec.vecs.size(); ++i) {
      put_uint(out, std::bit_cast<std::uint32_t>(rec.vecs.data()[i]), 4);
    }
  }
  return out;
}

void write_embedding_table(const EmbeddingTable& table, const std::filesystem::path& path) {
  const auto bytes = serialize_embedding_table(table);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write embedding file " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

TokenMatrix toy_embed(std::span<const std::string> tokens, int dim, std::uint64_t seed) {
  if (dim < 2) throw ConfigError("toy embedding dim must be >= 2");
  TokenMatrix out(static_cast<Eigen::Index>(tokens.size()), dim);
  std::vector<double> v(dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Rng rng(hash64(tokens[t]) ^ seed);
    double norm2 = 0.0;
    for (auto& x : v) {
      x = rng.approx_normal();
      norm2 += x * x;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int d = 0; d < dim; ++d) out(static_cast<Eigen::Index>(t), d) = static_cast<float>(v[d] * inv);
  }
  return out;
}

EmbeddingTable toy_embed_corpus(std::span<const Domain> domains, int dim, std::uint64_t seed) {
  EmbeddingTable table(dim);
  for (const auto& d : domains) {
    for (const auto& u : d.pool) {
      table.add(RecordKind::kUtterance, u.id(), toy_embed(u.utterance.tokens, dim, seed));
    }
  }
  for (const auto& d : domains) {
    for (int l = 0; l < d.n_labels(); ++l) {
      const auto& name = d.label_space.name(l);
      if (table.has_label(name)) continue;  // label names may recur across domains
      table.add(RecordKind::kLabel, name, toy_embed(d.label_space.name_tokens(l), dim, seed));
    }
  }
  return table;
}

Vector sentence_embedding(const TokenMatrix& vecs) {
  if (vecs.rows() == 0) throw DataError("sentence embedding of an empty token matrix");
  return vecs.cast<double>().colwise().mean().transpose();
}

Vector label_name_embedding(std::string_view label, const EmbeddingTable& table) {
  return sentence_embedding(table.label(label));
}

Vector utterance_embedding(const Utterance& u, const EmbeddingTable& table) {
  return sentence_embedding(table.utterance(u.id));
}

void bind_embeddings(const EmbeddingTable& table, std::span<const Domain> domains) {
  for (const auto& d : domains) {
    for (const auto& u : d.pool) {
      const auto& m = table.utterance(u.id());
      if (static_cast<std::size_t>(m.rows()) != u.utterance.tokens.size()) {
        throw DataError("embedding for utterance \"" + u.id() + "\" has " +
                        std::to_string(m.rows()) + " vectors but the utterance has " +
                        std::to_string(u.utterance.tokens.size()) + " tokens");
      }
    }
    for (const auto& name : d.label_space.names()) {
      const auto& m = table.label(name);
      if (m.rows() == 0) throw DataError("embedding for label \"" + name + "\" has no vectors");
    }
  }
}

}  // namespace fsml
