#include "cup/tokenize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/rng.hpp"

namespace cup {

namespace {

bool is_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(unsigned char c) { return c >= 'a' && c <= 'z'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}
// Letters for pre-tokenization: ASCII letters and any UTF-8 byte >= 0x80.
bool is_alpha(unsigned char c) { return is_upper(c) || is_lower(c) || c >= 0x80; }

std::string with_marker(bool space, std::string_view body) {
  std::string out;
  if (space) out.append(kSpaceMarker);
  out.append(body);
  return out;
}

bool starts_with_marker(std::string_view s) { return s.substr(0, kSpaceMarker.size()) == kSpaceMarker; }

}  // namespace

std::vector<std::string> camel_case_split(std::string_view token) {
  std::vector<std::string> out;
  if (token.empty()) return out;
  std::size_t start = 0;
  for (std::size_t i = 1; i < token.size(); ++i) {
    const auto prev = static_cast<unsigned char>(token[i - 1]);
    const auto cur = static_cast<unsigned char>(token[i]);
    const bool next_lower = i + 1 < token.size() && is_lower(static_cast<unsigned char>(token[i + 1]));
    const bool boundary = (is_lower(prev) && is_upper(cur)) || (is_digit(prev) != is_digit(cur)) ||
                          (is_upper(prev) && is_upper(cur) && next_lower);
    if (boundary) {
      out.emplace_back(token.substr(start, i - start));
      start = i;
    }
  }
  out.emplace_back(token.substr(start));
  return out;
}

std::string detokenize(const TokenSequence& seq) {
  std::string out;
  for (const auto& tok : seq.tokens) {
    if (tok == kBosToken || tok == kEosToken) continue;
    std::size_t pos = 0;
    while (pos < tok.size()) {
      if (tok.compare(pos, kSpaceMarker.size(), kSpaceMarker) == 0) {
        out.push_back(' ');
        pos += kSpaceMarker.size();
      } else {
        out.push_back(tok[pos++]);
      }
    }
  }
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

namespace detail {

std::vector<std::string> pretokenize(std::string_view text) {
  std::vector<std::string> pieces;
  bool pending_space = false;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' && !pending_space && i + 1 < n && !is_space(static_cast<unsigned char>(text[i + 1]))) {
      pending_space = true;
      ++i;
      continue;
    }
    if (is_space(c)) {
      pieces.push_back(c == ' ' ? std::string(kSpaceMarker) : std::string(1, static_cast<char>(c)));
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_alpha(c)) {
      while (j < n && is_alpha(static_cast<unsigned char>(text[j]))) ++j;
    } else if (is_digit(c)) {
      while (j < n && is_digit(static_cast<unsigned char>(text[j]))) ++j;
    }
    pieces.push_back(with_marker(pending_space, text.substr(i, j - i)));
    pending_space = false;
    i = j;
  }
  return pieces;
}

}  // namespace detail

Matrix EmbeddingProvider::embed_tokens(const TokenSequence& seq) const {
  const int dim = dimension();
  Matrix out(static_cast<Eigen::Index>(seq.size()), dim);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    Vector v = embed_token(seq.tokens[i]);
    if (v.size() != dim) {
      throw ContractError("provider " + name() + " returned width " + std::to_string(v.size()) +
                          ", expected " + std::to_string(dim));
    }
    out.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return out;
}

Vector EmbeddingProvider::sentence_embed(std::string_view text) const {
  const Matrix m = embed_tokens(tokenize(text));
  Vector mean = m.colwise().mean().transpose();
  const double norm = mean.norm();
  if (norm > 0.0) mean /= norm;
  return mean;
}

namespace {

class StubProvider final : public EmbeddingProvider {
 public:
  StubProvider(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension <= 0) throw ConfigError("stub provider dimension must be positive");
  }

  std::string name() const override { return "stub"; }
  int dimension() const override { return dimension_; }
  ProviderKind kind() const override { return ProviderKind::kDeterministicStub; }
  std::string identity() const override {
    return "stub:" + std::to_string(dimension_) + ":" + std::to_string(seed_);
  }

  TokenSequence tokenize(std::string_view text) const override {
    TokenSequence seq;
    seq.tokens.emplace_back(kBosToken);
    for (auto& piece : detail::pretokenize(text)) {
      const bool marked = starts_with_marker(piece);
      std::string_view body(piece);
      if (marked) body.remove_prefix(kSpaceMarker.size());
      if (body.empty() || !is_alpha(static_cast<unsigned char>(body.front()))) {
        seq.tokens.push_back(std::move(piece));
        continue;
      }
      auto parts = camel_case_split(body);
      for (std::size_t k = 0; k < parts.size(); ++k) {
        seq.tokens.push_back(k == 0 ? with_marker(marked, parts[k]) : parts[k]);
      }
    }
    seq.tokens.emplace_back(kEosToken);
    return seq;
  }

  Vector embed_token(std::string_view token) const override {
    SplitMix64 seeder(seed_);
    SplitMix64 rng(fnv1a64(token.data(), token.size()) ^ seeder.next());
    Vector v(dimension_);
    for (int i = 0; i < dimension_; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v / v.norm();
  }

 private:
  int dimension_;
  std::uint64_t seed_;
};

// Static token-embedding table exported from a pretrained encoder:
//   <model_path>/vocab.txt       one token per line, line number = row
//   <model_path>/embeddings.f32  rows x dimension little-endian float32
// Tokenization is greedy longest-match over the vocabulary on top of the
// shared byte-level pre-tokenizer.
class TableProvider final : public EmbeddingProvider {
 public:
  explicit TableProvider(const ProviderConfig& config) : dimension_(config.dimension) {
    namespace fs = std::filesystem;
    const fs::path root(config.model_path);
    if (config.model_path.empty() || !fs::exists(root / "vocab.txt") || !fs::exists(root / "embeddings.f32")) {
      throw ConfigError("provider 'table' unavailable: expected vocab.txt and embeddings.f32 under '" +
                        config.model_path + "'");
    }
    std::ifstream vocab(root / "vocab.txt");
    std::string line;
    while (std::getline(vocab, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto row = static_cast<Eigen::Index>(tokens_.size());
      rows_.emplace(line, row);
      max_token_bytes_ = std::max(max_token_bytes_, line.size());
      tokens_.push_back(line);
    }
    const std::string blob = read_file(root / "embeddings.f32");
    const std::size_t expected = tokens_.size() * static_cast<std::size_t>(dimension_) * sizeof(float);
    if (blob.size() != expected) {
      throw ConfigError("embeddings.f32 has " + std::to_string(blob.size()) + " bytes, expected " +
                        std::to_string(expected) + " for " + std::to_string(tokens_.size()) + "x" +
                        std::to_string(dimension_));
    }
    table_.resize(static_cast<Eigen::Index>(tokens_.size()), dimension_);
    const auto* f = reinterpret_cast<const float*>(blob.data());
    for (Eigen::Index r = 0; r < table_.rows(); ++r)
      for (Eigen::Index c = 0; c < dimension_; ++c) table_(r, c) = f[r * dimension_ + c];
    digest_ = sha256_hex(blob).substr(0, 16);
  }

  std::string name() const override { return "table"; }
  int dimension() const override { return dimension_; }
  ProviderKind kind() const override { return ProviderKind::kPretrainedEncoder; }
  std::string identity() const override { return "table:" + std::to_string(dimension_) + ":" + digest_; }

  TokenSequence tokenize(std::string_view text) const override {
    TokenSequence seq;
    seq.tokens.emplace_back(kBosToken);
    for (const auto& piece : detail::pretokenize(text)) {
      std::size_t pos = 0;
      while (pos < piece.size()) {
        std::size_t len = std::min(max_token_bytes_, piece.size() - pos);
        for (; len > 0; --len) {
          if (rows_.count(piece.substr(pos, len))) break;
        }
        if (len == 0) {
          // Unknown byte: keep it verbatim so detokenization still round-trips;
          // embed_token maps it to <unk> (or zeros when the table has none).
          len = 1;
        }
        seq.tokens.push_back(piece.substr(pos, len));
        pos += len;
      }
    }
    seq.tokens.emplace_back(kEosToken);
    return seq;
  }

  Vector embed_token(std::string_view token) const override {
    auto it = rows_.find(std::string(token));
    if (it == rows_.end()) it = rows_.find("<unk>");
    if (it == rows_.end()) return Vector::Zero(dimension_);
    return table_.row(it->second).transpose();
  }

 private:
  int dimension_;
  std::unordered_map<std::string, Eigen::Index> rows_;
  std::vector<std::string> tokens_;
  std::size_t max_token_bytes_ = 1;
  Matrix table_;
  std::string digest_;
};

}  // namespace

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config) {
  if (config.name == "stub") return std::make_unique<StubProvider>(config.dimension, config.seed);
  if (config.name == "table") return std::make_unique<TableProvider>(config);
  throw ConfigError("unknown embedding provider '" + config.name + "' (available: stub, table)");
}

}  // namespace cup
