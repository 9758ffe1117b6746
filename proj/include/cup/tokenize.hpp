#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
// U+0120, the byte-level BPE marker for a preceding space.
inline constexpr std::string_view kSpaceMarker = "\xC4\xA0";

struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool operator==(const TokenSequence&) const = default;
};

// Splits an identifier at lower->upper and digit boundaries. An uppercase run
// followed by a lowercase letter yields "ACRONYM" + "Word". Total, and the
// pieces always concatenate back to the input.
std::vector<std::string> camel_case_split(std::string_view token);

// Drops sentinels and turns the space marker back into a space.
std::string detokenize(const TokenSequence& seq);

struct ProviderConfig {
  std::string name = "stub";
  int dimension = 768;
  std::uint64_t seed = 0;
  std::string model_path;
};

enum class ProviderKind { kPretrainedEncoder, kDeterministicStub };

/// Subword tokenizer plus context-free token embedding table.
///
/// Implementations are immutable after construction, so a single instance can
/// be shared across threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  virtual int dimension() const = 0;
  virtual ProviderKind kind() const = 0;
  // Stable string that identifies the embedding space (name, width, seed or
  // table digest). Persisted artifacts record it and refuse mismatches.
  virtual std::string identity() const = 0;

  virtual TokenSequence tokenize(std::string_view text) const = 0;
  virtual Vector embed_token(std::string_view token) const = 0;

  // Row i is the embedding of token i.
  Matrix embed_tokens(const TokenSequence& seq) const;
  // Mean of token embeddings, unit-normalized.
  Vector sentence_embed(std::string_view text) const;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& config);

// Convenience wrappers matching the module's operation names.
inline TokenSequence subword_tokenize(std::string_view text, const EmbeddingProvider& p) {
  return p.tokenize(text);
}
inline Matrix embed_tokens(const TokenSequence& seq, const EmbeddingProvider& p) {
  return p.embed_tokens(seq);
}
inline Vector sentence_embed(std::string_view text, const EmbeddingProvider& p) {
  return p.sentence_embed(text);
}

double cosine(const Vector& a, const Vector& b);

namespace detail {
// Byte-level pre-tokenization shared by both providers: words, numbers and
// punctuation, each optionally carrying one leading space (returned with the
// space marker); any other whitespace becomes its own piece.
std::vector<std::string> pretokenize(std::string_view text);
}  // namespace detail

}  // namespace cup
