#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cup/sample.hpp"
#include "cup/tokenize.hpp"

namespace cup {

struct RetrievedExample {
  const CommentUpdateSample* sample = nullptr;
  double similarity = 0.0;
};

/// Exact cosine-similarity index over sentence embeddings of new code.
///
/// Holds a copy of the corpus; immutable once built, so queries may run
/// concurrently.
class ExampleIndex {
 public:
  // Throws ValidationError on an empty corpus or duplicate ids.
  static ExampleIndex build(std::vector<CommentUpdateSample> corpus, const EmbeddingProvider& provider);

  // Sidecar layout: magic "CUPIDX01", u32 identity length + identity bytes,
  // u32 dimension, u64 entry count, then per entry u32 id length + id bytes +
  // dimension little-endian f64. Loading re-attaches samples by id and throws
  // ConfigError when the provider identity differs.
  void save(const std::filesystem::path& path) const;
  static ExampleIndex load(const std::filesystem::path& path, std::vector<CommentUpdateSample> corpus,
                           const EmbeddingProvider& provider);

  // Descending similarity, ties by ascending id; exclude_id never returned.
  std::vector<RetrievedExample> top_k(const std::string& query_new_code, std::size_t k,
                                      const std::optional<std::string>& exclude_id = std::nullopt) const;

  std::size_t size() const { return corpus_.size(); }
  const std::vector<CommentUpdateSample>& corpus() const { return corpus_; }
  const Matrix& vectors() const { return vectors_; }  // row i <-> corpus()[i]
  const std::string& provider_identity() const { return provider_identity_; }

 private:
  ExampleIndex(std::vector<CommentUpdateSample> corpus, Matrix vectors, const EmbeddingProvider& provider);

  std::vector<CommentUpdateSample> corpus_;
  Matrix vectors_;
  std::string provider_identity_;
  const EmbeddingProvider* provider_;
};

}  // namespace cup
