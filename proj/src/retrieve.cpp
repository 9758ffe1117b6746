#include "cup/retrieve.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "binary_io.hpp"

namespace cup {

namespace {

constexpr char kMagic[8] = {'C', 'U', 'P', 'I', 'D', 'X', '0', '1'};

using binio::put;
using binio::Reader;

}  // namespace

ExampleIndex::ExampleIndex(std::vector<CommentUpdateSample> corpus, Matrix vectors, const EmbeddingProvider& provider)
    : corpus_(std::move(corpus)),
      vectors_(std::move(vectors)),
      provider_identity_(provider.identity()),
      provider_(&provider) {}

ExampleIndex ExampleIndex::build(std::vector<CommentUpdateSample> corpus, const EmbeddingProvider& provider) {
  if (corpus.empty()) throw ValidationError("cannot build an index over an empty corpus");
  std::set<std::string> ids;
  for (const auto& s : corpus)
    if (!ids.insert(s.id).second) throw ValidationError("index construction: duplicate sample id " + s.id);
  Matrix vectors(static_cast<Eigen::Index>(corpus.size()), provider.dimension());
  for (std::size_t i = 0; i < corpus.size(); ++i)
    vectors.row(static_cast<Eigen::Index>(i)) = provider.sentence_embed(corpus[i].new_code).transpose();
  return ExampleIndex(std::move(corpus), std::move(vectors), provider);
}

void ExampleIndex::save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(provider_identity_.size()));
  out += provider_identity_;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(vectors_.cols()));
  put<std::uint64_t>(out, corpus_.size());
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(corpus_[i].id.size()));
    out += corpus_[i].id;
    for (Eigen::Index c = 0; c < vectors_.cols(); ++c) put<double>(out, vectors_(static_cast<Eigen::Index>(i), c));
  }
  write_file(path, out);
}

ExampleIndex ExampleIndex::load(const std::filesystem::path& path, std::vector<CommentUpdateSample> corpus,
                                const EmbeddingProvider& provider) {
  const std::string bytes = read_file(path);
  Reader r(bytes, path.string());
  if (r.str(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw ParseError(path.string() + ": not an index file");
  const std::string identity = r.str(r.get<std::uint32_t>());
  if (identity != provider.identity()) {
    throw ConfigError("index " + path.string() + " was built with provider " + identity + ", current provider is " +
                      provider.identity());
  }
  const auto dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  if (static_cast<int>(dim) != provider.dimension()) throw ConfigError("index dimension mismatch");

  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < corpus.size(); ++i) by_id.emplace(corpus[i].id, i);
  std::vector<CommentUpdateSample> ordered;
  Matrix vectors(static_cast<Eigen::Index>(count), dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string id = r.str(r.get<std::uint32_t>());
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("index entry " + id + " not present in corpus");
    ordered.push_back(corpus[it->second]);
    for (std::uint32_t c = 0; c < dim; ++c) vectors(static_cast<Eigen::Index>(i), c) = r.get<double>();
  }
  if (!r.done()) throw ParseError(path.string() + ": trailing bytes");
  return ExampleIndex(std::move(ordered), std::move(vectors), provider);
}

std::vector<RetrievedExample> ExampleIndex::top_k(const std::string& query_new_code, std::size_t k,
                                                  const std::optional<std::string>& exclude_id) const {
  std::vector<RetrievedExample> out;
  if (k == 0) return out;
  const Vector q = provider_->sentence_embed(query_new_code);
  std::vector<RetrievedExample> all;
  all.reserve(corpus_.size());
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    if (exclude_id && corpus_[i].id == *exclude_id) continue;
    all.push_back({&corpus_[i], cosine(vectors_.row(static_cast<Eigen::Index>(i)).transpose(), q)});
  }
  auto better = [](const RetrievedExample& a, const RetrievedExample& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.sample->id < b.sample->id;
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
  all.resize(n);
  return all;
}

}  // namespace cup
