#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cup/llm.hpp"
#include "cup/prompt.hpp"
#include "cup/rank.hpp"
#include "cup/retrieve.hpp"
#include "cup/sample.hpp"

namespace cup {

// Positive iff the candidate passes the Accuracy protocol against the ground
// truth. ContractError on an empty ground truth.
Label label_candidate(const CandidateComment& candidate, const std::string& ground_truth);

/// One positive (the ground truth) plus at least one negative, all for the
/// same code change and old comment.
struct AugmentedGroup {
  std::string id;
  std::string old_code;
  std::string old_comment;
  std::string new_code;
  CandidateComment positive;
  std::vector<CandidateComment> negatives;

  CommentUpdateSample sample() const;  // new_comment = positive text
};

// shots x models, models outermost, all at one temperature.
std::vector<PromptStrategy> expand_strategies(const std::vector<int>& shots, double temperature,
                                              const std::vector<std::string>& models);

struct GenerateOptions {
  int max_tokens = 256;
  std::optional<std::int64_t> seed;
};

// One candidate per strategy that produced usable text, deduplicated under the
// Accuracy protocol (first occurrence wins). Demonstrations come from `index`
// with the sample itself excluded. Failing strategies are skipped with a
// warning; TransportError when every strategy fails.
std::vector<CandidateComment> generate_candidates(const CommentUpdateSample& sample,
                                                  const std::vector<PromptStrategy>& strategies,
                                                  LlmBackend& backend, ResponseCache* cache,
                                                  const ExampleIndex& index, const GenerateOptions& options = {});

// std::nullopt when no candidate survives as a negative (sample discarded).
// ContractError when the sample has no ground truth.
std::optional<AugmentedGroup> build_group(const CommentUpdateSample& sample,
                                          const std::vector<CandidateComment>& candidates);

struct AugmentSummary {
  std::size_t samples_in = 0;
  std::size_t groups_out = 0;
  std::size_t discarded = 0;
  std::vector<std::string> discarded_ids;
};

struct AugmentResult {
  std::vector<AugmentedGroup> groups;
  AugmentSummary summary;
};

AugmentResult augment_dataset(const std::vector<CommentUpdateSample>& dataset,
                              const std::vector<PromptStrategy>& strategies, LlmBackend& backend,
                              ResponseCache* cache, const ExampleIndex& index, const GenerateOptions& options = {});

// ValidationError naming the group id when any group invariant fails.
void validate_group(const AugmentedGroup& group);

// Group file: optional {"manifest_digest": ...} header line, then one record
// per line with fields id, old_code, old_comment, new_code, positive,
// negatives[{text, model_id, shots, temperature}].
std::string serialize_group(const AugmentedGroup& group);
std::string serialize_groups(const std::vector<AugmentedGroup>& groups, const std::string& manifest_digest);

struct GroupFile {
  std::string manifest_digest;  // empty when the file has no header
  std::vector<AugmentedGroup> groups;
};

// Every loaded group is validated; duplicate ids are rejected.
GroupFile parse_groups(const std::string& text);
GroupFile load_groups(const std::filesystem::path& path);

// Flattens and embeds every candidate; candidates[0] is the positive.
EncodedGroup encode_group(const AugmentedGroup& group, const EmbeddingProvider& provider, std::size_t max_len);

}  // namespace cup
