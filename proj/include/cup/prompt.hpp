#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cup/sample.hpp"

namespace cup {

// Identifies the template resource set; part of every cache key and report.
inline constexpr std::string_view kPromptVersion = "cup-prompts-v1";

struct PromptStrategy {
  int shots = 0;  // k demonstrations
  double temperature = 0.2;
  std::string model_id;

  void validate() const;
};

// Candidate text plus where it came from.
struct Provenance {
  std::string model_id;
  int shots = 0;
  double temperature = 0.0;

  bool operator==(const Provenance&) const = default;
};

enum class Label { kPositive, kNegative };

struct CandidateComment {
  std::string text;
  Provenance provenance;
  std::optional<Label> label;
};

// `demonstrations` come in retrieval order (most similar first) and are
// rendered most-similar-last, nearest to the query. Throws ContractError when
// their count differs from strategy.shots.
std::string build_update_prompt(const CommentUpdateSample& sample,
                                const std::vector<CommentUpdateSample>& demonstrations,
                                const PromptStrategy& strategy);

// Candidates are rendered as "Expert 1".."Expert k" in the given order.
// Requires at least two candidates.
std::string build_self_rank_prompt(const CommentUpdateSample& sample,
                                   const std::vector<CandidateComment>& candidates);

std::vector<std::string> default_response_labels();

// Strips code fences and language tags, inline markdown markers, leading
// labels such as "Updated comment:", and surrounding quotes; collapses
// newlines. Throws ValidationError when nothing is left.
std::string normalize_llm_response(std::string_view raw,
                                   const std::vector<std::string>& labels = default_response_labels());

// Non-throwing variant used by the matching protocol; can additionally drop
// comment delimiters (/**, */, leading * and //).
std::string clean_response(std::string_view raw, const std::vector<std::string>& labels,
                           bool strip_comment_delimiters);

}  // namespace cup
