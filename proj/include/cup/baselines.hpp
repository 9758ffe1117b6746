#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cup/llm.hpp"
#include "cup/prompt.hpp"
#include "cup/sample.hpp"

namespace cup {

// Uniform permutation of [0, n) from a seeded Fisher-Yates shuffle.
std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed);

std::vector<CandidateComment> random_rank(const std::vector<CandidateComment>& candidates, std::uint64_t seed);

// Reads the JSON object between the first '{' and the last '}' and expects
// exactly the keys "top-1".."top-k", each naming a distinct "Expert i"
// (1-based). Returns 0-based candidate indices in rank order. ParseError with
// the raw reply attached otherwise.
std::vector<std::size_t> parse_self_rank_reply(const std::string& reply, std::size_t k);

struct SelfRankOptions {
  std::string model_id;
  double temperature = 0.2;
  int max_tokens = 256;
};

// Asks the backend to order the candidates as a comment judge.
std::vector<CandidateComment> self_rank(const CommentUpdateSample& sample,
                                        const std::vector<CandidateComment>& candidates, LlmBackend& backend,
                                        ResponseCache* cache, const SelfRankOptions& options);

}  // namespace cup
