#include "cup/baselines.hpp"

#include <numeric>
#include <regex>

#include "json.hpp"

#include "cup/error.hpp"
#include "cup/rng.hpp"

namespace cup {

std::vector<std::size_t> random_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

std::vector<CandidateComment> random_rank(const std::vector<CandidateComment>& candidates, std::uint64_t seed) {
  std::vector<CandidateComment> out;
  for (std::size_t i : random_permutation(candidates.size(), seed)) out.push_back(candidates[i]);
  return out;
}

std::vector<std::size_t> parse_self_rank_reply(const std::string& reply, std::size_t k) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("self-rank reply " + why + "; raw reply: " + reply);
  };
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) throw fail("has no JSON object");
  std::string body = reply.substr(open, close - open + 1);
  // The template's own example ends in ",}"; tolerate that one slip.
  body = std::regex_replace(body, std::regex(R"(,\s*\})"), "}");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw fail("is not valid JSON");
  }
  if (!j.is_object() || j.size() != k) throw fail("must have exactly " + std::to_string(k) + " entries");
  static const std::regex kExpert(R"(\s*Expert\s*(\d+)\s*)", std::regex::icase);
  std::vector<std::size_t> order;
  std::vector<bool> used(k, false);
  for (std::size_t r = 1; r <= k; ++r) {
    const std::string key = "top-" + std::to_string(r);
    if (!j.contains(key) || !j[key].is_string()) throw fail("is missing " + key);
    std::smatch m;
    const std::string name = j[key].get<std::string>();
    if (!std::regex_match(name, m, kExpert)) throw fail("names an unknown expert '" + name + "'");
    const std::size_t idx = std::stoul(m[1].str());
    if (idx < 1 || idx > k) throw fail("names an unknown expert '" + name + "'");
    if (used[idx - 1]) throw fail("repeats '" + name + "'");
    used[idx - 1] = true;
    order.push_back(idx - 1);
  }
  return order;
}

std::vector<CandidateComment> self_rank(const CommentUpdateSample& sample,
                                        const std::vector<CandidateComment>& candidates, LlmBackend& backend,
                                        ResponseCache* cache, const SelfRankOptions& options) {
  if (candidates.size() < 2) throw ContractError("self_rank needs at least two candidates");
  CompletionRequest req;
  req.model_id = options.model_id;
  req.prompt = build_self_rank_prompt(sample, candidates);
  req.temperature = options.temperature;
  req.max_tokens = options.max_tokens;
  const auto order = parse_self_rank_reply(cached_complete(req, backend, cache), candidates.size());
  std::vector<CandidateComment> out;
  for (std::size_t i : order) out.push_back(candidates[i]);
  return out;
}

}  // namespace cup
