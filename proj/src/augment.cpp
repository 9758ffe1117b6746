#include "cup/augment.hpp"

#include <future>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/log.hpp"
#include "cup/metrics.hpp"

namespace cup {

Label label_candidate(const CandidateComment& candidate, const std::string& ground_truth) {
  if (ground_truth.empty()) throw ContractError("label_candidate needs a non-empty ground truth");
  return accuracy(candidate.text, ground_truth) == 1 ? Label::kPositive : Label::kNegative;
}

CommentUpdateSample AugmentedGroup::sample() const {
  return {id, old_code, old_comment, new_code, positive.text};
}

std::vector<PromptStrategy> expand_strategies(const std::vector<int>& shots, double temperature,
                                              const std::vector<std::string>& models) {
  std::vector<PromptStrategy> out;
  for (const auto& model : models) {
    for (int k : shots) {
      PromptStrategy s{k, temperature, model};
      s.validate();
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<CandidateComment> generate_candidates(const CommentUpdateSample& sample,
                                                  const std::vector<PromptStrategy>& strategies,
                                                  LlmBackend& backend, ResponseCache* cache,
                                                  const ExampleIndex& index, const GenerateOptions& options) {
  if (strategies.empty()) throw ContractError("generate_candidates needs at least one strategy");

  std::vector<CompletionRequest> requests;
  for (const auto& strategy : strategies) {
    strategy.validate();
    std::vector<CommentUpdateSample> demos;
    for (const auto& hit : index.top_k(sample.new_code, static_cast<std::size_t>(strategy.shots), sample.id))
      demos.push_back(*hit.sample);
    CompletionRequest req;
    req.model_id = strategy.model_id;
    req.prompt = build_update_prompt(sample, demos, strategy);
    req.temperature = strategy.temperature;
    req.max_tokens = options.max_tokens;
    req.seed = options.seed;
    requests.push_back(std::move(req));
  }

  // Cache misses go to the backend concurrently; stores happen afterwards in
  // strategy order so the cache file is reproducible.
  std::vector<std::optional<std::string>> raw(requests.size());
  std::vector<std::future<std::string>> pending(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (cache) raw[i] = cache->lookup(requests[i]);
    if (!raw[i]) pending[i] = std::async(std::launch::async, [&, i] { return backend.complete(requests[i]); });
  }
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (raw[i]) continue;
    try {
      raw[i] = pending[i].get();
      if (cache) cache->store(requests[i], *raw[i]);
    } catch (const TransportError& e) {
      if (e.kind() == TransportKind::kAuth || e.kind() == TransportKind::kBackendConfig) throw;
      logger()->warn("sample {}: {} {}-shot failed: {}", sample.id, strategies[i].model_id, strategies[i].shots,
                     e.what());
      failures.push_back(strategies[i].model_id + "/" + std::to_string(strategies[i].shots) + "-shot: " + e.what());
    }
  }
  if (failures.size() == strategies.size()) {
    std::string msg = "sample " + sample.id + ": every strategy failed";
    for (const auto& f : failures) msg += "; " + f;
    throw TransportError(TransportKind::kUnavailable, msg);
  }

  std::vector<CandidateComment> out;
  std::set<std::vector<std::string>> seen;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (!raw[i]) continue;
    std::string text;
    try {
      text = normalize_llm_response(*raw[i]);
    } catch (const ValidationError&) {
      logger()->warn("sample {}: {} {}-shot reply is empty after normalization", sample.id,
                     strategies[i].model_id, strategies[i].shots);
      continue;
    }
    if (!seen.insert(protocol_tokens(text)).second) continue;
    CandidateComment c;
    c.text = std::move(text);
    c.provenance = {strategies[i].model_id, strategies[i].shots, strategies[i].temperature};
    if (sample.new_comment) c.label = label_candidate(c, *sample.new_comment);
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<AugmentedGroup> build_group(const CommentUpdateSample& sample,
                                          const std::vector<CandidateComment>& candidates) {
  if (!sample.new_comment) throw ContractError("sample " + sample.id + " has no ground truth");
  AugmentedGroup g;
  g.id = sample.id;
  g.old_code = sample.old_code;
  g.old_comment = sample.old_comment;
  g.new_code = sample.new_code;
  g.positive.text = *sample.new_comment;
  g.positive.label = Label::kPositive;
  std::set<std::vector<std::string>> seen{protocol_tokens(g.positive.text)};
  for (const auto& c : candidates) {
    if (c.text.empty()) continue;
    if (!seen.insert(protocol_tokens(c.text)).second) continue;
    CandidateComment neg = c;
    neg.label = Label::kNegative;
    g.negatives.push_back(std::move(neg));
  }
  if (g.negatives.empty()) return std::nullopt;
  return g;
}

AugmentResult augment_dataset(const std::vector<CommentUpdateSample>& dataset,
                              const std::vector<PromptStrategy>& strategies, LlmBackend& backend,
                              ResponseCache* cache, const ExampleIndex& index, const GenerateOptions& options) {
  AugmentResult result;
  for (const auto& sample : dataset) {
    ++result.summary.samples_in;
    auto group = build_group(sample, generate_candidates(sample, strategies, backend, cache, index, options));
    if (!group) {
      ++result.summary.discarded;
      result.summary.discarded_ids.push_back(sample.id);
      continue;
    }
    result.groups.push_back(std::move(*group));
    ++result.summary.groups_out;
  }
  logger()->info("augment: {} samples, {} groups, {} discarded", result.summary.samples_in,
                 result.summary.groups_out, result.summary.discarded);
  return result;
}

void validate_group(const AugmentedGroup& g) {
  const std::string where = "group " + (g.id.empty() ? std::string("<no id>") : g.id);
  if (g.id.empty()) throw ValidationError(where + ": empty id");
  if (g.old_code.empty() || g.old_comment.empty() || g.new_code.empty())
    throw ValidationError(where + ": empty context field");
  if (g.positive.text.empty()) throw ValidationError(where + ": empty positive");
  if (g.negatives.empty()) throw ValidationError(where + ": no negatives");
  std::set<std::vector<std::string>> seen{protocol_tokens(g.positive.text)};
  for (const auto& n : g.negatives) {
    if (n.text.empty()) throw ValidationError(where + ": empty negative");
    if (accuracy(n.text, g.positive.text) == 1) throw ValidationError(where + ": a negative matches the positive");
    if (!seen.insert(protocol_tokens(n.text)).second) throw ValidationError(where + ": duplicate negatives");
  }
}

std::string serialize_group(const AugmentedGroup& g) {
  nlohmann::ordered_json j;
  j["id"] = g.id;
  j["old_code"] = g.old_code;
  j["old_comment"] = g.old_comment;
  j["new_code"] = g.new_code;
  j["positive"] = g.positive.text;
  j["negatives"] = nlohmann::ordered_json::array();
  for (const auto& n : g.negatives) {
    nlohmann::ordered_json e;
    e["text"] = n.text;
    e["model_id"] = n.provenance.model_id;
    e["shots"] = n.provenance.shots;
    e["temperature"] = n.provenance.temperature;
    j["negatives"].push_back(std::move(e));
  }
  return j.dump();
}

std::string serialize_groups(const std::vector<AugmentedGroup>& groups, const std::string& manifest_digest) {
  std::string out;
  if (!manifest_digest.empty()) out += nlohmann::ordered_json{{"manifest_digest", manifest_digest}}.dump() + "\n";
  for (const auto& g : groups) out += serialize_group(g) + "\n";
  return out;
}

GroupFile parse_groups(const std::string& text) {
  GroupFile file;
  std::set<std::string> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "group file line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    if (j.size() == 1 && j.contains("manifest_digest")) {
      if (line_no != 1 || !file.groups.empty()) throw ParseError(where + ": manifest header must come first");
      file.manifest_digest = j["manifest_digest"].get<std::string>();
      continue;
    }
    AugmentedGroup g;
    try {
      g.id = j.at("id").get<std::string>();
      g.old_code = j.at("old_code").get<std::string>();
      g.old_comment = j.at("old_comment").get<std::string>();
      g.new_code = j.at("new_code").get<std::string>();
      g.positive.text = j.at("positive").get<std::string>();
      g.positive.label = Label::kPositive;
      for (const auto& n : j.at("negatives")) {
        CandidateComment c;
        c.text = n.at("text").get<std::string>();
        c.provenance = {n.at("model_id").get<std::string>(), n.at("shots").get<int>(),
                        n.at("temperature").get<double>()};
        c.label = Label::kNegative;
        g.negatives.push_back(std::move(c));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
    validate_group(g);
    if (!ids.insert(g.id).second) throw ValidationError("duplicate group id " + g.id);
    file.groups.push_back(std::move(g));
  }
  return file;
}

GroupFile load_groups(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("group file not found: " + path.string());
  return parse_groups(read_file(path));
}

EncodedGroup encode_group(const AugmentedGroup& group, const EmbeddingProvider& provider, std::size_t max_len) {
  const CommentUpdateSample s = group.sample();
  FlattenOptions opt;
  opt.max_len = max_len;
  EncodedGroup out;
  out.id = group.id;
  out.candidates.push_back(make_pair_input(flatten_sample(s, group.positive.text, provider, opt), provider));
  for (const auto& n : group.negatives)
    out.candidates.push_back(make_pair_input(flatten_sample(s, n.text, provider, opt), provider));
  return out;
}

}  // namespace cup
