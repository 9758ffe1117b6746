#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cup/augment.hpp"
#include "cup/llm.hpp"
#include "cup/metrics.hpp"
#include "cup/rank.hpp"
#include "cup/ranknet.hpp"
#include "cup/retrieve.hpp"
#include "cup/tokenize.hpp"

namespace cup {

struct BackendSettings {
  std::string kind = "mock";  // "mock" or "http"
  std::string fixture;        // mock rule file
  HttpBackendConfig http;
  int max_tokens = 256;
  std::optional<std::int64_t> request_seed;
};

// Relative paths are used as given (the CLI resolves config-file paths
// against the config file's directory before they reach here).
struct PipelinePaths {
  std::string dataset;
  std::string corpus;  // retrieval corpus; defaults to the dataset itself
  std::string groups;
  std::string val;
  std::string checkpoint;
  std::string pred;
  std::string gold;
  std::string index;  // cached retrieval index
  std::string out;
  std::string cache_dir;
};

struct PipelineConfig {
  ProviderConfig provider;
  std::vector<int> shots{0, 1, 3, 5};
  double temperature = 0.2;
  std::vector<std::string> models;
  BackendSettings backend;
  std::string method = "cuprank";  // cuprank | ranknet | random | self
  RankerConfig ranker;
  RankNetConfig ranknet;
  int retrieve_k = 5;
  PipelinePaths paths;
  std::uint64_t seed = 42;

  void validate() const;
};

// Missing keys keep their defaults. ranker.embed_dim / ranknet.embed_dim
// default to the provider width (+4 for the ranker); the top-level seed is
// copied into both model configs. ConfigError on bad values or types.
PipelineConfig parse_pipeline_config(const std::string& json);
std::string pipeline_config_to_json(const PipelineConfig& config, bool include_paths = true);
// SHA-256 of the config without paths, so relocating a run keeps its digest.
std::string config_digest(const PipelineConfig& config);

/// Provenance record written next to every output as <out>.manifest.json.
struct Manifest {
  std::string subcommand;
  std::string config_digest;
  std::string prompt_version;
  std::string provider_identity;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // role -> sha256 of contents

  std::string to_json() const;
  std::string digest() const;  // sha256 of to_json()
};

std::filesystem::path manifest_path(const std::filesystem::path& out);

std::unique_ptr<LlmBackend> make_backend(const PipelineConfig& config);

struct UpdateOutcome {
  std::string id;
  std::string final_comment;
  std::vector<RankedCandidate> ranked;  // full audit list, best first
};

/// Generates candidates for one sample and picks the best with the configured
/// ranking method. Holds references only; everything passed in must outlive
/// it.
class Updater {
 public:
  Updater(const PipelineConfig& config, const EmbeddingProvider& provider, const ExampleIndex& index,
          LlmBackend& backend, ResponseCache* cache);

  void set_cuprank(RankerParams params, RankerConfig config);
  void set_ranknet(RankNetParams params, RankNetConfig config);

  // ValidationError when no usable candidate remains after normalization.
  UpdateOutcome update(const CommentUpdateSample& sample) const;
  std::vector<RankedCandidate> rank(const CommentUpdateSample& sample,
                                    const std::vector<CandidateComment>& candidates) const;

 private:
  const PipelineConfig& config_;
  const EmbeddingProvider& provider_;
  const ExampleIndex& index_;
  LlmBackend& backend_;
  ResponseCache* cache_;
  std::vector<PromptStrategy> strategies_;
  std::optional<std::pair<RankerParams, RankerConfig>> cuprank_;
  std::optional<std::pair<RankNetParams, RankNetConfig>> ranknet_;
};

// --- file-level subcommands ---------------------------------------------------
// Each writes its output to paths.out plus a manifest beside it and returns a
// JSON summary.

struct RunResult {
  std::string manifest_digest;
  std::string summary_json;
};

RunResult run_augment(const PipelineConfig& config);   // dataset -> groups
RunResult run_train(const PipelineConfig& config);     // groups (+ val) -> checkpoint
RunResult run_update(const PipelineConfig& config);    // dataset + checkpoint -> predictions
RunResult run_evaluate(const PipelineConfig& config);  // pred + gold -> report
RunResult run_classify(const PipelineConfig& config);  // dataset -> update types
RunResult run_retrieve(const PipelineConfig& config);  // dataset queries -> neighbours

// Prediction file: optional manifest header, then {id, prediction, ranked}.
std::string serialize_predictions(const std::vector<UpdateOutcome>& outcomes, const std::string& manifest_digest);
std::map<std::string, std::string> load_predictions(const std::filesystem::path& path);

}  // namespace cup
