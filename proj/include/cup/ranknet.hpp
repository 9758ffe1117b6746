#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cup/rank.hpp"

namespace cup {

struct RankNetConfig {
  int embed_dim = 768;  // provider dimension; no edit features
  int hidden_dim = 256;
  double learning_rate = 1e-3;
  int batch_groups = 8;
  int epochs = 1;
  int max_seq_len = 512;  // per text
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const RankNetConfig&) const = default;
};

std::string ranknet_config_to_json(const RankNetConfig& config);
RankNetConfig ranknet_config_from_json(const std::string& json);

struct RankNetParams {
  Linear fc1;  // embed_dim -> hidden_dim, tanh, then max-pool over rows
  Linear fc2;  // hidden_dim -> 1

  static RankNetParams init(const RankNetConfig& config);
};

// Token embeddings of old code, new code, old comment and candidate stacked
// row-wise; each text is truncated to max_seq_len tokens.
Matrix ranknet_input(const CommentUpdateSample& sample, const std::string& candidate,
                     const EmbeddingProvider& provider, std::size_t max_seq_len);

// fc2 of the column-wise max over rows of tanh(fc1(x)), before the sigmoid.
double ranknet_logit(const Matrix& input, const RankNetParams& params);
// Sigmoid of the logit, in (0, 1).
double ranknet_score(const Matrix& input, const RankNetParams& params);

// Pairwise ranking loss log(1 + exp(-(l_pos - l_neg))) summed over every
// (positive, negative) pair of the group; optional gradient accumulation.
double ranknet_group_loss(const std::vector<Matrix>& group, const RankNetParams& params, RankNetParams* grad);

// group[0] is the positive, as in EncodedGroup.
RankNetParams ranknet_train(const std::vector<std::vector<Matrix>>& groups, const RankNetConfig& config);

void save_ranknet(const std::filesystem::path& path, const RankNetParams& params, const RankNetConfig& config,
                  const std::string& provider_identity, const std::string& manifest_digest = "");

struct LoadedRankNet {
  RankNetParams params;
  RankNetConfig config;
};

LoadedRankNet load_ranknet(const std::filesystem::path& path, const std::string& expected_provider_identity);

}  // namespace cup
