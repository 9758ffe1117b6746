#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cup/flatten.hpp"
#include "cup/prompt.hpp"
#include "cup/tokenize.hpp"

namespace cup {

struct RankerConfig {
  int embed_dim = 772;  // provider dimension + 4 edit features
  int d_model = 768;
  int attention_heads = 4;
  int encoder_layers = 2;
  int ffn_dim = 1024;
  int proj_dim = 256;
  double lambda = 0.07;
  double learning_rate = 1e-4;
  int batch_groups = 8;
  int max_seq_len = 512;
  std::uint64_t seed = 42;
  int checkpoint_every = 5000;  // groups consumed between validations
  int epochs = 1;
  double dropout = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
  bool operator==(const RankerConfig&) const = default;
};

std::string ranker_config_to_json(const RankerConfig& config);
// Missing keys keep their defaults; throws ConfigError on bad types.
RankerConfig ranker_config_from_json(const std::string& json);

// Parameters are plain matrices; biases and layer-norm vectors are 1 x n.
struct Linear {
  Matrix w;
  Matrix b;
};

struct AttentionParams {
  Linear q, k, v, o;
};

struct EncoderLayerParams {
  AttentionParams attn;
  Matrix ln1_gain, ln1_bias;
  Linear ff1, ff2;
  Matrix ln2_gain, ln2_bias;
};

struct BranchParams {
  Linear input;           // embed_dim -> d_model
  AttentionParams cross;  // queries from this branch, keys/values from the other
  std::vector<EncoderLayerParams> layers;
  Linear proj;            // d_model -> proj_dim
};

/// Trainable weights of the dual-encoder ranker. Branch `a` encodes the code
/// change, branch `b` the comment change; weights are not shared.
struct RankerParams {
  BranchParams a, b;

  // Xavier-uniform weights, zero biases, unit layer-norm gains.
  static RankerParams init(const RankerConfig& config);
  // Same shapes, all zeros (gradient accumulators).
  RankerParams zeros_like() const;

  // Visits every tensor with a stable dotted name, e.g. "a.layer0.attn.q.w".
  void visit(const std::function<void(const std::string&, Matrix&)>& fn);
  void visit(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  std::size_t parameter_count() const;
  bool all_finite() const;
};

// One candidate's model input: embedded edit-token matrices (rows beyond the
// *_len prefix are padding and must not influence the result).
struct PairInput {
  Matrix code;  // A, rows x embed_dim
  Eigen::Index code_len = 0;
  Matrix comment;  // B
  Eigen::Index comment_len = 0;
};

PairInput make_pair_input(const FlattenedPair& pair, const EmbeddingProvider& provider);

struct Projections {
  Vector code;     // z_A
  Vector comment;  // z_B
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  std::uint64_t dropout_seed = 0;
};

Projections encode_pair(const PairInput& input, const RankerParams& params, const RankerConfig& config,
                        const ForwardOptions& options = {});

// cosine(z_A, z_B); NumericError if either projection has zero norm.
double score(const PairInput& input, const RankerParams& params, const RankerConfig& config,
             const ForwardOptions& options = {});

double cosine_strict(const Vector& a, const Vector& b);

// -log(exp(s0/l) / sum_i exp(si/l)), computed with a max shift.
double listwise_loss(double positive_score, const std::vector<double>& negative_scores, double lambda);

// group[0] is the positive. Returns the loss and, when grad is non-null, adds
// dLoss/dparam into it.
double group_loss(const std::vector<PairInput>& group, const RankerParams& params, const RankerConfig& config,
                  RankerParams* grad, const ForwardOptions& options = {});

// --- training ----------------------------------------------------------------

struct EncodedGroup {
  std::string id;
  std::vector<PairInput> candidates;  // [0] positive
};

struct CheckpointRecord {
  std::size_t instances = 0;  // groups consumed so far
  std::size_t step = 0;       // optimizer steps so far
  double train_loss = 0.0;    // mean group loss since the previous record
  double val_loss = 0.0;
};

struct TrainResult {
  RankerParams params;  // the record with the lowest validation loss
  std::vector<CheckpointRecord> log;
  std::size_t best = 0;
};

// Adam over mini-batches of config.batch_groups groups; validation every
// config.checkpoint_every groups and at the end. Deterministic given the
// seed. NumericError naming the group and step on a non-finite loss.
TrainResult train_ranker(const std::vector<EncodedGroup>& train, const std::vector<EncodedGroup>& val,
                         const RankerConfig& config);

double mean_group_loss(const std::vector<EncodedGroup>& groups, const RankerParams& params,
                       const RankerConfig& config);

// --- checkpoints -------------------------------------------------------------

struct CheckpointHeader {
  int format_version = 1;
  std::string kind;  // "cuprank" or "ranknet"
  std::string config_json;
  std::string provider_identity;
  std::uint64_t seed = 0;
  std::string manifest_digest;
};

// Layout: magic "CUPCKPT1", u32 header-json length + header JSON, u32 tensor
// count, then per tensor u32 name length + name, u32 rows, u32 cols and
// rows*cols little-endian f64 in row-major order.
std::string serialize_checkpoint(const CheckpointHeader& header,
                                 const std::vector<std::pair<std::string, const Matrix*>>& tensors);

struct LoadedCheckpoint {
  CheckpointHeader header;
  std::vector<std::pair<std::string, Matrix>> tensors;
};
LoadedCheckpoint parse_checkpoint(const std::string& bytes, const std::string& what);

void save_ranker(const std::filesystem::path& path, const RankerParams& params, const RankerConfig& config,
                 const std::string& provider_identity, const std::string& manifest_digest = "");

struct LoadedRanker {
  RankerParams params;
  RankerConfig config;
  CheckpointHeader header;
};

// ConfigError when the checkpoint's provider identity (or, if given, the
// ranker config) differs from the expectation.
LoadedRanker load_ranker(const std::filesystem::path& path, const std::string& expected_provider_identity,
                         const std::optional<RankerConfig>& expected_config = std::nullopt);

// --- inference ---------------------------------------------------------------

struct RankedCandidate {
  CandidateComment candidate;
  double score = 0.0;
};

// Stable sort by descending score; ties keep input order.
std::vector<RankedCandidate> rank_candidates(const CommentUpdateSample& sample,
                                             const std::vector<CandidateComment>& candidates,
                                             const RankerParams& params, const RankerConfig& config,
                                             const EmbeddingProvider& provider);

}  // namespace cup
