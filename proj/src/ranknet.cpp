#include "cup/ranknet.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/log.hpp"
#include "cup/rng.hpp"

namespace cup {

namespace {

using Index = Eigen::Index;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Forward {
  Matrix hidden;                 // tanh activations, one row per token
  Eigen::RowVectorXd pooled;     // column-wise max of hidden
  std::vector<Index> argmax;     // winning row per hidden unit
  double logit = 0.0;
};

// fc1 + tanh per token, max-pool over tokens, then fc2 to a single logit.
Forward forward(const Matrix& x, const RankNetParams& p) {
  if (x.rows() == 0) throw ContractError("ranknet input has no rows");
  if (x.cols() != p.fc1.w.rows()) throw ContractError("ranknet input width does not match embed_dim");
  Forward f;
  Matrix pre = x * p.fc1.w;
  pre.rowwise() += p.fc1.b.row(0);
  f.hidden = pre.array().tanh();
  f.pooled.resize(f.hidden.cols());
  f.argmax.resize(static_cast<std::size_t>(f.hidden.cols()));
  for (Index j = 0; j < f.hidden.cols(); ++j) f.pooled(j) = f.hidden.col(j).maxCoeff(&f.argmax[static_cast<std::size_t>(j)]);
  f.logit = (f.pooled * p.fc2.w)(0, 0) + p.fc2.b(0, 0);
  return f;
}

void backward(const Matrix& x, const RankNetParams& p, const Forward& f, double dlogit, RankNetParams& g) {
  g.fc2.w += dlogit * f.pooled.transpose();
  g.fc2.b(0, 0) += dlogit;
  for (Index j = 0; j < f.hidden.cols(); ++j) {
    const Index r = f.argmax[static_cast<std::size_t>(j)];
    const double h = f.hidden(r, j);
    const double dpre = dlogit * p.fc2.w(j, 0) * (1.0 - h * h);
    g.fc1.w.col(j) += dpre * x.row(r).transpose();
    g.fc1.b(0, j) += dpre;
  }
}

RankNetParams zeros_like(const RankNetParams& p) {
  return {{Matrix::Zero(p.fc1.w.rows(), p.fc1.w.cols()), Matrix::Zero(1, p.fc1.b.cols())},
          {Matrix::Zero(p.fc2.w.rows(), p.fc2.w.cols()), Matrix::Zero(1, 1)}};
}

std::vector<Matrix*> tensors(RankNetParams& p) { return {&p.fc1.w, &p.fc1.b, &p.fc2.w, &p.fc2.b}; }

constexpr const char* kTensorNames[] = {"fc1.w", "fc1.b", "fc2.w", "fc2.b"};

}  // namespace

void RankNetConfig::validate() const {
  if (embed_dim <= 0 || hidden_dim <= 0) throw ConfigError("ranknet config: dimensions must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("ranknet config: learning_rate must be positive");
  if (batch_groups <= 0 || epochs <= 0 || max_seq_len <= 0)
    throw ConfigError("ranknet config: batch_groups, epochs, max_seq_len must be positive");
}

std::string ranknet_config_to_json(const RankNetConfig& c) {
  nlohmann::ordered_json j;
  j["embed_dim"] = c.embed_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["learning_rate"] = c.learning_rate;
  j["batch_groups"] = c.batch_groups;
  j["epochs"] = c.epochs;
  j["max_seq_len"] = c.max_seq_len;
  j["seed"] = c.seed;
  return j.dump();
}

RankNetConfig ranknet_config_from_json(const std::string& text) {
  RankNetConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_groups = j.value("batch_groups", c.batch_groups);
    c.epochs = j.value("epochs", c.epochs);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ranknet config: ") + e.what());
  }
  return c;
}

RankNetParams RankNetParams::init(const RankNetConfig& config) {
  config.validate();
  RankNetParams p{{Matrix(config.embed_dim, config.hidden_dim), Matrix::Zero(1, config.hidden_dim)},
                  {Matrix(config.hidden_dim, 1), Matrix::Zero(1, 1)}};
  SplitMix64 rng(config.seed ^ 0x7a4b1e7ull);
  for (Matrix* w : {&p.fc1.w, &p.fc2.w}) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w->rows() + w->cols()));
    for (Index r = 0; r < w->rows(); ++r)
      for (Index c = 0; c < w->cols(); ++c) (*w)(r, c) = rng.uniform(-limit, limit);
  }
  return p;
}

Matrix ranknet_input(const CommentUpdateSample& sample, const std::string& candidate,
                     const EmbeddingProvider& provider, std::size_t max_seq_len) {
  std::vector<Matrix> parts;
  Index rows = 0;
  for (const std::string* text : {&sample.old_code, &sample.new_code, &sample.old_comment, &candidate}) {
    TokenSequence seq = provider.tokenize(*text);
    if (seq.tokens.size() > max_seq_len) seq.tokens.resize(max_seq_len);
    parts.push_back(provider.embed_tokens(seq));
    rows += parts.back().rows();
  }
  Matrix out(rows, provider.dimension());
  Index at = 0;
  for (const auto& m : parts) {
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

double ranknet_logit(const Matrix& input, const RankNetParams& params) { return forward(input, params).logit; }

double ranknet_score(const Matrix& input, const RankNetParams& params) {
  return sigmoid(ranknet_logit(input, params));
}

double ranknet_group_loss(const std::vector<Matrix>& group, const RankNetParams& params, RankNetParams* grad) {
  if (group.size() < 2) throw ContractError("ranknet group needs a positive and at least one negative");
  std::vector<Forward> f;
  for (const auto& x : group) f.push_back(forward(x, params));
  double loss = 0.0;
  double dpos = 0.0;
  for (std::size_t i = 1; i < group.size(); ++i) {
    const double d = f[0].logit - f[i].logit;
    loss += softplus(-d);
    if (grad) {
      const double dd = -sigmoid(-d);
      dpos += dd;
      backward(group[i], params, f[i], -dd, *grad);
    }
  }
  if (grad) backward(group[0], params, f[0], dpos, *grad);
  return loss;
}

RankNetParams ranknet_train(const std::vector<std::vector<Matrix>>& groups, const RankNetConfig& config) {
  config.validate();
  if (groups.empty()) throw ContractError("ranknet training needs at least one group");
  RankNetParams params = RankNetParams::init(config);
  RankNetParams m = zeros_like(params);
  RankNetParams v = zeros_like(params);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  SplitMix64 rng(config.seed ^ 0x0dde5eedull);
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_groups)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_groups));
      RankNetParams grad = zeros_like(params);
      for (std::size_t k = start; k < end; ++k) {
        const double loss = ranknet_group_loss(groups[order[k]], params, &grad);
        if (!std::isfinite(loss)) throw NumericError("ranknet: non-finite loss at step " + std::to_string(step));
        epoch_loss += loss;
      }
      ++step;
      const double inv = 1.0 / static_cast<double>(end - start);
      const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto pt = tensors(params), mt = tensors(m), vt = tensors(v), gt = tensors(grad);
      for (std::size_t t = 0; t < pt.size(); ++t) {
        const Matrix g = *gt[t] * inv;
        *mt[t] = kBeta1 * *mt[t] + (1.0 - kBeta1) * g;
        *vt[t] = kBeta2 * *vt[t] + (1.0 - kBeta2) * g.cwiseProduct(g);
        pt[t]->array() -=
            config.learning_rate * (*mt[t] / bc1).array() / ((*vt[t] / bc2).array().sqrt() + kEps);
      }
    }
    logger()->info("ranknet epoch {}: mean pair loss {:.6f}", epoch, epoch_loss / static_cast<double>(groups.size()));
  }
  return params;
}

void save_ranknet(const std::filesystem::path& path, const RankNetParams& params, const RankNetConfig& config,
                  const std::string& provider_identity, const std::string& manifest_digest) {
  CheckpointHeader header;
  header.kind = "ranknet";
  header.config_json = ranknet_config_to_json(config);
  header.provider_identity = provider_identity;
  header.seed = config.seed;
  header.manifest_digest = manifest_digest;
  auto& mut = const_cast<RankNetParams&>(params);
  std::vector<std::pair<std::string, const Matrix*>> named;
  const auto list = tensors(mut);
  for (std::size_t i = 0; i < list.size(); ++i) named.emplace_back(kTensorNames[i], list[i]);
  write_file(path, serialize_checkpoint(header, named));
}

LoadedRankNet load_ranknet(const std::filesystem::path& path, const std::string& expected_provider_identity) {
  auto ckpt = parse_checkpoint(read_file(path), path.string());
  if (ckpt.header.kind != "ranknet") throw ConfigError(path.string() + " holds a '" + ckpt.header.kind + "' model");
  if (ckpt.header.provider_identity != expected_provider_identity) {
    throw ConfigError("checkpoint " + path.string() + " was trained with provider " + ckpt.header.provider_identity +
                      ", current provider is " + expected_provider_identity);
  }
  LoadedRankNet out;
  out.config = ranknet_config_from_json(ckpt.header.config_json);
  out.params = RankNetParams::init(out.config);
  const auto list = tensors(out.params);
  if (ckpt.tensors.size() != list.size()) throw ConfigError("checkpoint " + path.string() + ": wrong tensor count");
  for (std::size_t i = 0; i < list.size(); ++i) {
    auto& [name, m] = ckpt.tensors[i];
    if (name != kTensorNames[i] || m.rows() != list[i]->rows() || m.cols() != list[i]->cols())
      throw ConfigError("checkpoint " + path.string() + ": tensor " + kTensorNames[i] + " missing or misshapen");
    *list[i] = std::move(m);
  }
  return out;
}

}  // namespace cup
