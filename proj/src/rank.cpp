#include "cup/rank.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"

#include "binary_io.hpp"
#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/log.hpp"
#include "cup/rng.hpp"

namespace cup {

namespace {

using Index = Eigen::Index;

constexpr double kLayerNormEps = 1e-5;

// --- primitive layers ----------------------------------------------------------

Matrix affine(const Linear& p, const Matrix& x) {
  Matrix y = x * p.w;
  y.rowwise() += p.b.row(0);
  return y;
}

// Accumulates parameter gradients into g (when non-null); returns dL/dx.
Matrix affine_backward(const Linear& p, Linear* g, const Matrix& x, const Matrix& dy) {
  if (g) {
    g->w.noalias() += x.transpose() * dy;
    g->b += dy.colwise().sum();
  }
  return dy * p.w.transpose();
}

void softmax_rows(Matrix& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct AttentionCache {
  Matrix xq, xkv, q, k, v, concat;
  Index kv_len = 0;
  std::vector<Matrix> probs;
};

// Scaled dot-product multi-head attention. Keys/values beyond kv_len are
// padding and are excluded from the softmax entirely.
Matrix attention_forward(const AttentionParams& p, const Matrix& xq, const Matrix& xkv, Index kv_len, int heads,
                         AttentionCache* cache) {
  const Index d = p.q.w.cols();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix q = affine(p.q, xq);
  Matrix k = affine(p.k, xkv);
  Matrix v = affine(p.v, xkv);
  Matrix concat(xq.rows(), d);
  std::vector<Matrix> probs;
  for (int h = 0; h < heads; ++h) {
    Matrix s = (q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).topRows(kv_len).transpose()) * scale;
    softmax_rows(s);
    concat.middleCols(h * dh, dh).noalias() = s * v.middleCols(h * dh, dh).topRows(kv_len);
    if (cache) probs.push_back(std::move(s));
  }
  Matrix out = affine(p.o, concat);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->kv_len = kv_len;
    cache->probs = std::move(probs);
  }
  return out;
}

struct AttentionGrads {
  Matrix dxq, dxkv;
};

AttentionGrads attention_backward(const AttentionParams& p, AttentionParams* g, const AttentionCache& c,
                                  const Matrix& dy, int heads) {
  const Index d = p.q.w.cols();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Matrix dconcat = affine_backward(p.o, g ? &g->o : nullptr, c.concat, dy);
  Matrix dq = Matrix::Zero(c.q.rows(), d);
  Matrix dk = Matrix::Zero(c.k.rows(), d);
  Matrix dv = Matrix::Zero(c.v.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& prob = c.probs[static_cast<std::size_t>(h)];
    const auto dout = dconcat.middleCols(h * dh, dh);
    const auto vh = c.v.middleCols(h * dh, dh).topRows(c.kv_len);
    const Matrix dprob = dout * vh.transpose();
    dv.middleCols(h * dh, dh).topRows(c.kv_len).noalias() = prob.transpose() * dout;
    const Eigen::VectorXd inner = (dprob.array() * prob.array()).rowwise().sum();
    Matrix ds = prob.array() * (dprob.colwise() - inner).array();
    ds *= scale;
    dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh).topRows(c.kv_len);
    dk.middleCols(h * dh, dh).topRows(c.kv_len).noalias() = ds.transpose() * c.q.middleCols(h * dh, dh);
  }
  AttentionGrads out;
  out.dxq = affine_backward(p.q, g ? &g->q : nullptr, c.xq, dq);
  out.dxkv = affine_backward(p.k, g ? &g->k : nullptr, c.xkv, dk);
  out.dxkv += affine_backward(p.v, g ? &g->v : nullptr, c.xkv, dv);
  return out;
}

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd inv_std;
};

Matrix layer_norm_forward(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache* cache) {
  const double n = static_cast<double>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / n;
  const Eigen::VectorXd inv_std = (var.array() + kLayerNormEps).rsqrt();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& gain, Matrix* g_gain, Matrix* g_bias, const LayerNormCache& c,
                           const Matrix& dy) {
  if (g_gain) *g_gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  if (g_bias) *g_bias += dy.colwise().sum();
  const double n = static_cast<double>(dy.cols());
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const Eigen::VectorXd sum_d = dxhat.rowwise().sum();
  const Eigen::VectorXd sum_dx = (dxhat.array() * c.xhat.array()).rowwise().sum();
  Matrix dx = (n * dxhat.array()).colwise() - sum_d.array();
  dx.array() -= c.xhat.array().colwise() * sum_dx.array();
  dx.array().colwise() *= c.inv_std.array() / n;
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// Inverted dropout mask; empty when inactive.
Matrix dropout_mask(Index rows, Index cols, double p, SplitMix64* rng) {
  if (!rng || p <= 0.0) return {};
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = rng->uniform() < p ? 0.0 : keep;
  return m;
}

Matrix apply_mask(const Matrix& x, const Matrix& mask) {
  if (mask.size() == 0) return x;
  return x.cwiseProduct(mask);
}

// --- encoder layer (post-norm) -------------------------------------------------

struct EncoderCache {
  AttentionCache attn;
  Matrix drop1, drop_ff, drop2;
  LayerNormCache ln1, ln2;
  Matrix h1, u, act_dropped;
};

Matrix encoder_forward(const EncoderLayerParams& p, const Matrix& x, Index len, const RankerConfig& cfg,
                       SplitMix64* rng, EncoderCache* c) {
  const Matrix sa = attention_forward(p.attn, x, x, len, cfg.attention_heads, c ? &c->attn : nullptr);
  Matrix drop1 = dropout_mask(sa.rows(), sa.cols(), cfg.dropout, rng);
  Matrix h1 = layer_norm_forward(x + apply_mask(sa, drop1), p.ln1_gain, p.ln1_bias, c ? &c->ln1 : nullptr);
  Matrix u = affine(p.ff1, h1);
  Matrix act = u.unaryExpr([](double v) { return gelu(v); });
  Matrix drop_ff = dropout_mask(act.rows(), act.cols(), cfg.dropout, rng);
  Matrix act_dropped = apply_mask(act, drop_ff);
  const Matrix f = affine(p.ff2, act_dropped);
  Matrix drop2 = dropout_mask(f.rows(), f.cols(), cfg.dropout, rng);
  Matrix out = layer_norm_forward(h1 + apply_mask(f, drop2), p.ln2_gain, p.ln2_bias, c ? &c->ln2 : nullptr);
  if (c) {
    c->drop1 = std::move(drop1);
    c->drop_ff = std::move(drop_ff);
    c->drop2 = std::move(drop2);
    c->h1 = std::move(h1);
    c->u = std::move(u);
    c->act_dropped = std::move(act_dropped);
  }
  return out;
}

Matrix encoder_backward(const EncoderLayerParams& p, EncoderLayerParams& g, const EncoderCache& c,
                        const Matrix& dout, const RankerConfig& cfg) {
  const Matrix dr2 = layer_norm_backward(p.ln2_gain, &g.ln2_gain, &g.ln2_bias, c.ln2, dout);
  Matrix dh1 = dr2;
  const Matrix dact_dropped = affine_backward(p.ff2, &g.ff2, c.act_dropped, apply_mask(dr2, c.drop2));
  const Matrix dact = apply_mask(dact_dropped, c.drop_ff);
  const Matrix du = dact.cwiseProduct(c.u.unaryExpr([](double v) { return gelu_grad(v); }));
  dh1 += affine_backward(p.ff1, &g.ff1, c.h1, du);
  const Matrix dr1 = layer_norm_backward(p.ln1_gain, &g.ln1_gain, &g.ln1_bias, c.ln1, dh1);
  Matrix dx = dr1;
  const auto ag = attention_backward(p.attn, &g.attn, c.attn, apply_mask(dr1, c.drop1), cfg.attention_heads);
  dx += ag.dxq;
  dx += ag.dxkv;
  return dx;
}

// --- full pair forward/backward -------------------------------------------------

struct BranchCache {
  Matrix input, projected;
  AttentionCache cross;
  std::vector<EncoderCache> layers;
  Matrix pooled;  // 1 x d_model
  std::vector<Index> argmax;
};

struct PairCache {
  BranchCache a, b;
  Vector za, zb;
};

void check_input(const PairInput& in, const RankerConfig& cfg) {
  if (in.code.cols() != cfg.embed_dim || in.comment.cols() != cfg.embed_dim) {
    throw ContractError("pair input width " + std::to_string(in.code.cols()) + "/" +
                        std::to_string(in.comment.cols()) + " does not match embed_dim " +
                        std::to_string(cfg.embed_dim));
  }
  if (in.code_len < 1 || in.code_len > in.code.rows() || in.comment_len < 1 || in.comment_len > in.comment.rows()) {
    throw ContractError("pair input lengths must be within [1, rows]");
  }
}

Matrix max_pool(const Matrix& h, Index len, std::vector<Index>* argmax) {
  Matrix pooled(1, h.cols());
  if (argmax) argmax->assign(static_cast<std::size_t>(h.cols()), 0);
  for (Index col = 0; col < h.cols(); ++col) {
    Index best = 0;
    for (Index r = 1; r < len; ++r)
      if (h(r, col) > h(best, col)) best = r;
    pooled(0, col) = h(best, col);
    if (argmax) (*argmax)[static_cast<std::size_t>(col)] = best;
  }
  return pooled;
}

Projections forward_pair(const PairInput& in, const RankerParams& p, const RankerConfig& cfg,
                         const ForwardOptions& opt, PairCache* cache) {
  check_input(in, cfg);
  SplitMix64 rng_storage(opt.dropout_seed);
  SplitMix64* rng = opt.training ? &rng_storage : nullptr;

  const Matrix ap = affine(p.a.input, in.code);
  const Matrix bp = affine(p.b.input, in.comment);
  const Matrix ca = attention_forward(p.a.cross, ap, bp, in.comment_len, cfg.attention_heads,
                                      cache ? &cache->a.cross : nullptr);
  const Matrix cb = attention_forward(p.b.cross, bp, ap, in.code_len, cfg.attention_heads,
                                      cache ? &cache->b.cross : nullptr);

  auto run_branch = [&](const BranchParams& bp_, Matrix h, Index len, BranchCache* bc) {
    if (bc) bc->layers.resize(bp_.layers.size());
    for (std::size_t l = 0; l < bp_.layers.size(); ++l)
      h = encoder_forward(bp_.layers[l], h, len, cfg, rng, bc ? &bc->layers[l] : nullptr);
    Matrix pooled = max_pool(h, len, bc ? &bc->argmax : nullptr);
    Vector z = affine(bp_.proj, pooled).row(0).transpose();
    if (bc) bc->pooled = std::move(pooled);
    return z;
  };

  Projections out;
  out.code = run_branch(p.a, ap + ca, in.code_len, cache ? &cache->a : nullptr);
  out.comment = run_branch(p.b, bp + cb, in.comment_len, cache ? &cache->b : nullptr);
  if (cache) {
    cache->a.input = in.code;
    cache->b.input = in.comment;
    cache->za = out.code;
    cache->zb = out.comment;
  }
  return out;
}

void backward_pair(const RankerParams& p, RankerParams& g, const PairCache& c, const RankerConfig& cfg,
                   const Vector& dza, const Vector& dzb) {
  auto branch_back = [&](const BranchParams& bp, BranchParams& bg, const BranchCache& bc, const Vector& dz,
                         Index rows) {
    const Matrix dpooled = affine_backward(bp.proj, &bg.proj, bc.pooled, dz.transpose());
    Matrix dh = Matrix::Zero(rows, dpooled.cols());
    for (Index col = 0; col < dpooled.cols(); ++col) dh(bc.argmax[static_cast<std::size_t>(col)], col) = dpooled(0, col);
    for (std::size_t l = bp.layers.size(); l-- > 0;) dh = encoder_backward(bp.layers[l], bg.layers[l], bc.layers[l], dh, cfg);
    return dh;  // d(tilde X)
  };
  const Matrix dat = branch_back(p.a, g.a, c.a, dza, c.a.input.rows());
  const Matrix dbt = branch_back(p.b, g.b, c.b, dzb, c.b.input.rows());

  Matrix dap = dat;
  Matrix dbp = dbt;
  const auto ga = attention_backward(p.a.cross, &g.a.cross, c.a.cross, dat, cfg.attention_heads);
  dap += ga.dxq;
  dbp += ga.dxkv;
  const auto gb = attention_backward(p.b.cross, &g.b.cross, c.b.cross, dbt, cfg.attention_heads);
  dbp += gb.dxq;
  dap += gb.dxkv;
  // Token embeddings are frozen; the input gradient is dropped.
  affine_backward(p.a.input, &g.a.input, c.a.input, dap);
  affine_backward(p.b.input, &g.b.input, c.b.input, dbp);
}

// --- parameter plumbing ----------------------------------------------------------

template <typename Params, typename Fn>
void visit_attention(Params& a, const std::string& prefix, Fn& fn) {
  for (auto [name, lin] : {std::pair{"q", &a.q}, std::pair{"k", &a.k}, std::pair{"v", &a.v}, std::pair{"o", &a.o}}) {
    fn(prefix + name + ".w", lin->w);
    fn(prefix + name + ".b", lin->b);
  }
}

template <typename Branch, typename Fn>
void visit_branch(Branch& br, const std::string& prefix, Fn& fn) {
  fn(prefix + "input.w", br.input.w);
  fn(prefix + "input.b", br.input.b);
  visit_attention(br.cross, prefix + "cross.", fn);
  for (std::size_t l = 0; l < br.layers.size(); ++l) {
    auto& layer = br.layers[l];
    const std::string lp = prefix + "layer" + std::to_string(l) + ".";
    visit_attention(layer.attn, lp + "attn.", fn);
    fn(lp + "ln1.gain", layer.ln1_gain);
    fn(lp + "ln1.bias", layer.ln1_bias);
    fn(lp + "ff1.w", layer.ff1.w);
    fn(lp + "ff1.b", layer.ff1.b);
    fn(lp + "ff2.w", layer.ff2.w);
    fn(lp + "ff2.b", layer.ff2.b);
    fn(lp + "ln2.gain", layer.ln2_gain);
    fn(lp + "ln2.bias", layer.ln2_bias);
  }
  fn(prefix + "proj.w", br.proj.w);
  fn(prefix + "proj.b", br.proj.b);
}

std::vector<Matrix*> tensor_list(RankerParams& p) {
  std::vector<Matrix*> out;
  p.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

Linear make_linear(Index in, Index out) { return {Matrix::Zero(in, out), Matrix::Zero(1, out)}; }

AttentionParams make_attention(Index d) {
  return {make_linear(d, d), make_linear(d, d), make_linear(d, d), make_linear(d, d)};
}

BranchParams make_branch(const RankerConfig& cfg) {
  BranchParams b;
  b.input = make_linear(cfg.embed_dim, cfg.d_model);
  b.cross = make_attention(cfg.d_model);
  for (int l = 0; l < cfg.encoder_layers; ++l) {
    EncoderLayerParams layer;
    layer.attn = make_attention(cfg.d_model);
    layer.ln1_gain = Matrix::Ones(1, cfg.d_model);
    layer.ln1_bias = Matrix::Zero(1, cfg.d_model);
    layer.ff1 = make_linear(cfg.d_model, cfg.ffn_dim);
    layer.ff2 = make_linear(cfg.ffn_dim, cfg.d_model);
    layer.ln2_gain = Matrix::Ones(1, cfg.d_model);
    layer.ln2_bias = Matrix::Zero(1, cfg.d_model);
    b.layers.push_back(std::move(layer));
  }
  b.proj = make_linear(cfg.d_model, cfg.proj_dim);
  return b;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

// --- config ---------------------------------------------------------------------

void RankerConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("ranker config: " + what);
  };
  require(embed_dim > 0 && d_model > 0 && ffn_dim > 0 && proj_dim > 0, "dimensions must be positive");
  require(attention_heads > 0 && d_model % attention_heads == 0, "d_model must be divisible by attention_heads");
  require(encoder_layers == 2, "encoder_layers must be 2");
  require(lambda > 0.0, "lambda must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(batch_groups > 0 && checkpoint_every > 0 && epochs > 0, "batch_groups, checkpoint_every, epochs must be positive");
  require(max_seq_len > 0, "max_seq_len must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
}

std::string ranker_config_to_json(const RankerConfig& c) {
  nlohmann::ordered_json j;
  j["embed_dim"] = c.embed_dim;
  j["d_model"] = c.d_model;
  j["attention_heads"] = c.attention_heads;
  j["encoder_layers"] = c.encoder_layers;
  j["ffn_dim"] = c.ffn_dim;
  j["proj_dim"] = c.proj_dim;
  j["lambda"] = c.lambda;
  j["learning_rate"] = c.learning_rate;
  j["batch_groups"] = c.batch_groups;
  j["max_seq_len"] = c.max_seq_len;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["epochs"] = c.epochs;
  j["dropout"] = c.dropout;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  return j.dump();
}

RankerConfig ranker_config_from_json(const std::string& text) {
  RankerConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.d_model = j.value("d_model", c.d_model);
    c.attention_heads = j.value("attention_heads", c.attention_heads);
    c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.proj_dim = j.value("proj_dim", c.proj_dim);
    c.lambda = j.value("lambda", c.lambda);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_groups = j.value("batch_groups", c.batch_groups);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.epochs = j.value("epochs", c.epochs);
    c.dropout = j.value("dropout", c.dropout);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ranker config: ") + e.what());
  }
  return c;
}

// --- params ---------------------------------------------------------------------

RankerParams RankerParams::init(const RankerConfig& config) {
  config.validate();
  RankerParams p{make_branch(config), make_branch(config)};
  SplitMix64 rng(config.seed ^ 0x5eedc0de5eedc0deull);
  p.visit([&](const std::string& name, Matrix& m) {
    if (!ends_with(name, ".w")) return;
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Index r = 0; r < m.rows(); ++r)
      for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
  });
  return p;
}

RankerParams RankerParams::zeros_like() const {
  RankerParams z = *this;
  z.visit([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

void RankerParams::visit(const std::function<void(const std::string&, Matrix&)>& fn) {
  visit_branch(a, "a.", fn);
  visit_branch(b, "b.", fn);
}

void RankerParams::visit(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  auto& self = const_cast<RankerParams&>(*this);
  std::function<void(const std::string&, Matrix&)> adapter = [&](const std::string& n, Matrix& m) { fn(n, m); };
  self.visit(adapter);
}

std::size_t RankerParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool RankerParams::all_finite() const {
  bool ok = true;
  visit([&](const std::string&, const Matrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

// --- forward API ------------------------------------------------------------------

PairInput make_pair_input(const FlattenedPair& pair, const EmbeddingProvider& provider) {
  PairInput in;
  in.code = embed_edit_tokens(pair.code_change, provider);
  in.code_len = in.code.rows();
  in.comment = embed_edit_tokens(pair.comment_change, provider);
  in.comment_len = in.comment.rows();
  return in;
}

Projections encode_pair(const PairInput& input, const RankerParams& params, const RankerConfig& config,
                        const ForwardOptions& options) {
  return forward_pair(input, params, config, options, nullptr);
}

double cosine_strict(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw NumericError("zero-norm projection vector; cosine score undefined");
  return a.dot(b) / (na * nb);
}

double score(const PairInput& input, const RankerParams& params, const RankerConfig& config,
             const ForwardOptions& options) {
  const auto z = encode_pair(input, params, config, options);
  return cosine_strict(z.code, z.comment);
}

double listwise_loss(double positive_score, const std::vector<double>& negative_scores, double lambda) {
  if (negative_scores.empty()) throw ContractError("listwise loss needs at least one negative");
  if (!(lambda > 0.0)) throw ContractError("lambda must be positive");
  double mx = positive_score / lambda;
  for (double s : negative_scores) mx = std::max(mx, s / lambda);
  double sum = std::exp(positive_score / lambda - mx);
  for (double s : negative_scores) sum += std::exp(s / lambda - mx);
  return -(positive_score / lambda - mx) + std::log(sum);
}

double group_loss(const std::vector<PairInput>& group, const RankerParams& params, const RankerConfig& config,
                  RankerParams* grad, const ForwardOptions& options) {
  if (group.size() < 2) throw ContractError("a group needs one positive and at least one negative");
  std::vector<PairCache> caches(grad ? group.size() : 0);
  std::vector<double> sims(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) {
    ForwardOptions opt = options;
    opt.dropout_seed = options.dropout_seed * 0x9E3779B97F4A7C15ull + i;
    const auto z = forward_pair(group[i], params, config, opt, grad ? &caches[i] : nullptr);
    sims[i] = cosine_strict(z.code, z.comment);
  }
  const std::vector<double> negatives(sims.begin() + 1, sims.end());
  const double loss = listwise_loss(sims[0], negatives, config.lambda);
  if (!grad) return loss;

  // dL/dsim_i = (softmax_i - [i == 0]) / lambda
  double mx = -std::numeric_limits<double>::infinity();
  for (double s : sims) mx = std::max(mx, s / config.lambda);
  std::vector<double> soft(sims.size());
  double total = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) total += soft[i] = std::exp(sims[i] / config.lambda - mx);
  for (std::size_t i = 0; i < group.size(); ++i) {
    const double dsim = (soft[i] / total - (i == 0 ? 1.0 : 0.0)) / config.lambda;
    const Vector& za = caches[i].za;
    const Vector& zb = caches[i].zb;
    const double na = za.norm(), nb = zb.norm();
    const double s = sims[i];
    const Vector dza = dsim * (zb / (na * nb) - s * za / (na * na));
    const Vector dzb = dsim * (za / (na * nb) - s * zb / (nb * nb));
    backward_pair(params, *grad, caches[i], config, dza, dzb);
  }
  return loss;
}

// --- training ---------------------------------------------------------------------

double mean_group_loss(const std::vector<EncodedGroup>& groups, const RankerParams& params,
                       const RankerConfig& config) {
  if (groups.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& g : groups) sum += group_loss(g.candidates, params, config, nullptr);
  return sum / static_cast<double>(groups.size());
}

TrainResult train_ranker(const std::vector<EncodedGroup>& train, const std::vector<EncodedGroup>& val,
                         const RankerConfig& config) {
  config.validate();
  if (train.empty()) throw ContractError("training needs at least one group");
  if (val.empty()) logger()->warn("no validation groups; checkpoints are selected by training loss");

  RankerParams params = RankerParams::init(config);
  RankerParams first = params.zeros_like();
  RankerParams second = params.zeros_like();
  const auto p_list = tensor_list(params);
  const auto m_list = tensor_list(first);
  const auto v_list = tensor_list(second);

  TrainResult result;
  result.params = params;
  double best_val = std::numeric_limits<double>::infinity();

  SplitMix64 order_rng(config.seed ^ 0x0dde5eedull);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t instances = 0, step = 0, checkpoints_done = 0;
  double pending_loss = 0.0;
  std::size_t pending_count = 0;

  auto checkpoint = [&] {
    CheckpointRecord rec;
    rec.instances = instances;
    rec.step = step;
    rec.train_loss = pending_count ? pending_loss / static_cast<double>(pending_count) : 0.0;
    rec.val_loss = val.empty() ? rec.train_loss : mean_group_loss(val, params, config);
    pending_loss = 0.0;
    pending_count = 0;
    logger()->info("checkpoint at {} groups (step {}): train {:.6f} val {:.6f}", rec.instances, rec.step,
                   rec.train_loss, rec.val_loss);
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      result.params = params;
      result.best = result.log.size();
    }
    result.log.push_back(rec);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_groups)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_groups));
      RankerParams grad = params.zeros_like();
      for (std::size_t k = start; k < end; ++k) {
        const auto& group = train[order[k]];
        ForwardOptions opt{true, config.seed ^ (static_cast<std::uint64_t>(step) << 20) ^ k};
        const double loss = group_loss(group.candidates, params, config, &grad, opt);
        if (!std::isfinite(loss)) {
          throw NumericError("non-finite loss on group " + group.id + " at step " + std::to_string(step));
        }
        pending_loss += loss;
        ++pending_count;
        ++instances;
      }
      ++step;
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      const auto g_list = tensor_list(grad);
      const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < p_list.size(); ++t) {
        const Matrix g = *g_list[t] * inv_batch;
        *m_list[t] = config.adam_beta1 * *m_list[t] + (1.0 - config.adam_beta1) * g;
        *v_list[t] = config.adam_beta2 * *v_list[t] + (1.0 - config.adam_beta2) * g.cwiseProduct(g);
        const Matrix mhat = *m_list[t] / bc1;
        const Matrix vhat = *v_list[t] / bc2;
        p_list[t]->array() -= config.learning_rate * mhat.array() / (vhat.array().sqrt() + config.adam_epsilon);
      }
      if (!params.all_finite()) throw NumericError("non-finite parameters after step " + std::to_string(step));
      const std::size_t due = instances / static_cast<std::size_t>(config.checkpoint_every);
      if (due > checkpoints_done) {
        checkpoints_done = due;
        checkpoint();
      }
    }
  }
  if (result.log.empty() || result.log.back().instances != instances) checkpoint();
  return result;
}

// --- checkpoints ------------------------------------------------------------------

namespace {
constexpr char kCheckpointMagic[8] = {'C', 'U', 'P', 'C', 'K', 'P', 'T', '1'};
}

std::string serialize_checkpoint(const CheckpointHeader& header,
                                 const std::vector<std::pair<std::string, const Matrix*>>& tensors) {
  nlohmann::ordered_json h;
  h["format_version"] = header.format_version;
  h["kind"] = header.kind;
  h["config"] = nlohmann::ordered_json::parse(header.config_json);
  h["provider"] = header.provider_identity;
  h["seed"] = header.seed;
  h["manifest_digest"] = header.manifest_digest;
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  binio::put_str(out, h.dump());
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    binio::put_str(out, name);
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m->rows()));
    binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(m->cols()));
    for (Index r = 0; r < m->rows(); ++r)
      for (Index c = 0; c < m->cols(); ++c) binio::put<double>(out, (*m)(r, c));
  }
  return out;
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes, const std::string& what) {
  binio::Reader r(bytes, what);
  if (r.str(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    throw ParseError(what + ": not a checkpoint file");
  }
  LoadedCheckpoint out;
  try {
    const auto h = nlohmann::json::parse(r.get_str());
    out.header.format_version = h.at("format_version").get<int>();
    out.header.kind = h.at("kind").get<std::string>();
    out.header.config_json = h.at("config").dump();
    out.header.provider_identity = h.at("provider").get<std::string>();
    out.header.seed = h.at("seed").get<std::uint64_t>();
    out.header.manifest_digest = h.value("manifest_digest", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(what + ": bad checkpoint header: " + e.what());
  }
  if (out.header.format_version != 1) {
    throw ParseError(what + ": unsupported checkpoint format " + std::to_string(out.header.format_version));
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.get_str();
    const auto rows = r.get<std::uint32_t>();
    const auto cols = r.get<std::uint32_t>();
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = r.get<double>();
    out.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!r.done()) throw ParseError(what + ": trailing bytes after tensors");
  return out;
}

void save_ranker(const std::filesystem::path& path, const RankerParams& params, const RankerConfig& config,
                 const std::string& provider_identity, const std::string& manifest_digest) {
  CheckpointHeader header;
  header.kind = "cuprank";
  header.config_json = ranker_config_to_json(config);
  header.provider_identity = provider_identity;
  header.seed = config.seed;
  header.manifest_digest = manifest_digest;
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  params.visit([&](const std::string& name, const Matrix& m) { tensors.emplace_back(name, &m); });
  write_file(path, serialize_checkpoint(header, tensors));
}

LoadedRanker load_ranker(const std::filesystem::path& path, const std::string& expected_provider_identity,
                         const std::optional<RankerConfig>& expected_config) {
  auto ckpt = parse_checkpoint(read_file(path), path.string());
  if (ckpt.header.kind != "cuprank") throw ConfigError(path.string() + " holds a '" + ckpt.header.kind + "' model");
  if (ckpt.header.provider_identity != expected_provider_identity) {
    throw ConfigError("checkpoint " + path.string() + " was trained with provider " + ckpt.header.provider_identity +
                      ", current provider is " + expected_provider_identity);
  }
  LoadedRanker out;
  out.config = ranker_config_from_json(ckpt.header.config_json);
  if (expected_config && !(*expected_config == out.config)) {
    throw ConfigError("checkpoint " + path.string() + " config differs from the requested ranker config");
  }
  out.params = RankerParams::init(out.config);
  std::size_t idx = 0;
  out.params.visit([&](const std::string& name, Matrix& m) {
    if (idx >= ckpt.tensors.size() || ckpt.tensors[idx].first != name ||
        ckpt.tensors[idx].second.rows() != m.rows() || ckpt.tensors[idx].second.cols() != m.cols()) {
      throw ConfigError("checkpoint " + path.string() + ": tensor " + name + " missing or misshapen");
    }
    m = std::move(ckpt.tensors[idx++].second);
  });
  if (idx != ckpt.tensors.size()) throw ConfigError("checkpoint " + path.string() + ": unexpected extra tensors");
  out.header = std::move(ckpt.header);
  return out;
}

// --- inference ----------------------------------------------------------------------

std::vector<RankedCandidate> rank_candidates(const CommentUpdateSample& sample,
                                             const std::vector<CandidateComment>& candidates,
                                             const RankerParams& params, const RankerConfig& config,
                                             const EmbeddingProvider& provider) {
  if (candidates.empty()) throw ContractError("rank_candidates needs at least one candidate");
  FlattenOptions fopt;
  fopt.max_len = static_cast<std::size_t>(config.max_seq_len);
  std::vector<RankedCandidate> ranked;
  for (const auto& c : candidates) {
    const auto input = make_pair_input(flatten_sample(sample, c.text, provider, fopt), provider);
    ranked.push_back({c, score(input, params, config)});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& x, const RankedCandidate& y) { return x.score > y.score; });
  return ranked;
}

}  // namespace cup
