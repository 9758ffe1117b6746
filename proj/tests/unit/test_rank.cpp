#include <cmath>

#include "doctest.h"

#include "fixtures.hpp"

#include "cup/augment.hpp"
#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/rank.hpp"
#include "cup/rng.hpp"

using namespace cup;

namespace {

RankerConfig tiny() {
  RankerConfig c;
  c.embed_dim = 6;
  c.d_model = 8;
  c.attention_heads = 2;
  c.ffn_dim = 10;
  c.proj_dim = 4;
  c.max_seq_len = 16;
  c.batch_groups = 2;
  c.learning_rate = 1e-2;
  c.seed = 5;
  return c;
}

Matrix random_matrix(SplitMix64& rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

PairInput random_pair(SplitMix64& rng, int embed_dim, Eigen::Index code_len, Eigen::Index comment_len) {
  PairInput p;
  p.code_len = code_len;
  p.comment_len = comment_len;
  p.code = random_matrix(rng, code_len, embed_dim);
  p.comment = random_matrix(rng, comment_len, embed_dim);
  return p;
}

}  // namespace

TEST_CASE("ranker config") {
  CHECK_NOTHROW(RankerConfig{}.validate());
  auto c = tiny();
  c.attention_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny();
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(ranker_config_from_json(ranker_config_to_json(tiny())) == tiny());
  CHECK(ranker_config_from_json("{}") == RankerConfig{});
  CHECK_THROWS_AS(ranker_config_from_json(R"({"d_model": "big"})"), ConfigError);
}

TEST_CASE("forward pass") {
  const auto cfg = tiny();
  const auto params = RankerParams::init(cfg);
  CHECK(params.all_finite());
  CHECK(params.parameter_count() > 0);
  SplitMix64 rng(3);
  const auto pair = random_pair(rng, cfg.embed_dim, 5, 3);

  const auto z = encode_pair(pair, params, cfg);
  CHECK(z.code.size() == cfg.proj_dim);
  CHECK(z.comment.size() == cfg.proj_dim);
  const double s = score(pair, params, cfg);
  CHECK(s >= -1.0);
  CHECK(s <= 1.0);
  CHECK(score(pair, params, cfg) == s);

  SUBCASE("padding rows do not matter") {
    auto padded = pair;
    padded.code.conservativeResize(8, Eigen::NoChange);
    padded.code.bottomRows(3) = random_matrix(rng, 3, cfg.embed_dim);
    padded.comment.conservativeResize(6, Eigen::NoChange);
    padded.comment.bottomRows(3) = random_matrix(rng, 3, cfg.embed_dim) * 50.0;
    CHECK(score(padded, params, cfg) == doctest::Approx(s).epsilon(1e-12));
  }

  SUBCASE("dropout only in training") {
    ForwardOptions train;
    train.training = true;
    train.dropout_seed = 1;
    const double t1 = score(pair, params, cfg, train);
    CHECK(score(pair, params, cfg, train) == t1);
    train.dropout_seed = 2;
    CHECK(score(pair, params, cfg, train) != t1);
  }
}

TEST_CASE("cosine and loss") {
  Vector a(3), b(3), z = Vector::Zero(3);
  a << 1, 2, 3;
  b << -2, -4, -6;
  CHECK(cosine_strict(a, a) == doctest::Approx(1.0));
  CHECK(cosine_strict(a, b) == doctest::Approx(-1.0));
  CHECK(cosine_strict(a, 3.0 * a) == doctest::Approx(1.0));
  CHECK_THROWS_AS(cosine_strict(a, z), NumericError);

  CHECK(listwise_loss(0.4, {0.4}, 0.07) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(listwise_loss(0.1, {0.1, 0.1, 0.1}, 0.5) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(listwise_loss(1.0, {-1.0}, 0.07) < 1e-12);
  CHECK(listwise_loss(-1.0, {1.0}, 0.07) == doctest::Approx(2.0 / 0.07).epsilon(1e-9));
  CHECK_THROWS_AS(listwise_loss(1.0, {}, 0.07), ContractError);

  // Large score gaps must not overflow.
  CHECK(std::isfinite(listwise_loss(-1.0, {1.0, 1.0}, 1e-4)));
}

TEST_CASE("group gradient matches finite differences") {
  const auto cfg = tiny();
  SplitMix64 rng(17);
  auto params = RankerParams::init(cfg);
  params.visit([&](const std::string&, Matrix& m) { m += 0.1 * random_matrix(rng, m.rows(), m.cols()); });
  std::vector<PairInput> group;
  for (int i = 0; i < 3; ++i) group.push_back(random_pair(rng, cfg.embed_dim, 2 + i, 4 - i));

  auto grad = params.zeros_like();
  const double loss = group_loss(group, params, cfg, &grad);
  CHECK(loss == doctest::Approx(group_loss(group, params, cfg, nullptr)));

  std::vector<double> analytic, numeric;
  std::vector<Matrix*> tensors;
  params.visit([&](const std::string&, Matrix& m) { tensors.push_back(&m); });
  std::vector<const Matrix*> grads;
  grad.visit([&](const std::string&, const Matrix& m) { grads.push_back(&m); });
  REQUIRE(tensors.size() == grads.size());
  const double h = 1e-5;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < tensors[t]->size(); ++i) {
      double& x = tensors[t]->data()[i];
      const double saved = x;
      x = saved + h;
      const double up = group_loss(group, params, cfg, nullptr);
      x = saved - h;
      const double down = group_loss(group, params, cfg, nullptr);
      x = saved;
      numeric.push_back((up - down) / (2 * h));
      analytic.push_back(grads[t]->data()[i]);
    }
  }
  const Eigen::Map<const Vector> a(analytic.data(), static_cast<Eigen::Index>(analytic.size()));
  const Eigen::Map<const Vector> n(numeric.data(), static_cast<Eigen::Index>(numeric.size()));
  CHECK((a - n).norm() / std::max(a.norm(), n.norm()) < 1e-4);

  CHECK_THROWS_AS(group_loss({group[0]}, params, cfg, nullptr), ContractError);
}

TEST_CASE("training") {
  const auto provider = make_provider(fixtures::desk_provider());
  auto cfg = fixtures::desk_ranker();
  cfg.epochs = 2;
  cfg.checkpoint_every = 8;
  std::vector<EncodedGroup> train, val;
  for (const auto& g : fixtures::separable_groups(16, 2, 4, "t")) train.push_back(encode_group(g, *provider, 64));
  for (const auto& g : fixtures::separable_groups(4, 2, 5, "v")) val.push_back(encode_group(g, *provider, 64));

  const auto r1 = train_ranker(train, val, cfg);
  const auto r2 = train_ranker(train, val, cfg);
  REQUIRE(r1.log.size() == 4);
  CHECK(r1.log.back().instances == 32);
  CHECK(r1.log.back().step == 4);
  CHECK(r1.best < r1.log.size());
  for (const auto& rec : r1.log) CHECK(r1.log[r1.best].val_loss <= rec.val_loss);
  CHECK(mean_group_loss(val, r1.params, cfg) == doctest::Approx(r1.log[r1.best].val_loss));

  std::string s1, s2;
  r1.params.visit([&](const std::string&, const Matrix& m) { s1.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size()); });
  r2.params.visit([&](const std::string&, const Matrix& m) { s2.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size()); });
  CHECK(sha256_hex(s1) == sha256_hex(s2));

  CHECK_THROWS_AS(train_ranker({}, val, cfg), ContractError);
}

TEST_CASE("checkpoints") {
  const auto dir = fixtures::temp_dir("rank-ckpt");
  const auto cfg = tiny();
  const auto params = RankerParams::init(cfg);
  save_ranker(dir / "m.ckpt", params, cfg, "stub:6:1", "digest");

  const auto loaded = load_ranker(dir / "m.ckpt", "stub:6:1", cfg);
  CHECK(loaded.config == cfg);
  CHECK(loaded.header.kind == "cuprank");
  CHECK(loaded.header.manifest_digest == "digest");
  std::vector<const Matrix*> before, after;
  params.visit([&](const std::string&, const Matrix& m) { before.push_back(&m); });
  loaded.params.visit([&](const std::string&, const Matrix& m) { after.push_back(&m); });
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(*before[i] == *after[i]);

  CHECK_THROWS_AS(load_ranker(dir / "m.ckpt", "stub:6:2"), ConfigError);
  auto other = cfg;
  other.proj_dim = 5;
  CHECK_THROWS_AS(load_ranker(dir / "m.ckpt", "stub:6:1", other), ConfigError);

  std::string bytes = read_file(dir / "m.ckpt");
  write_file(dir / "short.ckpt", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_ranker(dir / "short.ckpt", "stub:6:1"), Error);
  write_file(dir / "magic.ckpt", "NOTACKPT" + bytes.substr(8));
  CHECK_THROWS_AS(load_ranker(dir / "magic.ckpt", "stub:6:1"), Error);
}

TEST_CASE("rank_candidates") {
  const auto provider = make_provider(fixtures::desk_provider());
  auto cfg = fixtures::desk_ranker();
  const auto params = RankerParams::init(cfg);
  const auto s = fixtures::rename_samples(1, 8, "r")[0];
  std::vector<CandidateComment> cands;
  for (const auto& t : fixtures::distractors(s, 1)) cands.push_back({t, {"m", 0, 0.2}, std::nullopt});
  cands.push_back({*s.new_comment, {"m", 5, 0.2}, std::nullopt});

  const auto one = rank_candidates(s, {cands[0]}, params, cfg, *provider);
  REQUIRE(one.size() == 1);
  CHECK(one[0].candidate.text == cands[0].text);

  const auto ranked = rank_candidates(s, cands, params, cfg, *provider);
  REQUIRE(ranked.size() == cands.size());
  for (std::size_t i = 1; i < ranked.size(); ++i) CHECK(ranked[i - 1].score >= ranked[i].score);

  auto reversed = cands;
  std::reverse(reversed.begin(), reversed.end());
  const auto again = rank_candidates(s, reversed, params, cfg, *provider);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(again[i].score == doctest::Approx(ranked[i].score).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rank_candidates(s, {}, params, cfg, *provider), ContractError);
}
