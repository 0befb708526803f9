// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/checkpoint.hpp"
#include "mpvqa/error.hpp"
#include "mpvqa/qagen.hpp"
#include "mpvqa/train.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace mpvqa;
using Catch::Approx;

namespace {

MoEConfig small_config(int n = 2, int nm = 2, int ni = 3) {
  MoEConfig c;
  c.n_experts = n;
  c.n_modalities = nm;
  c.n_tokens = ni;
  c.d_image = 4;
  c.d_text = 5;
  c.hidden = 3;
  return c;
}

double max_abs(const MoEParams& p) {
  double m = 0;
  for_each_tensor(p, [&](const std::string&, const double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(d[i]));
  });
  return m;
}

}  // namespace

TEST_CASE("spatial pooling") {
  Eigen::MatrixXd t(2, 1);
  t << 1, 3;
  CHECK(spatial_pool(t, 1) == t);
  CHECK(spatial_pool(t, 2)(0, 0) == 2.0);
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(8, 3, 1.5);
  const Eigen::MatrixXd p = spatial_pool(c, 4);
  CHECK(p.rows() == 2);
  CHECK((p.array() == 1.5).all());
  CHECK_THROWS_AS(spatial_pool(c, 3), ShapeError);
}

TEST_CASE("zero routers give uniform and one-half weights") {
  const MoEConfig c = small_config(4, 3, 2);
  const MoEParams p = MoEParams::zeros(c);
  std::mt19937_64 g(1);
  const auto pi = high_route(oracle::random_vector(g, c.d_text), p);
  for (int n = 0; n < 4; ++n) CHECK(pi(n) == Approx(0.25));
  const auto v = oracle::random_tokens(g, c);
  for (int n = 0; n < 4; ++n) CHECK((low_route(n, v, p).array() == 0.5).all());
}

TEST_CASE("identical prompts route identically") {
  const MoEParams p = MoEParams::init(small_config(), 3);
  std::mt19937_64 g(2);
  const Eigen::VectorXd x = oracle::random_vector(g, 5);
  CHECK(high_route(x, p) == high_route(Eigen::VectorXd(x), p));
}

TEST_CASE("token-level routing on position-constant tokens gives equal columns") {
  MoEConfig c = small_config(2, 2, 4);
  c.granularity = {Granularity::token, Granularity::token};
  const MoEParams p = MoEParams::init(c, 8);
  std::mt19937_64 g(3);
  auto v = oracle::random_tokens(g, c);
  for (auto& t : v.tokens)
    for (int i = 1; i < c.n_tokens; ++i) t.row(i) = t.row(0);
  const Eigen::MatrixXd pi = low_route(0, v, p);
  REQUIRE(pi.cols() == 4);
  for (int i = 1; i < 4; ++i) CHECK(pi.col(i) == pi.col(0));
}

TEST_CASE("vectorized forward equals the loop oracle") {
  std::mt19937_64 g(4);
  const MoEConfig c = small_config(2, 2, 3);
  const MoEParams p = MoEParams::init(c, 21);
  const auto v = oracle::random_tokens(g, c);
  const auto x = oracle::random_vector(g, c.d_text);
  const Eigen::MatrixXd a = moe_forward(v, x, p);
  const Eigen::MatrixXd b = oracle::loop_moe_forward(v, x, p);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.rows() == c.n_tokens);
}

TEST_CASE("saturated low router reduces to the modality-specific sum") {
  MoEConfig c = small_config(1, 3, 2);
  MoEParams p = MoEParams::init(c, 5);
  p.experts[0].low_router.W2.setZero();
  p.experts[0].low_router.b2.setConstant(50.0);
  std::mt19937_64 g(5);
  const auto v = oracle::random_tokens(g, c);
  const auto x = oracle::random_vector(g, c.d_text);
  Eigen::MatrixXd expect = Eigen::MatrixXd::Zero(c.n_tokens, c.d_text);
  for (int m = 0; m < 3; ++m) {
    Eigen::MatrixXd proj = v.tokens[m] * p.experts[0].W_mod[m].transpose();
    proj.rowwise() += p.experts[0].b_mod[m].transpose();
    expect += proj;
  }
  CHECK((moe_forward(v, x, p) - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("routing invariants on random inputs") {
  std::mt19937_64 g(6);
  const MoEConfig c = small_config(6, 3, 4);
  const MoEParams p = MoEParams::init(c, 1);
  for (int t = 0; t < 200; ++t) {
    RoutingTrace tr;
    moe_forward(oracle::random_tokens(g, c), oracle::random_vector(g, c.d_text) * 3.0, p, nullptr, &tr);
    CHECK(std::abs(tr.pi_high.sum() - 1.0) <= 1e-6);
    CHECK((tr.pi_high.array() > 0).all());
    for (const auto& pl : tr.pi_low) {
      CHECK((pl.array() > 0).all());
      CHECK((pl.array() < 1).all());
    }
  }
}

TEST_CASE("fused token count does not depend on the modality count") {
  std::mt19937_64 g(7);
  for (int nm : {1, 2, 4, 8}) {
    const MoEConfig c = small_config(2, nm, 5);
    const MoEParams p = MoEParams::init(c, 2);
    CHECK(moe_forward(oracle::random_tokens(g, c), oracle::random_vector(g, 5), p).rows() == 5);
    CHECK(token_budget(c).fused == 5);
    CHECK(token_budget(c).concatenated == static_cast<std::size_t>(5 * nm));
  }
}

TEST_CASE("shape errors") {
  const MoEConfig c = small_config();
  const MoEParams p = MoEParams::init(c, 1);
  std::mt19937_64 g(8);
  auto v = oracle::random_tokens(g, c);
  CHECK_THROWS_AS(moe_forward(v, oracle::random_vector(g, 4), p), ShapeError);
  v.tokens.pop_back();
  CHECK_THROWS_AS(moe_forward(v, oracle::random_vector(g, 5), p), ShapeError);
  MoEConfig bad = c;
  bad.granularity = {Granularity::token};
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = c;
  bad.n_experts = 0;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  CHECK_THROWS_AS(parse_granularity("patch"), ConfigError);
}

TEST_CASE("backward: zero upstream and an unused expert") {
  std::mt19937_64 g(9);
  const MoEConfig c = small_config(2, 2, 3);
  MoEParams p = MoEParams::init(c, 4);
  const auto v = oracle::random_tokens(g, c);
  const auto x = oracle::random_vector(g, c.d_text);

  MoECache cache;
  moe_forward(v, x, p, &cache);
  MoEParams grads = MoEParams::zeros(c);
  moe_backward(Eigen::MatrixXd::Zero(3, 5), v, p, cache, grads);
  CHECK(max_abs(grads) == 0.0);

  // Expert 1 gets softmax weight ~e^-60.
  p.high_router.W2.setZero();
  p.high_router.b2 << 0.0, -60.0;
  moe_forward(v, x, p, &cache);
  REQUIRE(cache.trace.pi_high(1) < 1e-12);
  grads = MoEParams::zeros(c);
  moe_backward(Eigen::MatrixXd::Ones(3, 5), v, p, cache, grads);
  double norm2 = 0;
  for_each_tensor(grads, [&](const std::string& name, const double* d, std::size_t n) {
    if (name.rfind("expert1.", 0) != 0) return;
    for (std::size_t i = 0; i < n; ++i) norm2 += d[i] * d[i];
  });
  CHECK(std::sqrt(norm2) <= 1e-10);
}

TEST_CASE("loss terms") {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(7);
  CHECK(cross_entropy(z, 3) == Approx(std::log(7.0)).epsilon(1e-15));
  z(2) = 60;
  CHECK(cross_entropy(z, 2) <= 1e-6);
  CHECK(binary_cross_entropy(0.0, 1.0) == Approx(std::log(2.0)));
  CHECK(std::isfinite(binary_cross_entropy(-800.0, 1.0)));
  CHECK(binary_cross_entropy(-800.0, 1.0) == Approx(800.0));

  HeadLogits logits;
  logits.volume = Eigen::VectorXd::Zero(kVolumeClasses);
  logits.region = Eigen::VectorXd::Zero(kRegionOutputs);
  logits.shape = Eigen::VectorXd::Zero(kShapeClasses);
  logits.spread = Eigen::VectorXd::Zero(kSpreadClasses);
  logits.oos = Eigen::VectorXd::Zero(kOosClasses);
  logits.next_token = Eigen::VectorXd::Zero(kNextTokenVocab);
  GoldValues gv;
  gv.regions = {"frontal"};
  const HeadGold hg = head_gold(gv);
  REQUIRE(hg.region.has_value());
  CHECK((*hg.region)[0] == 1.0);
  CHECK(hg.volume == -1);  // Unspecified is masked
  const LossBreakdown l = multitask_loss(logits, hg);
  CHECK(l.region == Approx(9.0 * std::log(2.0)));
  CHECK(l.volume == 0.0);
  CHECK(l.oos == Approx(std::log(2.0)));
}

TEST_CASE("heads have the task vocabulary sizes") {
  const Heads h = Heads::zeros(5);
  const HeadLogits z = heads_forward(Eigen::VectorXd::Ones(5), h);
  CHECK(z.volume.size() == 7);
  CHECK(z.region.size() == 9);
  CHECK(z.shape.size() == 6);
  CHECK(z.spread.size() == 4);
  CHECK(z.oos.size() == 2);
  CHECK((z.shape.array() == 0).all());
}

TEST_CASE("gradients match central differences") {
  for (auto gran : {Granularity::modality, Granularity::token}) {
    MoEConfig c = small_config(2, 2, 3);
    c.granularity = {gran, Granularity::token};
    const Model m = Model::init(c, 12);
    CounterRng rng(3, {"grad-test"});
    std::vector<Sample> samples{random_sample(c, rng), random_sample(c, rng)};
    for (const auto& gc : gradient_check(m, samples, 1e-5)) {
      INFO(gc.name);
      CHECK(gc.relative_error < 1e-4);
    }
  }
}

TEST_CASE("batch loss is identical across worker counts") {
  const MoEConfig c = small_config(3, 2, 2);
  const Model m = Model::init(c, 2);
  CounterRng rng(1, {"w"});
  std::vector<Sample> s;
  for (int i = 0; i < 40; ++i) s.push_back(random_sample(c, rng));
  Model g1 = Model::zeros(c), g4 = Model::zeros(c);
  CHECK(batch_loss(m, s, &g1, 1) == batch_loss(m, s, &g4, 4));
  CHECK(encode_checkpoint(g1, 0) == encode_checkpoint(g4, 0));
}

TEST_CASE("training: zero learning rate and a single sample") {
  const MoEConfig c = small_config(2, 2, 2);
  CounterRng rng(4, {"train"});
  std::vector<Sample> one{random_sample(c, rng)};
  const Model m = Model::init(c, 6);
  const TrainResult flat = train_toy(one, m, {5, 0.0, 1});
  CHECK(encode_checkpoint(flat.model, 0) == encode_checkpoint(m, 0));
  for (double l : flat.loss_curve) CHECK(l == flat.loss_curve.front());

  const TrainResult down = train_toy(one, m, {60, 0.05, 1});
  REQUIRE(down.loss_curve.size() == 61);
  for (std::size_t i = 1; i < down.loss_curve.size(); ++i) CHECK(down.loss_curve[i] < down.loss_curve[i - 1]);
  CHECK_THROWS_AS(train_toy(one, m, {50, 1e6, 1}), TrainingError);
}

TEST_CASE("moving average") {
  const auto m = moving_average({1, 2, 3, 4, 5}, 2);
  CHECK(m == std::vector<double>{1.5, 2.5, 3.5, 4.5});
}

TEST_CASE("checkpoints round trip and reject corruption") {
  MoEConfig c = small_config(3, 2, 2);
  c.granularity = {Granularity::token, Granularity::modality, Granularity::token};
  const Model m = Model::init(c, 99);
  const auto bytes = encode_checkpoint(m, 99);
  std::uint64_t seed = 0;
  const Model back = decode_checkpoint(bytes, &seed);
  CHECK(seed == 99);
  CHECK(back.moe.config.granularity == c.granularity);
  CHECK(encode_checkpoint(back, 99) == bytes);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  bad = bytes;
  bad.resize(bytes.size() - 8);
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
}

TEST_CASE("hashed prompt embeddings") {
  const auto a = hash_embed("What is the shape of ET?", 64);
  CHECK(a.norm() == Approx(1.0));
  CHECK(a == hash_embed("what is the SHAPE of et", 64));
  CHECK(a != hash_embed("What is the volume of ET?", 64));
  CHECK(hash_embed("", 8).norm() == 0.0);
}

TEST_CASE("toy fixture is learnable in a short run") {
  const ToyFixture fx = make_toy_fixture(5, 64, 64);
  const TrainResult r = train_toy(fx.train, Model::init(fx.config, 5), {150, 0.5, 1});
  CHECK(r.loss_curve.back() < 0.5 * r.loss_curve.front());
}
