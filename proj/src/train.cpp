// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/train.hpp"

#include "mpvqa/error.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace mpvqa {

Model Model::zeros(const MoEConfig& config) {
  return {MoEParams::zeros(config), Heads::zeros(config.d_text)};
}

Model Model::init(const MoEConfig& config, std::uint64_t seed) {
  return {MoEParams::init(config, seed), Heads::init(config.d_text, seed)};
}

void for_each_tensor(Model& model,
                     const std::function<void(const std::string&, double*, std::size_t)>& f) {
  for_each_tensor(model.moe, f);
  for_each_tensor(model.heads, f);
}

void for_each_tensor(const Model& model,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f) {
  for_each_tensor(model.moe, f);
  for_each_tensor(model.heads, f);
}

SampleResult forward_backward(const Model& model, const Sample& sample, Model* grads) {
  MoECache cache;
  const MatrixXd fused = moe_forward(sample.tokens, sample.prompt, model.moe, grads ? &cache : nullptr);
  const VectorXd hidden = pool_fused(fused);
  SampleResult r;
  r.logits = heads_forward(hidden, model.heads);
  HeadLogits d;
  r.loss = multitask_loss(r.logits, sample.gold, grads ? &d : nullptr);
  if (grads) {
    const VectorXd dh = heads_backward(hidden, model.heads, d, grads->heads);
    MatrixXd upstream(fused.rows(), fused.cols());
    upstream.rowwise() = dh.transpose() / static_cast<double>(fused.rows());
    moe_backward(upstream, sample.tokens, model.moe, cache, grads->moe);
  }
  return r;
}

namespace {

void add_into(Model& dst, const Model& src, double scale) {
  std::vector<const double*> ptrs;
  std::vector<std::size_t> sizes;
  for_each_tensor(src, [&](const std::string&, const double* p, std::size_t n) {
    ptrs.push_back(p);
    sizes.push_back(n);
  });
  std::size_t t = 0;
  for_each_tensor(dst, [&](const std::string&, double* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) p[i] += scale * ptrs[t][i];
    ++t;
  });
}

// Fixed chunking keeps the reduction order, and so every bit of the result,
// independent of the worker count.
constexpr std::size_t kChunk = 16;

}  // namespace

double batch_loss(const Model& model, const std::vector<Sample>& samples, Model* grads,
                  unsigned workers) {
  if (samples.empty()) return 0.0;
  const std::size_t n_chunks = (samples.size() + kChunk - 1) / kChunk;
  std::vector<double> chunk_loss(n_chunks, 0.0);
  std::vector<Model> chunk_grads;
  if (grads) chunk_grads.assign(n_chunks, Model::zeros(model.moe.config));

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      const std::size_t end = std::min(samples.size(), (c + 1) * kChunk);
      for (std::size_t s = c * kChunk; s < end; ++s) {
        chunk_loss[c] += forward_backward(model, samples[s], grads ? &chunk_grads[c] : nullptr).loss.total();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(n_chunks)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (std::size_t c = 0; c < n_chunks; ++c) {
    total += chunk_loss[c];
    if (grads) add_into(*grads, chunk_grads[c], inv);
  }
  return total * inv;
}

std::vector<GroupCheck> gradient_check(const Model& model, const std::vector<Sample>& samples,
                                       double step) {
  Model grads = Model::zeros(model.moe.config);
  for (const auto& s : samples) forward_backward(model, s, &grads);

  auto total_loss = [&](const Model& m) {
    double L = 0;
    for (const auto& s : samples) L += forward_backward(m, s).loss.total();
    return L;
  };

  std::vector<std::pair<std::string, std::vector<double>>> analytic;
  for_each_tensor(grads, [&](const std::string& name, const double* p, std::size_t n) {
    analytic.emplace_back(name, std::vector<double>(p, p + n));
  });

  Model probe = model;
  std::vector<std::pair<double*, std::size_t>> slots;
  for_each_tensor(probe, [&](const std::string&, double* p, std::size_t n) { slots.emplace_back(p, n); });

  std::vector<GroupCheck> out;
  for (std::size_t g = 0; g < slots.size(); ++g) {
    GroupCheck check;
    check.name = analytic[g].first;
    double max_diff = 0;
    for (std::size_t i = 0; i < slots[g].second; ++i) {
      double& x = slots[g].first[i];
      const double saved = x;
      x = saved + step;
      const double up = total_loss(probe);
      x = saved - step;
      const double down = total_loss(probe);
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[g].second[i];
      check.max_analytic = std::max(check.max_analytic, std::abs(a));
      check.max_numeric = std::max(check.max_numeric, std::abs(numeric));
      max_diff = std::max(max_diff, std::abs(a - numeric));
    }
    check.relative_error = max_diff / std::max({check.max_analytic, check.max_numeric, 1e-10});
    out.push_back(check);
  }
  return out;
}

TrainResult train_toy(const std::vector<Sample>& data, Model model, const TrainOptions& options) {
  TrainResult result;
  for (int step = 0; step <= options.steps; ++step) {
    const bool last = step == options.steps;
    Model grads = Model::zeros(model.moe.config);
    const double loss = batch_loss(model, data, last ? nullptr : &grads, options.workers);
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step << " (loss " << loss << ", lr "
          << options.learning_rate << ")";
      throw TrainingError(msg.str());
    }
    result.loss_curve.push_back(loss);
    if (last) break;
    if (options.learning_rate != 0.0) add_into(model, grads, -options.learning_rate);
  }
  result.model = std::move(model);
  return result;
}

namespace {

int argmax(const VectorXd& v) {
  Eigen::Index i;
  v.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

TaskAccuracies evaluate_accuracy(const Model& model, const std::vector<Sample>& data) {
  std::array<std::size_t, 6> hit{}, seen{};
  auto score = [&](int task, const VectorXd& z, int target) {
    if (target < 0) return;
    ++seen[task];
    if (argmax(z) == target) ++hit[task];
  };
  for (const auto& s : data) {
    const auto r = forward_backward(model, s);
    score(0, r.logits.volume, s.gold.volume);
    score(2, r.logits.shape, s.gold.shape);
    score(3, r.logits.spread, s.gold.spread);
    score(4, r.logits.oos, s.gold.oos);
    score(5, r.logits.next_token, s.gold.next_token);
    if (s.gold.region) {
      for (int k = 0; k < kRegionOutputs; ++k) {
        ++seen[1];
        const bool predicted = r.logits.region(k) > 0.0;
        if (predicted == ((*s.gold.region)[static_cast<std::size_t>(k)] > 0.5)) ++hit[1];
      }
    }
  }
  auto pct = [&](int t) {
    return seen[t] ? 100.0 * static_cast<double>(hit[t]) / static_cast<double>(seen[t]) : 0.0;
  };
  return {pct(0), pct(1), pct(2), pct(3), pct(4), pct(5)};
}

namespace {

constexpr int kToyFeatures = kVolumeClasses + kRegionOutputs + kShapeClasses + kSpreadClasses + kOosClasses;

Sample toy_sample(const MoEConfig& c, const std::vector<MatrixXd>& maps, CounterRng& rng) {
  Sample s;
  HeadGold& g = s.gold;
  g.volume = static_cast<int>(rng.uniform_int(kVolumeClasses));
  g.shape = static_cast<int>(rng.uniform_int(kShapeClasses));
  g.spread = static_cast<int>(rng.uniform_int(kSpreadClasses));
  g.oos = static_cast<int>(rng.uniform_int(kOosClasses));
  g.next_token = g.shape;
  std::array<double, kRegionOutputs> bits{};
  for (auto& b : bits) b = rng.uniform() < 0.3 ? 1.0 : 0.0;
  g.region = bits;

  VectorXd f = VectorXd::Constant(kToyFeatures, -1.0);
  int off = 0;
  f(off + g.volume) = 1.0;
  off += kVolumeClasses;
  for (int k = 0; k < kRegionOutputs; ++k) f(off + k) = bits[static_cast<std::size_t>(k)] > 0 ? 1.0 : -1.0;
  off += kRegionOutputs;
  f(off + g.shape) = 1.0;
  off += kShapeClasses;
  f(off + g.spread) = 1.0;
  off += kSpreadClasses;
  f(off + g.oos) = 1.0;

  constexpr double kNoise = 0.05;
  s.tokens.cls.resize(c.n_modalities, c.d_image);
  for (int m = 0; m < c.n_modalities; ++m) {
    const VectorXd base = maps[m] * f;
    MatrixXd t(c.n_tokens, c.d_image);
    for (int i = 0; i < c.n_tokens; ++i) {
      for (int k = 0; k < c.d_image; ++k) t(i, k) = base(k) + kNoise * rng.normal();
    }
    for (int k = 0; k < c.d_image; ++k) s.tokens.cls(m, k) = base(k) + kNoise * rng.normal();
    s.tokens.tokens.push_back(std::move(t));
  }
  s.prompt.resize(c.d_text);
  for (int k = 0; k < c.d_text; ++k) s.prompt(k) = rng.normal();
  return s;
}

}  // namespace

ToyFixture make_toy_fixture(std::uint64_t seed, int n_train, int n_test) {
  ToyFixture fx;
  fx.config.n_experts = 4;
  fx.config.n_modalities = 2;
  fx.config.n_tokens = 2;
  fx.config.d_image = 32;
  fx.config.d_text = 32;
  fx.config.hidden = 8;
  CounterRng map_rng(seed, {"toy", "maps"});
  std::vector<MatrixXd> maps;
  for (int m = 0; m < fx.config.n_modalities; ++m) {
    MatrixXd A(fx.config.d_image, kToyFeatures);
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      for (Eigen::Index r = 0; r < A.rows(); ++r) A(r, c) = map_rng.normal() / std::sqrt(double(kToyFeatures));
    }
    maps.push_back(std::move(A));
  }
  CounterRng train_rng(seed, {"toy", "train"});
  CounterRng test_rng(seed, {"toy", "test"});
  for (int i = 0; i < n_train; ++i) fx.train.push_back(toy_sample(fx.config, maps, train_rng));
  for (int i = 0; i < n_test; ++i) fx.test.push_back(toy_sample(fx.config, maps, test_rng));
  return fx;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  if (window == 0 || values.size() < window) return out;
  double sum = 0;
  for (std::size_t i = 0; i < window; ++i) sum += values[i];
  out.push_back(sum / static_cast<double>(window));
  for (std::size_t i = window; i < values.size(); ++i) {
    sum += values[i] - values[i - window];
    out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

Sample random_sample(const MoEConfig& c, CounterRng& rng) {
  Sample s;
  s.tokens.cls.resize(c.n_modalities, c.d_image);
  for (int m = 0; m < c.n_modalities; ++m) {
    MatrixXd t(c.n_tokens, c.d_image);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.normal();
    s.tokens.tokens.push_back(std::move(t));
  }
  for (Eigen::Index k = 0; k < s.tokens.cls.size(); ++k) s.tokens.cls.data()[k] = rng.normal();
  s.prompt.resize(c.d_text);
  for (Eigen::Index k = 0; k < s.prompt.size(); ++k) s.prompt(k) = rng.normal();
  s.gold.volume = static_cast<int>(rng.uniform_int(kVolumeClasses));
  s.gold.shape = static_cast<int>(rng.uniform_int(kShapeClasses));
  s.gold.spread = static_cast<int>(rng.uniform_int(kSpreadClasses));
  s.gold.oos = static_cast<int>(rng.uniform_int(kOosClasses));
  s.gold.next_token = static_cast<int>(rng.uniform_int(kNextTokenVocab));
  std::array<double, kRegionOutputs> bits{};
  for (auto& b : bits) b = rng.uniform() < 0.5 ? 1.0 : 0.0;
  s.gold.region = bits;
  return s;
}

}  // namespace mpvqa
