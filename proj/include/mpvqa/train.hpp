// SPDX-License-Identifier: Apache-2.0
//
// MoE plus heads as one trainable model: per-sample forward/backward,
// finite-difference gradient checks, full-batch gradient descent, and the
// linearly separable toy task.
#pragma once

#include "mpvqa/heads.hpp"
#include "mpvqa/moe.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mpvqa {

struct Model {
  MoEParams moe;
  Heads heads;

  static Model zeros(const MoEConfig& config);
  static Model init(const MoEConfig& config, std::uint64_t seed);
};

void for_each_tensor(Model& model,
                     const std::function<void(const std::string&, double*, std::size_t)>& f);
void for_each_tensor(const Model& model,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f);

struct Sample {
  ModalityTokens tokens;
  VectorXd prompt;
  HeadGold gold;
};

struct SampleResult {
  LossBreakdown loss;
  HeadLogits logits;
};

/// Loss for one sample; accumulates parameter gradients into `grads` when
/// given (grads must have the model's shapes).
SampleResult forward_backward(const Model& model, const Sample& sample, Model* grads = nullptr);

/// Mean total loss; with `grads`, the gradient of that mean. Samples are
/// split across `workers` threads and reduced in a fixed order.
double batch_loss(const Model& model, const std::vector<Sample>& samples, Model* grads = nullptr,
                  unsigned workers = 1);

struct GroupCheck {
  std::string name;
  double max_analytic = 0;
  double max_numeric = 0;
  /// ||a - n||_inf / max(||a||_inf, ||n||_inf, 1e-10)
  double relative_error = 0;
};

/// Central differences over every parameter entry of the summed loss.
std::vector<GroupCheck> gradient_check(const Model& model, const std::vector<Sample>& samples,
                                       double step = 1e-5);

struct TrainOptions {
  int steps = 2000;
  double learning_rate = 0.5;
  unsigned workers = 1;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_curve;  // mean loss before each step, then after the last
};

/// Plain full-batch gradient descent. Throws TrainingError (with the step and
/// loss terms) if the loss becomes non-finite.
TrainResult train_toy(const std::vector<Sample>& data, Model model, const TrainOptions& options);

struct TaskAccuracies {
  double volume = 0, region = 0, shape = 0, spread = 0, oos = 0, next_token = 0;  // percent
};

/// Argmax accuracy per categorical head; region is per-label bit accuracy.
/// Masked targets are skipped.
TaskAccuracies evaluate_accuracy(const Model& model, const std::vector<Sample>& data);

struct ToyFixture {
  MoEConfig config;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Five labeled tasks plus the next-token proxy. Each sample's gold classes
/// are encoded as +-1 indicators, mapped into every modality's tokens by a
/// fixed random linear map, and perturbed with small Gaussian noise, so a
/// linear read-out recovers every label.
ToyFixture make_toy_fixture(std::uint64_t seed, int n_train = 256, int n_test = 256);

/// Trailing moving average: entry k is the mean of values[k .. k + window).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

/// Random tokens and prompt for a config (entries standard normal).
Sample random_sample(const MoEConfig& config, CounterRng& rng);

}  // namespace mpvqa
