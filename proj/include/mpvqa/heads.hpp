// SPDX-License-Identifier: Apache-2.0
//
// Linear task heads over the pooled fused tokens and the six-term loss.
#pragma once

#include "mpvqa/moe.hpp"

#include <array>
#include <functional>
#include <optional>
#include <string>

namespace mpvqa {

struct GoldValues;

inline constexpr int kVolumeClasses = 7;     // six bins + N/A
inline constexpr int kRegionOutputs = 9;     // independent sigmoids
inline constexpr int kShapeClasses = 6;      // five categories + N/A
inline constexpr int kSpreadClasses = 4;     // three categories + N/A
inline constexpr int kOosClasses = 2;        // in scope, out of scope
inline constexpr int kNextTokenVocab = 8;    // proxy vocabulary

struct LinearHead {
  MatrixXd W;
  VectorXd b;
};

struct Heads {
  LinearHead volume, region, shape, spread, oos, next_token;

  static Heads zeros(int d_text);
  /// Weights uniform in +-1/sqrt(d_text), biases zero.
  static Heads init(int d_text, std::uint64_t seed);
};

void for_each_tensor(Heads& heads,
                     const std::function<void(const std::string&, double*, std::size_t)>& f);
void for_each_tensor(const Heads& heads,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f);

struct HeadLogits {
  VectorXd volume, region, shape, spread, oos, next_token;
};

/// Mean over the N_I fused tokens.
VectorXd pool_fused(const MatrixXd& fused);

HeadLogits heads_forward(const VectorXd& hidden, const Heads& heads);
/// Accumulates parameter gradients; returns dL/dhidden.
VectorXd heads_backward(const VectorXd& hidden, const Heads& heads, const HeadLogits& d_logits,
                        Heads& grads);

/// Class targets; -1 masks a term out (task not asked).
struct HeadGold {
  int volume = -1;
  std::optional<std::array<double, kRegionOutputs>> region;
  int shape = -1;
  int spread = -1;
  int oos = -1;
  int next_token = -1;
};

/// Maps record gold strings onto class indices; "Unspecified" masks the term.
/// The next-token proxy target is left masked.
HeadGold head_gold(const GoldValues& gold);

struct LossBreakdown {
  double next_token = 0, volume = 0, region = 0, shape = 0, spread = 0, oos = 0;
  double total() const { return next_token + volume + region + shape + spread + oos; }
};

/// Cross-entropy terms (log-sum-exp form) plus summed per-label BCE for the
/// region head. Writes dL/dlogits when requested.
LossBreakdown multitask_loss(const HeadLogits& logits, const HeadGold& gold,
                             HeadLogits* d_logits = nullptr);

/// -log softmax(z)[target].
double cross_entropy(const VectorXd& logits, int target);
/// -(y log sigmoid(z) + (1 - y) log(1 - sigmoid(z))), computed stably.
double binary_cross_entropy(double logit, double target);

}  // namespace mpvqa
