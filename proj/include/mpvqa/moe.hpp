// SPDX-License-Identifier: Apache-2.0
//
// Prompt-conditioned hierarchical mixture of experts over modality tokens:
//   e = sum_n pi_h[n] * sum_m ( pi_l[n][m] * W_mod[n][m](v_m)
//                              + (1 - pi_l[n][m]) * W_shared[n](v_m) )
// with pi_h = softmax(router(t)) and pi_l = sigmoid(low_router_n(v)).
#pragma once

#include "mpvqa/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Granularity { modality, token };
std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view text);

struct MoEConfig {
  int n_experts = 16;
  int n_modalities = 4;
  int n_tokens = 8;   // N_I
  int d_image = 32;   // d_I
  int d_text = 64;    // d_T
  int hidden = 0;     // router MLP width; 0 means max(1, d_T / 4)
  /// Per-expert tag; empty means alternating modality, token, modality, ...
  std::vector<Granularity> granularity;

  int hidden_width() const { return hidden > 0 ? hidden : std::max(1, d_text / 4); }
  Granularity granularity_of(int n) const;
  /// Throws ShapeError on non-positive sizes or a granularity list of the wrong length.
  void validate() const;
};

/// Two-layer MLP: y = W2 tanh(W1 x + b1) + b2.
struct Mlp {
  MatrixXd W1;
  VectorXd b1;
  MatrixXd W2;
  VectorXd b2;

  VectorXd forward(const VectorXd& x, VectorXd* hidden = nullptr) const;
};

struct Expert {
  Granularity granularity = Granularity::modality;
  Mlp low_router;                  // N_m * d_I -> N_m
  std::vector<MatrixXd> W_mod;     // per modality, d_T x d_I
  std::vector<VectorXd> b_mod;     // per modality, d_T
  MatrixXd W_shared;               // d_T x d_I
  VectorXd b_shared;               // d_T
};

struct MoEParams {
  MoEConfig config;
  Mlp high_router;  // d_T -> h -> N
  std::vector<Expert> experts;

  /// All tensors zero, shapes from config.
  static MoEParams zeros(const MoEConfig& config);
  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  static MoEParams init(const MoEConfig& config, std::uint64_t seed);

  std::size_t parameter_count() const;
};

/// Visits every tensor as (name, data, size). Names look like "high.W1" or
/// "expert3.W_mod1"; the order is fixed and identical for all params with the
/// same config.
void for_each_tensor(MoEParams& params,
                     const std::function<void(const std::string&, double*, std::size_t)>& f);
void for_each_tensor(const MoEParams& params,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f);

struct ModalityTokens {
  std::vector<MatrixXd> tokens;  // per modality, N_I x d_I
  MatrixXd cls;                  // N_m x d_I

  int n_modalities() const { return static_cast<int>(tokens.size()); }
  int n_tokens() const { return tokens.empty() ? 0 : static_cast<int>(tokens[0].rows()); }
  int d_image() const { return static_cast<int>(cls.cols()); }
};

/// Non-overlapping mean over groups of `factor` consecutive rows. Throws
/// ShapeError when factor does not divide the row count.
MatrixXd spatial_pool(const MatrixXd& raw_tokens, int factor);

struct RoutingTrace {
  VectorXd pi_high;              // N
  std::vector<MatrixXd> pi_low;  // per expert: N_m x 1 (modality) or N_m x N_I (token)
};

VectorXd softmax(const VectorXd& logits);
double sigmoid(double x);

VectorXd high_route(const VectorXd& prompt, const MoEParams& params);
/// N_m x 1 for modality-level experts, N_m x N_I for token-level ones.
MatrixXd low_route(int expert, const ModalityTokens& v, const MoEParams& params);

/// Everything backward needs.
struct MoECache {
  VectorXd prompt;
  VectorXd high_hidden;
  RoutingTrace trace;
  // low router hidden activations: per expert, one column per router call
  std::vector<MatrixXd> low_hidden;
  std::vector<MatrixXd> low_inputs;
  // per expert and modality: projections through W_mod and W_shared (N_I x d_T)
  std::vector<std::vector<MatrixXd>> proj_mod;
  std::vector<std::vector<MatrixXd>> proj_shared;
  std::vector<MatrixXd> expert_out;  // per expert, N_I x d_T
};

/// Fused tokens, N_I x d_T. Throws ShapeError on mismatched inputs.
MatrixXd moe_forward(const ModalityTokens& v, const VectorXd& prompt, const MoEParams& params,
                     MoECache* cache = nullptr, RoutingTrace* trace = nullptr);

struct MoEInputGrads {
  std::vector<MatrixXd> tokens;
  MatrixXd cls;
  VectorXd prompt;
};

/// Accumulates dL/dparams into `grads` (same config as params) for the
/// upstream gradient dL/de, and returns input gradients.
MoEInputGrads moe_backward(const MatrixXd& upstream, const ModalityTokens& v,
                           const MoEParams& params, const MoECache& cache, MoEParams& grads);

/// Fused token count for a single fused representation versus concatenating
/// every modality's tokens.
struct TokenBudget {
  std::size_t fused = 0;
  std::size_t concatenated = 0;
};
TokenBudget token_budget(const MoEConfig& config);

/// Deterministic stand-in for a language-model prompt state: signed feature
/// hashing of lower-cased word unigrams and bigrams, L2-normalized.
VectorXd hash_embed(std::string_view text, int dim);

}  // namespace mpvqa
