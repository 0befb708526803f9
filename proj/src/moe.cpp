// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/moe.hpp"

#include "mpvqa/error.hpp"

#include <cctype>
#include <cmath>

namespace mpvqa {

std::string_view to_string(Granularity g) {
  return g == Granularity::modality ? "modality" : "token";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "modality") return Granularity::modality;
  if (text == "token") return Granularity::token;
  throw ConfigError("unknown granularity '" + std::string(text) + "'");
}

Granularity MoEConfig::granularity_of(int n) const {
  if (!granularity.empty()) return granularity.at(static_cast<std::size_t>(n));
  return n % 2 == 0 ? Granularity::modality : Granularity::token;
}

void MoEConfig::validate() const {
  if (n_experts < 1 || n_modalities < 1 || n_tokens < 1 || d_image < 1 || d_text < 1 || hidden < 0) {
    throw ShapeError("MoE config: sizes must be positive");
  }
  if (!granularity.empty() && static_cast<int>(granularity.size()) != n_experts) {
    throw ShapeError("MoE config: granularity list length differs from expert count");
  }
}

VectorXd Mlp::forward(const VectorXd& x, VectorXd* hidden) const {
  VectorXd h = (W1 * x + b1).array().tanh().matrix();
  VectorXd y = W2 * h + b2;
  if (hidden) *hidden = std::move(h);
  return y;
}

namespace {

Mlp mlp_zeros(int in, int hidden, int out) {
  return {MatrixXd::Zero(hidden, in), VectorXd::Zero(hidden), MatrixXd::Zero(out, hidden),
          VectorXd::Zero(out)};
}

void fill_uniform(MatrixXd& w, CounterRng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
  }
}

// dy: gradient at the MLP output. Accumulates into g, returns dL/dx.
VectorXd mlp_backward(const Mlp& mlp, const VectorXd& x, const VectorXd& hidden,
                      const VectorXd& dy, Mlp& g) {
  g.W2.noalias() += dy * hidden.transpose();
  g.b2 += dy;
  const VectorXd dz = ((mlp.W2.transpose() * dy).array() * (1.0 - hidden.array().square())).matrix();
  g.W1.noalias() += dz * x.transpose();
  g.b1 += dz;
  return mlp.W1.transpose() * dz;
}

template <class P, class F>
void visit(P& params, F&& f) {
  auto mlp = [&](const std::string& prefix, auto& m) {
    f(prefix + ".W1", m.W1.data(), static_cast<std::size_t>(m.W1.size()));
    f(prefix + ".b1", m.b1.data(), static_cast<std::size_t>(m.b1.size()));
    f(prefix + ".W2", m.W2.data(), static_cast<std::size_t>(m.W2.size()));
    f(prefix + ".b2", m.b2.data(), static_cast<std::size_t>(m.b2.size()));
  };
  mlp("high", params.high_router);
  for (std::size_t n = 0; n < params.experts.size(); ++n) {
    auto& e = params.experts[n];
    const std::string p = "expert" + std::to_string(n);
    mlp(p + ".low", e.low_router);
    for (std::size_t m = 0; m < e.W_mod.size(); ++m) {
      f(p + ".W_mod" + std::to_string(m), e.W_mod[m].data(), static_cast<std::size_t>(e.W_mod[m].size()));
      f(p + ".b_mod" + std::to_string(m), e.b_mod[m].data(), static_cast<std::size_t>(e.b_mod[m].size()));
    }
    f(p + ".W_shared", e.W_shared.data(), static_cast<std::size_t>(e.W_shared.size()));
    f(p + ".b_shared", e.b_shared.data(), static_cast<std::size_t>(e.b_shared.size()));
  }
}

}  // namespace

MoEParams MoEParams::zeros(const MoEConfig& config) {
  config.validate();
  MoEParams p;
  p.config = config;
  const int h = config.hidden_width();
  const int Nm = config.n_modalities, dI = config.d_image, dT = config.d_text;
  p.high_router = mlp_zeros(dT, h, config.n_experts);
  for (int n = 0; n < config.n_experts; ++n) {
    Expert e;
    e.granularity = config.granularity_of(n);
    e.low_router = mlp_zeros(Nm * dI, h, Nm);
    for (int m = 0; m < Nm; ++m) {
      e.W_mod.push_back(MatrixXd::Zero(dT, dI));
      e.b_mod.push_back(VectorXd::Zero(dT));
    }
    e.W_shared = MatrixXd::Zero(dT, dI);
    e.b_shared = VectorXd::Zero(dT);
    p.experts.push_back(std::move(e));
  }
  return p;
}

MoEParams MoEParams::init(const MoEConfig& config, std::uint64_t seed) {
  MoEParams p = zeros(config);
  CounterRng rng(seed, {"moe-init"});
  fill_uniform(p.high_router.W1, rng);
  fill_uniform(p.high_router.W2, rng);
  for (auto& e : p.experts) {
    fill_uniform(e.low_router.W1, rng);
    fill_uniform(e.low_router.W2, rng);
    for (auto& w : e.W_mod) fill_uniform(w, rng);
    fill_uniform(e.W_shared, rng);
  }
  return p;
}

std::size_t MoEParams::parameter_count() const {
  std::size_t total = 0;
  for_each_tensor(*this, [&](const std::string&, const double*, std::size_t n) { total += n; });
  return total;
}

void for_each_tensor(MoEParams& params,
                     const std::function<void(const std::string&, double*, std::size_t)>& f) {
  visit(params, f);
}

void for_each_tensor(const MoEParams& params,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f) {
  visit(params, f);
}

MatrixXd spatial_pool(const MatrixXd& raw_tokens, int factor) {
  if (factor < 1 || raw_tokens.rows() % factor != 0) {
    throw ShapeError("spatial_pool: factor " + std::to_string(factor) + " does not divide " +
                     std::to_string(raw_tokens.rows()) + " tokens");
  }
  const Eigen::Index out_rows = raw_tokens.rows() / factor;
  MatrixXd out(out_rows, raw_tokens.cols());
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    out.row(r) = raw_tokens.middleRows(r * factor, factor).colwise().mean();
  }
  return out;
}

VectorXd softmax(const VectorXd& logits) {
  VectorXd e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

namespace {

void check_inputs(const ModalityTokens& v, const VectorXd& prompt, const MoEConfig& c) {
  if (prompt.size() != c.d_text) throw ShapeError("prompt embedding has the wrong dimension");
  if (v.n_modalities() != c.n_modalities) throw ShapeError("wrong number of modalities");
  if (v.cls.rows() != c.n_modalities || v.cls.cols() != c.d_image) throw ShapeError("CLS tokens have the wrong shape");
  for (const auto& t : v.tokens) {
    if (t.rows() != c.n_tokens || t.cols() != c.d_image) throw ShapeError("modality tokens have the wrong shape");
  }
}

// Columns are router inputs: one for modality-level experts (concatenated CLS
// tokens), N_I for token-level experts (concatenated tokens at position i).
MatrixXd router_inputs(const ModalityTokens& v, Granularity g) {
  const int Nm = v.n_modalities(), dI = v.d_image();
  if (g == Granularity::modality) {
    MatrixXd x(Nm * dI, 1);
    for (int m = 0; m < Nm; ++m) x.block(m * dI, 0, dI, 1) = v.cls.row(m).transpose();
    return x;
  }
  const int NI = v.n_tokens();
  MatrixXd x(Nm * dI, NI);
  for (int m = 0; m < Nm; ++m) x.block(m * dI, 0, dI, NI) = v.tokens[m].transpose();
  return x;
}

MatrixXd apply_low_router(const Mlp& router, const MatrixXd& inputs, MatrixXd* hidden) {
  MatrixXd pi(router.W2.rows(), inputs.cols());
  if (hidden) hidden->resize(router.W1.rows(), inputs.cols());
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    VectorXd h;
    const VectorXd logits = router.forward(inputs.col(c), &h);
    for (Eigen::Index m = 0; m < logits.size(); ++m) pi(m, c) = sigmoid(logits(m));
    if (hidden) hidden->col(c) = h;
  }
  return pi;
}

}  // namespace

VectorXd high_route(const VectorXd& prompt, const MoEParams& params) {
  if (prompt.size() != params.config.d_text) throw ShapeError("prompt embedding has the wrong dimension");
  return softmax(params.high_router.forward(prompt));
}

MatrixXd low_route(int expert, const ModalityTokens& v, const MoEParams& params) {
  const Expert& e = params.experts.at(static_cast<std::size_t>(expert));
  return apply_low_router(e.low_router, router_inputs(v, e.granularity), nullptr);
}

MatrixXd moe_forward(const ModalityTokens& v, const VectorXd& prompt, const MoEParams& params,
                     MoECache* cache, RoutingTrace* trace) {
  const MoEConfig& c = params.config;
  check_inputs(v, prompt, c);
  const int N = c.n_experts, Nm = c.n_modalities, NI = c.n_tokens;

  MoECache local;
  MoECache& k = cache ? *cache : local;
  k.prompt = prompt;
  k.trace.pi_high = softmax(params.high_router.forward(prompt, &k.high_hidden));
  k.trace.pi_low.assign(N, MatrixXd());
  k.low_hidden.assign(N, MatrixXd());
  k.low_inputs.assign(N, MatrixXd());
  k.proj_mod.assign(N, std::vector<MatrixXd>(Nm));
  k.proj_shared.assign(N, std::vector<MatrixXd>(Nm));
  k.expert_out.assign(N, MatrixXd());

  MatrixXd fused = MatrixXd::Zero(NI, c.d_text);
  for (int n = 0; n < N; ++n) {
    const Expert& e = params.experts[n];
    k.low_inputs[n] = router_inputs(v, e.granularity);
    k.trace.pi_low[n] = apply_low_router(e.low_router, k.low_inputs[n], &k.low_hidden[n]);
    MatrixXd out = MatrixXd::Zero(NI, c.d_text);
    for (int m = 0; m < Nm; ++m) {
      MatrixXd P = v.tokens[m] * e.W_mod[m].transpose();
      P.rowwise() += e.b_mod[m].transpose();
      MatrixXd S = v.tokens[m] * e.W_shared.transpose();
      S.rowwise() += e.b_shared.transpose();
      for (int i = 0; i < NI; ++i) {
        const double w = e.granularity == Granularity::modality ? k.trace.pi_low[n](m, 0)
                                                                : k.trace.pi_low[n](m, i);
        out.row(i) += w * P.row(i) + (1.0 - w) * S.row(i);
      }
      k.proj_mod[n][m] = std::move(P);
      k.proj_shared[n][m] = std::move(S);
    }
    fused += k.trace.pi_high(n) * out;
    k.expert_out[n] = std::move(out);
  }
  if (trace) *trace = k.trace;
  return fused;
}

MoEInputGrads moe_backward(const MatrixXd& upstream, const ModalityTokens& v,
                           const MoEParams& params, const MoECache& cache, MoEParams& grads) {
  const MoEConfig& c = params.config;
  const int N = c.n_experts, Nm = c.n_modalities, NI = c.n_tokens, dI = c.d_image;
  if (upstream.rows() != NI || upstream.cols() != c.d_text) throw ShapeError("upstream gradient has the wrong shape");

  MoEInputGrads in;
  in.tokens.assign(Nm, MatrixXd::Zero(NI, dI));
  in.cls = MatrixXd::Zero(Nm, dI);

  VectorXd d_pi_high(N);
  for (int n = 0; n < N; ++n) {
    const Expert& e = params.experts[n];
    Expert& g = grads.experts[n];
    d_pi_high(n) = (upstream.array() * cache.expert_out[n].array()).sum();
    const MatrixXd D = cache.trace.pi_high(n) * upstream;
    const MatrixXd& pi = cache.trace.pi_low[n];
    MatrixXd d_pi = MatrixXd::Zero(pi.rows(), pi.cols());
    for (int m = 0; m < Nm; ++m) {
      VectorXd w(NI);
      for (int i = 0; i < NI; ++i) w(i) = e.granularity == Granularity::modality ? pi(m, 0) : pi(m, i);
      const MatrixXd dP = w.asDiagonal() * D;
      const MatrixXd dS = (1.0 - w.array()).matrix().asDiagonal() * D;
      const MatrixXd diff = cache.proj_mod[n][m] - cache.proj_shared[n][m];
      for (int i = 0; i < NI; ++i) {
        const double dw = D.row(i).dot(diff.row(i));
        if (e.granularity == Granularity::modality) d_pi(m, 0) += dw;
        else d_pi(m, i) += dw;
      }
      g.W_mod[m].noalias() += dP.transpose() * v.tokens[m];
      g.b_mod[m] += dP.colwise().sum().transpose();
      g.W_shared.noalias() += dS.transpose() * v.tokens[m];
      g.b_shared += dS.colwise().sum().transpose();
      in.tokens[m].noalias() += dP * e.W_mod[m] + dS * e.W_shared;
    }
    // Through the sigmoid, then the router MLP, column by column.
    const MatrixXd d_logit = (d_pi.array() * pi.array() * (1.0 - pi.array())).matrix();
    for (Eigen::Index col = 0; col < pi.cols(); ++col) {
      const VectorXd dx = mlp_backward(e.low_router, cache.low_inputs[n].col(col),
                                       cache.low_hidden[n].col(col), d_logit.col(col), g.low_router);
      for (int m = 0; m < Nm; ++m) {
        if (e.granularity == Granularity::modality) {
          in.cls.row(m) += dx.segment(m * dI, dI).transpose();
        } else {
          in.tokens[m].row(col) += dx.segment(m * dI, dI).transpose();
        }
      }
    }
  }
  const VectorXd& ph = cache.trace.pi_high;
  const VectorXd d_high_logit = (ph.array() * (d_pi_high.array() - ph.dot(d_pi_high))).matrix();
  in.prompt = mlp_backward(params.high_router, cache.prompt, cache.high_hidden, d_high_logit,
                           grads.high_router);
  return in;
}

TokenBudget token_budget(const MoEConfig& config) {
  return {static_cast<std::size_t>(config.n_tokens),
          static_cast<std::size_t>(config.n_tokens) * static_cast<std::size_t>(config.n_modalities)};
}

VectorXd hash_embed(std::string_view text, int dim) {
  if (dim < 1) throw ShapeError("hash_embed: dimension must be positive");
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  VectorXd v = VectorXd::Zero(dim);
  auto add = [&](const std::string& feature) {
    const std::uint64_t h = mix64(stream_key(0, {"embed", feature}));
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim))) += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < words.size(); ++i) {
    add(words[i]);
    if (i + 1 < words.size()) add(words[i] + " " + words[i + 1]);
  }
  const double norm = v.norm();
  if (norm > 0) v /= norm;
  return v;
}

}  // namespace mpvqa
