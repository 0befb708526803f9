// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/heads.hpp"

#include "mpvqa/qagen.hpp"

#include <cmath>

namespace mpvqa {

namespace {

LinearHead head_zeros(int out, int d_text) { return {MatrixXd::Zero(out, d_text), VectorXd::Zero(out)}; }

template <class H, class F>
void visit(H& heads, F&& f) {
  auto one = [&](const char* name, auto& h) {
    f(std::string("head.") + name + ".W", h.W.data(), static_cast<std::size_t>(h.W.size()));
    f(std::string("head.") + name + ".b", h.b.data(), static_cast<std::size_t>(h.b.size()));
  };
  one("volume", heads.volume);
  one("region", heads.region);
  one("shape", heads.shape);
  one("spread", heads.spread);
  one("oos", heads.oos);
  one("next_token", heads.next_token);
}

VectorXd apply(const LinearHead& h, const VectorXd& x) { return h.W * x + h.b; }

void back(const LinearHead& h, const VectorXd& x, const VectorXd& dy, LinearHead& g, VectorXd& dx) {
  if (dy.size() == 0) return;
  g.W.noalias() += dy * x.transpose();
  g.b += dy;
  dx.noalias() += h.W.transpose() * dy;
}

double log_sum_exp(const VectorXd& z) {
  const double mx = z.maxCoeff();
  return mx + std::log((z.array() - mx).exp().sum());
}

double ce_term(const VectorXd& z, int target, VectorXd* dz) {
  if (target < 0) {
    if (dz) *dz = VectorXd::Zero(z.size());
    return 0.0;
  }
  if (dz) {
    *dz = softmax(z);
    (*dz)(target) -= 1.0;
  }
  return cross_entropy(z, target);
}

}  // namespace

Heads Heads::zeros(int d_text) {
  return {head_zeros(kVolumeClasses, d_text), head_zeros(kRegionOutputs, d_text),
          head_zeros(kShapeClasses, d_text),  head_zeros(kSpreadClasses, d_text),
          head_zeros(kOosClasses, d_text),    head_zeros(kNextTokenVocab, d_text)};
}

Heads Heads::init(int d_text, std::uint64_t seed) {
  Heads h = zeros(d_text);
  CounterRng rng(seed, {"heads-init"});
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_text));
  for (LinearHead* p : {&h.volume, &h.region, &h.shape, &h.spread, &h.oos, &h.next_token}) {
    for (Eigen::Index c = 0; c < p->W.cols(); ++c) {
      for (Eigen::Index r = 0; r < p->W.rows(); ++r) p->W(r, c) = rng.uniform(-bound, bound);
    }
  }
  return h;
}

void for_each_tensor(Heads& heads,
                     const std::function<void(const std::string&, double*, std::size_t)>& f) {
  visit(heads, f);
}

void for_each_tensor(const Heads& heads,
                     const std::function<void(const std::string&, const double*, std::size_t)>& f) {
  visit(heads, f);
}

VectorXd pool_fused(const MatrixXd& fused) { return fused.colwise().mean().transpose(); }

HeadLogits heads_forward(const VectorXd& hidden, const Heads& heads) {
  return {apply(heads.volume, hidden), apply(heads.region, hidden), apply(heads.shape, hidden),
          apply(heads.spread, hidden), apply(heads.oos, hidden),    apply(heads.next_token, hidden)};
}

VectorXd heads_backward(const VectorXd& hidden, const Heads& heads, const HeadLogits& d,
                        Heads& grads) {
  VectorXd dx = VectorXd::Zero(hidden.size());
  back(heads.volume, hidden, d.volume, grads.volume, dx);
  back(heads.region, hidden, d.region, grads.region, dx);
  back(heads.shape, hidden, d.shape, grads.shape, dx);
  back(heads.spread, hidden, d.spread, grads.spread, dx);
  back(heads.oos, hidden, d.oos, grads.oos, dx);
  back(heads.next_token, hidden, d.next_token, grads.next_token, dx);
  return dx;
}

HeadGold head_gold(const GoldValues& gold) {
  HeadGold g;
  if (gold.volume != kUnspecified) g.volume = static_cast<int>(parse_volume_bin(gold.volume));
  if (gold.shape != kUnspecified) g.shape = static_cast<int>(parse_shape(gold.shape));
  if (gold.spread != kUnspecified) g.spread = static_cast<int>(parse_spread(gold.spread));
  if (!regions_unspecified(gold.regions)) {
    std::array<double, kRegionOutputs> bits{};
    if (!regions_not_applicable(gold.regions)) {
      for (const auto& r : gold.regions) {
        const int idx = region_index(r);
        if (idx >= 0) bits[static_cast<std::size_t>(idx)] = 1.0;
      }
    }
    g.region = bits;
  }
  g.oos = gold.out_of_scope ? 1 : 0;
  return g;
}

double cross_entropy(const VectorXd& logits, int target) {
  return log_sum_exp(logits) - logits(target);
}

double binary_cross_entropy(double z, double y) {
  // log(1 + e^z) - y z, with log1p(e^-|z|) + max(z, 0) for stability.
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - y * z;
}

LossBreakdown multitask_loss(const HeadLogits& z, const HeadGold& gold, HeadLogits* d) {
  LossBreakdown L;
  L.volume = ce_term(z.volume, gold.volume, d ? &d->volume : nullptr);
  L.shape = ce_term(z.shape, gold.shape, d ? &d->shape : nullptr);
  L.spread = ce_term(z.spread, gold.spread, d ? &d->spread : nullptr);
  L.oos = ce_term(z.oos, gold.oos, d ? &d->oos : nullptr);
  L.next_token = ce_term(z.next_token, gold.next_token, d ? &d->next_token : nullptr);
  if (d) d->region = VectorXd::Zero(z.region.size());
  if (gold.region) {
    for (Eigen::Index r = 0; r < z.region.size(); ++r) {
      const double y = (*gold.region)[static_cast<std::size_t>(r)];
      L.region += binary_cross_entropy(z.region(r), y);
      if (d) d->region(r) = sigmoid(z.region(r)) - y;
    }
  }
  return L;
}

}  // namespace mpvqa
