#pragma once

// Central finite-difference oracle for the empirical objectives. It only
// evaluates losses on fresh forward passes (noise frozen per sample), so it
// shares no code with the analytic backward pass.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vub/backward.hpp"
#include "vub/losses.hpp"
#include "vub/net.hpp"
#include "vub/random.hpp"

namespace vub::testing {

struct GradCase {
  Model model;
  std::vector<VectorXd> xs;
  std::vector<VectorXd> eps;
  std::vector<int> labels;
  LossSpec spec;
};

inline std::vector<ForwardRecord> forward_all(const Model& m, const GradCase& c) {
  std::vector<ForwardRecord> out;
  for (std::size_t i = 0; i < c.xs.size(); ++i) out.push_back(forward(m, c.xs[i], c.eps[i]));
  return out;
}

inline double loss_at(const Model& m, const GradCase& c) {
  const auto recs = forward_all(m, c);
  return c.spec.kind == LossKind::vub
             ? vub_loss(recs, c.labels, c.spec.beta, c.spec.label_entropy).total
             : vib_loss(recs, c.labels, c.spec.beta).total;
}

inline VectorXd numeric_gradient(const GradCase& c, double step = 1e-5) {
  const VectorXd base = c.model.flatten();
  VectorXd g(base.size());
  Model m = c.model;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    VectorXd p = base;
    p(i) = base(i) + step;
    m.assign_flat(p);
    const double up = loss_at(m, c);
    p(i) = base(i) - step;
    m.assign_flat(p);
    const double down = loss_at(m, c);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

/// Relative error with a 1e-5 floor on the scale, so parameters whose
/// gradient is essentially zero are compared absolutely.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-5});
}

/// True when a ReLU pre-activation or the entropy/label-entropy comparison
/// sits close enough to its kink that a finite difference could straddle it.
inline bool near_kink(const GradCase& c) {
  for (const ForwardRecord& r : forward_all(c.model, c)) {
    if ((r.hidden_pre.array().abs() < 1e-3).any()) return true;
    if (c.spec.kind == LossKind::vub &&
        std::abs(categorical_entropy(r.p).value - c.spec.label_entropy) < 1e-3) {
      return true;
    }
    const auto k = r.params.mu.size();
    const Eigen::ArrayXd raw = r.encoder_out.tail(k).array();
    if (((raw.abs() - kLogvarMax).abs() < 1e-3).any()) return true;
  }
  return false;
}

/// Random (d_in=4, h=4, K=2, n_classes=3) model and a batch of 6 samples.
/// Head weights are scaled up so classifier entropies spread on both sides
/// of the label entropy.
inline GradCase random_grad_case(std::uint64_t seed, LossKind kind) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    GradCase c;
    c.model = init_model(4, 4, 2, 3, rng());
    c.model.head_w *= 3.0;
    c.model.enc_b1 = standard_normal(rng, 4) * 0.3;
    c.model.enc_b2 = standard_normal(rng, 4) * 0.3;
    c.model.head_b = standard_normal(rng, 3) * 0.3;
    for (int n = 0; n < 6; ++n) {
      c.xs.push_back(standard_normal(rng, 4) * 1.5);
      c.eps.push_back(standard_normal(rng, 2));
      c.labels.push_back(static_cast<int>(rng() % 3));
    }
    c.spec.kind = kind;
    c.spec.beta = 0.05 + rng.uniform();
    c.spec.label_entropy = label_entropy(c.labels, 3);
    if (!near_kink(c)) return c;
  }
}

inline double max_gradient_error(const GradCase& c) {
  const auto recs = forward_all(c.model, c);
  const VectorXd analytic = backward(c.model, recs, c.labels, c.spec).grads.flatten();
  const VectorXd numeric = numeric_gradient(c);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic(i), numeric(i)));
  }
  return worst;
}

}  // namespace vub::testing
