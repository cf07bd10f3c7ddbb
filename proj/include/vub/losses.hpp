#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vub/net.hpp"

namespace vub {

/// Probabilities are floored here before any log.
inline constexpr double kProbFloor = 1e-12;

struct KlTerm {
  double value = 0.0;
  VectorXd d_mu;
  VectorXd d_logvar;
};

/// A scalar term with its partials with respect to a probability vector.
struct ProbTerm {
  double value = 0.0;
  VectorXd d_p;
};

/// KL(N(mu, diag(exp(logvar))) || N(0, I)) in nats.
KlTerm kl_std_normal(const GaussianParams& params);

/// -log(max(p_y, floor)).
ProbTerm cross_entropy(const VectorXd& p, int y);

/// -sum p_i log(max(p_i, floor)).
ProbTerm categorical_entropy(const VectorXd& p);

/// Plug-in entropy of the empirical label frequencies.
double label_entropy(std::span<const int> labels, std::size_t k);

enum class LossKind { vib, vub };

enum class MinBranch { classifier_entropy, label_entropy };

/// Batch means of the objective terms. For VIB `min_entropy_term` is 0 and
/// `branch` is empty.
struct LossBreakdown {
  double kl = 0.0;
  double ce = 0.0;
  double min_entropy_term = 0.0;
  double total = 0.0;
  std::vector<MinBranch> branch;
};

/// mean_n [beta * KL_n + CE_n]
LossBreakdown vib_loss(std::span<const ForwardRecord> records, std::span<const int> labels,
                       double beta);

/// mean_n [beta * KL_n + CE_n - min(h_labels, H(p_n))]. Ties pick the
/// classifier-entropy branch.
LossBreakdown vub_loss(std::span<const ForwardRecord> records, std::span<const int> labels,
                       double beta, double h_labels);

/// Which branch of the per-sample min is active.
MinBranch min_branch(double classifier_entropy, double h_labels);

}  // namespace vub
