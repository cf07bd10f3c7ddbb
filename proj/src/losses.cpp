#include "vub/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vub {

namespace {

void check_batch(std::span<const ForwardRecord> records, std::span<const int> labels) {
  if (records.empty()) throw std::invalid_argument("loss: empty batch");
  if (records.size() != labels.size()) {
    throw std::invalid_argument("loss: records and labels differ in length");
  }
}

// Accumulates sums of kl/ce/min and the branch per sample.
LossBreakdown accumulate(std::span<const ForwardRecord> records, std::span<const int> labels,
                         double beta, const double* h_labels) {
  if (beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");
  check_batch(records, labels);
  LossBreakdown out;
  for (std::size_t n = 0; n < records.size(); ++n) {
    out.kl += kl_std_normal(records[n].params).value;
    out.ce += cross_entropy(records[n].p, labels[n]).value;
    if (h_labels != nullptr) {
      const double h = categorical_entropy(records[n].p).value;
      const MinBranch b = min_branch(h, *h_labels);
      out.branch.push_back(b);
      out.min_entropy_term += b == MinBranch::classifier_entropy ? h : *h_labels;
    }
  }
  const double n = static_cast<double>(records.size());
  out.kl /= n;
  out.ce /= n;
  out.min_entropy_term /= n;
  out.total = beta * out.kl + out.ce - out.min_entropy_term;
  return out;
}

}  // namespace

KlTerm kl_std_normal(const GaussianParams& params) {
  if (params.mu.size() != params.logvar.size()) {
    throw std::invalid_argument("kl_std_normal: mu/logvar length mismatch");
  }
  const Eigen::ArrayXd var = params.logvar.array().exp();
  KlTerm t;
  t.value = 0.5 * (params.mu.array().square() + var - params.logvar.array() - 1.0).sum();
  t.d_mu = params.mu;
  t.d_logvar = 0.5 * (var - 1.0).matrix();
  return t;
}

ProbTerm cross_entropy(const VectorXd& p, int y) {
  if (y < 0 || y >= p.size()) {
    throw std::invalid_argument("cross_entropy: label " + std::to_string(y) + " out of range");
  }
  ProbTerm t;
  t.d_p = VectorXd::Zero(p.size());
  if (p(y) > kProbFloor) {
    t.value = -std::log(p(y));
    t.d_p(y) = -1.0 / p(y);
  } else {
    t.value = -std::log(kProbFloor);
  }
  return t;
}

ProbTerm categorical_entropy(const VectorXd& p) {
  ProbTerm t;
  t.d_p.resize(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > kProbFloor) {
      const double lp = std::log(p(i));
      t.value -= p(i) * lp;
      t.d_p(i) = -(lp + 1.0);
    } else {
      const double lp = std::log(kProbFloor);
      t.value -= p(i) * lp;
      t.d_p(i) = -lp;
    }
  }
  return t;
}

double label_entropy(std::span<const int> labels, std::size_t k) {
  if (labels.empty()) throw std::invalid_argument("label_entropy: empty label list");
  std::vector<std::size_t> counts(k, 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::invalid_argument("label_entropy: label " + std::to_string(y) + " out of range");
    }
    ++counts[static_cast<std::size_t>(y)];
  }
  const double n = static_cast<double>(labels.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double f = static_cast<double>(c) / n;
    h -= f * std::log(f);
  }
  return std::max(h, 0.0);
}

MinBranch min_branch(double classifier_entropy, double h_labels) {
  return classifier_entropy <= h_labels ? MinBranch::classifier_entropy : MinBranch::label_entropy;
}

LossBreakdown vib_loss(std::span<const ForwardRecord> records, std::span<const int> labels,
                       double beta) {
  return accumulate(records, labels, beta, nullptr);
}

LossBreakdown vub_loss(std::span<const ForwardRecord> records, std::span<const int> labels,
                       double beta, double h_labels) {
  if (h_labels < 0.0) throw std::invalid_argument("vub_loss: label entropy must be >= 0");
  return accumulate(records, labels, beta, &h_labels);
}

}  // namespace vub
