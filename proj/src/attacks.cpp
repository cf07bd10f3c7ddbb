#include "vub/attacks.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "vub/backward.hpp"
#include "vub/parallel.hpp"
#include "vub/random.hpp"

namespace vub {

namespace {

constexpr std::uint64_t kCheckDraw = 0;
constexpr std::uint64_t kGradientDraw = 1;

void check_input(const Model& model, const VectorXd& x, const char* what) {
  if (static_cast<std::size_t>(x.size()) != model.dims.d_in) {
    throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(x.size()) +
                                " features, model expects " + std::to_string(model.dims.d_in));
  }
}

void check_dataset(const Model& model, const Dataset& dataset, const char* what) {
  if (dataset.dim() != model.dims.d_in) {
    throw std::invalid_argument(std::string(what) + ": dataset has " +
                                std::to_string(dataset.dim()) + " features, model expects " +
                                std::to_string(model.dims.d_in));
  }
}

VectorXd noise(const Model& model, std::uint64_t seed) {
  Rng rng(seed);
  return standard_normal(rng, static_cast<Eigen::Index>(model.dims.latent));
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// max_{i != t} logit_i - logit_t, and the maximizing index.
std::pair<double, Eigen::Index> target_margin(const VectorXd& logits, int target) {
  double best = -std::numeric_limits<double>::infinity();
  Eigen::Index best_i = -1;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    if (i == target) continue;
    if (logits(i) > best) {
      best = logits(i);
      best_i = i;
    }
  }
  return {best - logits(target), best_i};
}

void finish(AttackReport& r) {
  r.success_rate = r.n_originally_correct == 0
                       ? 0.0
                       : static_cast<double>(r.n_successful_attacks) /
                             static_cast<double>(r.n_originally_correct);
}

}  // namespace

std::size_t predict_single(const Model& model, const VectorXd& x, std::uint64_t seed) {
  return argmax(forward(model, x, noise(model, seed)).p);
}

VectorXd fgs_attack(const Model& model, const VectorXd& x, int y, double epsilon,
                    std::uint64_t seed, std::size_t noise_draws) {
  check_input(model, x, "fgs_attack");
  if (!(epsilon >= 0.0)) throw std::invalid_argument("fgs_attack: epsilon must be >= 0");
  if (y < 0 || static_cast<std::size_t>(y) >= model.dims.n_classes) {
    throw std::invalid_argument("fgs_attack: label out of range");
  }
  if (noise_draws < 1) throw std::invalid_argument("fgs_attack: noise_draws must be >= 1");
  if (epsilon == 0.0) return x;

  Rng rng(seed);
  VectorXd grad = VectorXd::Zero(x.size());
  for (std::size_t s = 0; s < noise_draws; ++s) {
    const ForwardRecord r =
        forward(model, x, standard_normal(rng, static_cast<Eigen::Index>(model.dims.latent)));
    VectorXd d_logits = r.p;
    d_logits(y) -= 1.0;
    grad += input_gradient(model, r, d_logits);
  }
  return x + epsilon * grad.unaryExpr(&sign);
}

AttackReport attack_sweep_fgs(const Model& model, const Dataset& dataset, double epsilon,
                              std::uint64_t seed, std::size_t jobs, std::size_t noise_draws) {
  check_dataset(model, dataset, "attack_sweep_fgs");
  AttackReport report;
  report.method = "fgs";
  report.epsilon = epsilon;
  report.seed = seed;
  report.n_evaluated = dataset.size();

  // 0 = misclassified before attack, 1 = correct and survived, 2 = flipped
  std::vector<int> outcome(dataset.size(), 0);
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    const std::uint64_t sample_seed = derive_seed(seed, i);
    const std::uint64_t check_seed = derive_seed(sample_seed, kCheckDraw);
    const VectorXd x = dataset.row(i);
    const int y = dataset.labels()[i];
    if (predict_single(model, x, check_seed) != static_cast<std::size_t>(y)) return;
    const VectorXd adv = fgs_attack(model, x, y, epsilon, derive_seed(sample_seed, kGradientDraw),
                                    noise_draws);
    outcome[i] = predict_single(model, adv, check_seed) == static_cast<std::size_t>(y) ? 1 : 2;
  });
  for (int o : outcome) {
    if (o > 0) ++report.n_originally_correct;
    if (o == 2) ++report.n_successful_attacks;
  }
  finish(report);
  return report;
}

L2AttackResult l2_targeted_attack(const Model& model, const VectorXd& x, int target,
                                  const L2AttackParams& params, std::uint64_t seed) {
  check_input(model, x, "l2_targeted_attack");
  if (target < 0 || static_cast<std::size_t>(target) >= model.dims.n_classes) {
    throw std::invalid_argument("l2_targeted_attack: target out of range");
  }
  if (params.steps < 1) throw std::invalid_argument("l2_targeted_attack: steps must be >= 1");
  if (!(params.c > 0.0)) throw std::invalid_argument("l2_targeted_attack: c must be > 0");
  if (!(params.step_size >= 0.0)) {
    throw std::invalid_argument("l2_targeted_attack: step_size must be >= 0");
  }

  const VectorXd eps = noise(model, seed);
  const auto n_classes = static_cast<Eigen::Index>(model.dims.n_classes);
  L2AttackResult best;
  VectorXd adv = x;

  auto consider = [&](const ForwardRecord& r) {
    if (argmax(r.logits) != static_cast<std::size_t>(target)) return;
    const double dist = (r.x - x).norm();
    if (!best.success || dist < best.l2_distance) {
      best.success = true;
      best.l2_distance = dist;
      best.adversarial = r.x;
    }
  };

  for (std::size_t step = 0; step < params.steps; ++step) {
    const ForwardRecord r = forward(model, adv, eps);
    consider(r);
    if (step == 0 && best.success) return best;  // already the target

    VectorXd grad = 2.0 * (adv - x);
    const auto [margin, other] = target_margin(r.logits, target);
    if (margin > 0.0) {
      VectorXd d_logits = VectorXd::Zero(n_classes);
      d_logits(other) = params.c;
      d_logits(target) = -params.c;
      grad += input_gradient(model, r, d_logits);
    }
    adv -= params.step_size * grad;
  }
  consider(forward(model, adv, eps));

  if (!best.success) {
    best.adversarial = adv;
    best.l2_distance = (adv - x).norm();
  }
  return best;
}

AttackReport attack_sweep_l2(const Model& model, const Dataset& dataset, int target,
                             const L2AttackParams& params, std::uint64_t seed, std::size_t jobs) {
  check_dataset(model, dataset, "attack_sweep_l2");
  if (target < 0 || static_cast<std::size_t>(target) >= model.dims.n_classes) {
    throw std::invalid_argument("attack_sweep_l2: target out of range");
  }
  AttackReport report;
  report.method = "l2";
  report.target = target;
  report.c = params.c;
  report.steps = params.steps;
  report.step_size = params.step_size;
  report.seed = seed;
  report.n_evaluated = dataset.size();

  std::vector<int> attacked(dataset.size(), 0);
  std::vector<double> distance(dataset.size(), 0.0);
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    const int y = dataset.labels()[i];
    if (y == target) return;
    const std::uint64_t sample_seed = derive_seed(seed, i);
    const VectorXd x = dataset.row(i);
    if (predict_single(model, x, sample_seed) != static_cast<std::size_t>(y)) return;
    const L2AttackResult res = l2_targeted_attack(model, x, target, params, sample_seed);
    attacked[i] = res.success ? 2 : 1;
    distance[i] = res.l2_distance;
  });

  double total = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (attacked[i] > 0) ++report.n_originally_correct;
    if (attacked[i] == 2) {
      ++report.n_successful_attacks;
      total += distance[i];
    }
  }
  if (report.n_successful_attacks > 0) {
    report.mean_l2_of_success = total / static_cast<double>(report.n_successful_attacks);
  }
  finish(report);
  return report;
}

}  // namespace vub
