#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "vub/dataset.hpp"
#include "vub/net.hpp"

namespace vub {

/// Robustness summary. Success is counted only over samples the model
/// classified correctly before the attack (and, for targeted attacks, whose
/// label differs from the target).
struct AttackReport {
  std::string method;
  std::size_t n_evaluated = 0;
  std::size_t n_originally_correct = 0;
  std::size_t n_successful_attacks = 0;
  double success_rate = 0.0;
  std::optional<double> mean_l2_of_success;  // targeted only; empty when nothing succeeded

  // echoed parameters
  double epsilon = 0.0;
  int target = -1;
  double c = 0.0;
  std::size_t steps = 0;
  double step_size = 0.0;
  std::uint64_t seed = 0;
};

/// x + epsilon * sign(dCE/dx), with the gradient taken through a single
/// noise draw from `seed` (or the mean over `noise_draws` draws). sign(0) = 0.
VectorXd fgs_attack(const Model& model, const VectorXd& x, int y, double epsilon,
                    std::uint64_t seed, std::size_t noise_draws = 1);

/// Per sample i: the correctness check and post-attack check share one noise
/// draw; the attack gradient uses another. Both derive from (seed, i).
AttackReport attack_sweep_fgs(const Model& model, const Dataset& dataset, double epsilon,
                              std::uint64_t seed, std::size_t jobs = 1,
                              std::size_t noise_draws = 1);

struct L2AttackParams {
  std::size_t steps = 200;
  double c = 1.0;
  double step_size = 0.01;
};

struct L2AttackResult {
  VectorXd adversarial;
  bool success = false;
  double l2_distance = 0.0;
};

/// Fixed-constant targeted L2 attack: gradient descent on
///   ||x' - x||^2 + c * max(0, max_{i != t} logit_i - logit_t)
/// under one frozen noise draw. Returns the closest iterate that the model
/// assigns to `target` (ties to the lowest index), or the last iterate when
/// none does.
L2AttackResult l2_targeted_attack(const Model& model, const VectorXd& x, int target,
                                  const L2AttackParams& params, std::uint64_t seed);

AttackReport attack_sweep_l2(const Model& model, const Dataset& dataset, int target,
                             const L2AttackParams& params, std::uint64_t seed,
                             std::size_t jobs = 1);

/// Single-draw prediction under the noise stream `seed`.
std::size_t predict_single(const Model& model, const VectorXd& x, std::uint64_t seed);

}  // namespace vub
