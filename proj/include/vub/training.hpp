#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "vub/dataset.hpp"
#include "vub/losses.hpp"
#include "vub/net.hpp"

namespace vub {

enum class OptimizerKind { adam, sgd };

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  LossKind loss_kind = LossKind::vub;
  double beta = 1e-3;
  double base_lr = 1e-4;
  double lr_decay = 0.97;
  std::size_t decay_every = 2;  // epochs
  std::size_t batch_size = 32;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::adam;
  AdamParams adam;
  std::size_t mc_samples_train = 1;
  std::size_t mc_samples_eval = 1;
  /// Also evaluate both objectives on every training batch's forwards.
  bool record_tightness = false;

  void validate() const;
};

/// base_lr * lr_decay^floor(epoch / decay_every)
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct OptimizerState {
  VectorXd m;
  VectorXd v;
  std::size_t t = 0;
};

/// One optimizer update of a flat parameter vector.
void optimizer_step(VectorXd& params, const VectorXd& grads, OptimizerState& state, double lr,
                    const TrainConfig& config);

struct EvalMetrics {
  double accuracy = 0.0;
  double mean_ce = 0.0;
  double mean_classifier_entropy = 0.0;
};

/// Class probabilities averaged over `mc_samples` noise draws per sample,
/// argmax with ties to the lowest index. Sample i draws from derive_seed(seed, i).
EvalMetrics evaluate(const Model& model, const Dataset& dataset, std::size_t mc_samples,
                     std::uint64_t seed);

struct InfoPlanePoint {
  double prior_entropy = 0.0;        // H(R)
  double conditional_entropy = 0.0;  // mean H(Z|X=x)
  double rate_estimate = 0.0;        // H(R) - H(Z|X)
  double distortion_analog = 0.0;    // 1 / mean CE, capped
};

inline constexpr double kDistortionAnalogCap = 1e6;

/// Differential entropy of the K-dimensional standard normal, (K/2) ln(2 pi e).
double prior_entropy(std::size_t latent);

InfoPlanePoint info_plane_point(const Model& model, const Dataset& dataset, std::uint64_t seed);

struct TraceRecord {
  std::size_t epoch = 0;
  LossBreakdown train_loss;  // sample-weighted means over the epoch's batches
  double train_acc = 0.0;
  double eval_acc = 0.0;
  double eval_ce = 0.0;
  double rate_estimate = 0.0;
  double distortion_analog = 0.0;
  double lr = 0.0;
};

using TraceLog = std::vector<TraceRecord>;

/// CSV with header
/// epoch,loss_total,loss_kl,loss_ce,loss_min_term,train_acc,eval_acc,eval_ce,rate_estimate,distortion_analog,lr
void write_trace_csv(const TraceLog& trace, std::ostream& out);

struct TightnessSample {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  double vib_total = 0.0;
  double vub_total = 0.0;
  double min_term = 0.0;
};

struct TrainResult {
  Model model;
  TraceLog trace;
  double label_entropy = 0.0;
  std::vector<TightnessSample> tightness;
};

/// Thrown when a batch loss or gradient becomes non-finite. Carries the
/// trace up to the failing epoch and where it happened.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(std::size_t epoch, std::size_t batch, TraceLog trace);

  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }
  const TraceLog& trace() const { return trace_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
  TraceLog trace_;
};

TrainResult train(const Model& model, const Dataset& train_set, const Dataset& eval_set,
                  const TrainConfig& config);

}  // namespace vub
