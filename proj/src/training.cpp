#include "vub/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>

#include "vub/backward.hpp"
#include "vub/format_error.hpp"
#include "vub/random.hpp"

namespace vub {

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348;
constexpr std::uint64_t kNoiseStream = 0x4e4f;
constexpr std::uint64_t kEvalStream = 0x4556;

void check_dims(const Model& model, const Dataset& data, const char* what) {
  if (data.dim() != model.dims.d_in) {
    throw std::invalid_argument(std::string(what) + ": dataset has " +
                                std::to_string(data.dim()) + " features, model expects " +
                                std::to_string(model.dims.d_in));
  }
  if (data.classes() > model.dims.n_classes) {
    throw std::invalid_argument(std::string(what) + ": dataset has more classes than the model");
  }
}

std::string diverged_message(std::size_t epoch, std::size_t batch) {
  return "training diverged: non-finite loss or gradient at epoch " + std::to_string(epoch) +
         ", batch " + std::to_string(batch);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be >= 0");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) {
    throw std::invalid_argument("base_lr must be > 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw std::invalid_argument("lr_decay must lie in (0, 1]");
  }
  if (decay_every < 1) throw std::invalid_argument("decay_every must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (mc_samples_train < 1 || mc_samples_eval < 1) {
    throw std::invalid_argument("mc sample counts must be >= 1");
  }
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  const auto steps = static_cast<double>(epoch / config.decay_every);
  return config.base_lr * std::pow(config.lr_decay, steps);
}

void optimizer_step(VectorXd& params, const VectorXd& grads, OptimizerState& state, double lr,
                    const TrainConfig& config) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer_step: parameter and gradient sizes differ");
  }
  if (config.optimizer == OptimizerKind::sgd) {
    params -= lr * grads;
    return;
  }
  if (state.m.size() == 0) {
    state.m = VectorXd::Zero(params.size());
    state.v = VectorXd::Zero(params.size());
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("optimizer_step: optimizer state has the wrong size");
  }
  const AdamParams& a = config.adam;
  ++state.t;
  state.m = a.beta1 * state.m + (1.0 - a.beta1) * grads;
  state.v = a.beta2 * state.v + (1.0 - a.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(a.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(a.beta2, static_cast<double>(state.t));
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + a.epsilon);
}

EvalMetrics evaluate(const Model& model, const Dataset& dataset, std::size_t mc_samples,
                     std::uint64_t seed) {
  check_dims(model, dataset, "evaluate");
  if (mc_samples < 1) throw std::invalid_argument("evaluate: mc_samples must be >= 1");
  const auto k = static_cast<Eigen::Index>(model.dims.latent);
  EvalMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const VectorXd x = dataset.row(i);
    const GaussianParams params = encode(model, x);
    Rng rng(derive_seed(seed, i));
    VectorXd p = VectorXd::Zero(static_cast<Eigen::Index>(model.dims.n_classes));
    for (std::size_t s = 0; s < mc_samples; ++s) {
      p += classify(model, reparameterize(params, standard_normal(rng, k)));
    }
    p /= static_cast<double>(mc_samples);
    const int y = dataset.labels()[i];
    if (argmax(p) == static_cast<std::size_t>(y)) ++correct;
    m.mean_ce += cross_entropy(p, y).value;
    m.mean_classifier_entropy += categorical_entropy(p).value;
  }
  const double n = static_cast<double>(dataset.size());
  m.accuracy = static_cast<double>(correct) / n;
  m.mean_ce /= n;
  m.mean_classifier_entropy /= n;
  return m;
}

double prior_entropy(std::size_t latent) {
  return 0.5 * static_cast<double>(latent) * std::log(2.0 * std::numbers::pi * std::numbers::e);
}

InfoPlanePoint info_plane_point(const Model& model, const Dataset& dataset, std::uint64_t seed) {
  check_dims(model, dataset, "info_plane_point");
  const double log_2pie = std::log(2.0 * std::numbers::pi * std::numbers::e);
  InfoPlanePoint pt;
  pt.prior_entropy = prior_entropy(model.dims.latent);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const GaussianParams params = encode(model, dataset.row(i));
    pt.conditional_entropy += 0.5 * (log_2pie + params.logvar.array()).sum();
  }
  pt.conditional_entropy /= static_cast<double>(dataset.size());
  pt.rate_estimate = pt.prior_entropy - pt.conditional_entropy;
  const double ce = evaluate(model, dataset, 1, seed).mean_ce;
  pt.distortion_analog = ce < 1.0 / kDistortionAnalogCap ? kDistortionAnalogCap : 1.0 / ce;
  return pt;
}

void write_trace_csv(const TraceLog& trace, std::ostream& out) {
  out << "epoch,loss_total,loss_kl,loss_ce,loss_min_term,train_acc,eval_acc,eval_ce,"
         "rate_estimate,distortion_analog,lr\n";
  for (const TraceRecord& r : trace) {
    out << r.epoch;
    for (double v : {r.train_loss.total, r.train_loss.kl, r.train_loss.ce,
                     r.train_loss.min_entropy_term, r.train_acc, r.eval_acc, r.eval_ce,
                     r.rate_estimate, r.distortion_analog, r.lr}) {
      out << ',' << text::format_double(v);
    }
    out << '\n';
  }
}

TrainingDiverged::TrainingDiverged(std::size_t epoch, std::size_t batch, TraceLog trace)
    : std::runtime_error(diverged_message(epoch, batch)),
      epoch_(epoch),
      batch_(batch),
      trace_(std::move(trace)) {}

TrainResult train(const Model& model, const Dataset& train_set, const Dataset& eval_set,
                  const TrainConfig& config) {
  config.validate();
  check_dims(model, train_set, "train");
  check_dims(model, eval_set, "train (eval split)");

  TrainResult result;
  result.model = model;
  result.label_entropy = label_entropy(train_set.labels(), model.dims.n_classes);
  if (config.epochs == 0) return result;

  const LossSpec spec{config.loss_kind, config.beta, result.label_entropy};
  const auto k = static_cast<Eigen::Index>(model.dims.latent);
  const std::size_t n = train_set.size();

  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng noise_rng(derive_seed(config.seed, kNoiseStream));
  OptimizerState opt;
  VectorXd flat = result.model.flatten();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<ForwardRecord> records;
  std::vector<int> labels;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    TraceRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    std::size_t correct = 0;
    std::size_t batch_index = 0;

    for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      records.clear();
      labels.clear();
      for (std::size_t j = start; j < stop; ++j) {
        const std::size_t i = order[j];
        const VectorXd x = train_set.row(i);
        const int y = train_set.labels()[i];
        for (std::size_t s = 0; s < config.mc_samples_train; ++s) {
          records.push_back(forward(result.model, x, standard_normal(noise_rng, k)));
          labels.push_back(y);
          if (s == 0 && argmax(records.back().p) == static_cast<std::size_t>(y)) ++correct;
        }
      }

      const BackwardResult br = backward(result.model, records, labels, spec);
      const VectorXd grads = br.grads.flatten();
      if (!std::isfinite(br.loss.total) || !grads.allFinite()) {
        throw TrainingDiverged(epoch, batch_index, std::move(result.trace));
      }

      if (config.record_tightness) {
        const LossBreakdown vib = vib_loss(records, labels, config.beta);
        const LossBreakdown vub = vub_loss(records, labels, config.beta, result.label_entropy);
        result.tightness.push_back(
            {epoch, batch_index, vib.total, vub.total, vub.min_entropy_term});
      }

      const double w = static_cast<double>(stop - start);
      rec.train_loss.kl += w * br.loss.kl;
      rec.train_loss.ce += w * br.loss.ce;
      rec.train_loss.min_entropy_term += w * br.loss.min_entropy_term;
      rec.train_loss.total += w * br.loss.total;

      optimizer_step(flat, grads, opt, lr, config);
      result.model.assign_flat(flat);
    }

    const double nn = static_cast<double>(n);
    rec.train_loss.kl /= nn;
    rec.train_loss.ce /= nn;
    rec.train_loss.min_entropy_term /= nn;
    rec.train_loss.total /= nn;
    rec.train_acc = static_cast<double>(correct) / nn;

    const std::uint64_t eval_seed = derive_seed(config.seed, kEvalStream + epoch);
    const EvalMetrics em = evaluate(result.model, eval_set, config.mc_samples_eval, eval_seed);
    rec.eval_acc = em.accuracy;
    rec.eval_ce = em.mean_ce;
    const InfoPlanePoint ip = info_plane_point(result.model, eval_set, eval_seed);
    rec.rate_estimate = ip.rate_estimate;
    rec.distortion_analog = ip.distortion_analog;
    result.trace.push_back(std::move(rec));
  }
  return result;
}

}  // namespace vub
