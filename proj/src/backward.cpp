#include "vub/backward.hpp"

#include <stdexcept>
#include <string>

namespace vub {

namespace {

// Chain rule from the head logits and the distribution parameters down to
// the input. Adds parameter gradients scaled by `weight` into `grads` when
// it is non-null; returns d/dx.
VectorXd propagate(const Model& model, const ForwardRecord& r, const VectorXd& d_logits,
                   const VectorXd& d_mu_direct, const VectorXd& d_logvar_direct, double weight,
                   Gradients* grads) {
  const auto k = static_cast<Eigen::Index>(model.dims.latent);

  const VectorXd d_z = model.head_w.transpose() * d_logits;
  const Eigen::ArrayXd sigma = (0.5 * r.params.logvar.array()).exp();

  VectorXd d_out(2 * k);
  d_out.head(k) = d_z + d_mu_direct;
  const Eigen::ArrayXd d_logvar =
      d_z.array() * r.eps.array() * 0.5 * sigma + d_logvar_direct.array();
  const Eigen::ArrayXd raw = r.encoder_out.tail(k).array();
  const Eigen::ArrayXd pass = ((raw >= kLogvarMin) && (raw <= kLogvarMax)).cast<double>();
  d_out.tail(k) = (d_logvar * pass).matrix();

  const VectorXd d_hidden = model.enc_w2.transpose() * d_out;
  const VectorXd d_pre =
      (d_hidden.array() * (r.hidden_pre.array() > 0.0).cast<double>()).matrix();

  if (grads != nullptr) {
    grads->head_w.noalias() += weight * d_logits * r.z.transpose();
    grads->head_b.noalias() += weight * d_logits;
    grads->enc_w2.noalias() += weight * d_out * r.hidden.transpose();
    grads->enc_b2.noalias() += weight * d_out;
    grads->enc_w1.noalias() += weight * d_pre * r.x.transpose();
    grads->enc_b1.noalias() += weight * d_pre;
  }
  return model.enc_w1.transpose() * d_pre;
}

// d/dlogits of a function of p = softmax(logits), given d/dp.
VectorXd softmax_pullback(const VectorXd& p, const VectorXd& d_p) {
  return (p.array() * (d_p.array() - p.dot(d_p))).matrix();
}

}  // namespace

BackwardResult backward(const Model& model, std::span<const ForwardRecord> records,
                        std::span<const int> labels, const LossSpec& spec) {
  if (records.empty()) throw std::invalid_argument("backward: empty batch");
  if (records.size() != labels.size()) {
    throw std::invalid_argument("backward: records and labels differ in length");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= model.dims.n_classes) {
      throw std::invalid_argument("backward: label " + std::to_string(y) + " out of range");
    }
  }

  BackwardResult out;
  out.loss = spec.kind == LossKind::vub
                 ? vub_loss(records, labels, spec.beta, spec.label_entropy)
                 : vib_loss(records, labels, spec.beta);
  out.grads = Gradients::zeros(model.dims);

  const double weight = 1.0 / static_cast<double>(records.size());
  for (std::size_t n = 0; n < records.size(); ++n) {
    const ForwardRecord& r = records[n];
    VectorXd d_p = cross_entropy(r.p, labels[n]).d_p;
    if (spec.kind == LossKind::vub && out.loss.branch[n] == MinBranch::classifier_entropy) {
      d_p -= categorical_entropy(r.p).d_p;
    }
    const VectorXd d_logits = softmax_pullback(r.p, d_p);
    const KlTerm kl = kl_std_normal(r.params);
    propagate(model, r, d_logits, spec.beta * kl.d_mu, spec.beta * kl.d_logvar, weight,
              &out.grads);
  }
  return out;
}

VectorXd input_gradient(const Model& model, const ForwardRecord& record,
                        const VectorXd& d_logits) {
  if (static_cast<std::size_t>(d_logits.size()) != model.dims.n_classes) {
    throw std::invalid_argument("input_gradient: logit gradient has wrong length");
  }
  const auto k = static_cast<Eigen::Index>(model.dims.latent);
  return propagate(model, record, d_logits, VectorXd::Zero(k), VectorXd::Zero(k), 1.0, nullptr);
}

}  // namespace vub
