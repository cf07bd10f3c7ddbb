#pragma once

#include <span>

#include "vub/losses.hpp"
#include "vub/net.hpp"

namespace vub {

struct LossSpec {
  LossKind kind = LossKind::vub;
  double beta = 0.0;
  double label_entropy = 0.0;  // H(Y-hat); ignored for VIB
};

struct BackwardResult {
  Gradients grads;
  LossBreakdown loss;
};

/// Exact gradient of the mean per-sample loss with the noise in each record
/// held fixed. For VUB the entropy term carries gradient only on samples
/// whose classifier-entropy branch is active.
BackwardResult backward(const Model& model, std::span<const ForwardRecord> records,
                        std::span<const int> labels, const LossSpec& spec);

/// d(loss)/dx for a single record, given d(loss)/d(logits) at the head and
/// with the encoder terms contributing nothing else. Used by the attacks.
VectorXd input_gradient(const Model& model, const ForwardRecord& record, const VectorXd& d_logits);

}  // namespace vub
