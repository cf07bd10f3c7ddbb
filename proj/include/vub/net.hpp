#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace vub {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Layer sizes of the stochastic classifier: input, hidden, latent (K) and
/// number of classes. The encoder emits 2K values: K means then K log-variances.
struct Dims {
  std::size_t d_in = 0;
  std::size_t hidden = 0;
  std::size_t latent = 0;
  std::size_t n_classes = 0;

  bool operator==(const Dims&) const = default;
};

/// Default sizes used for embedding heads: hidden = d_in, K = d_in / 2.
Dims default_dims(std::size_t d_in, std::size_t n_classes);

/// Parameters of the stochastic classifier.
///
///   h   = relu(enc_w1 x + enc_b1)
///   out = enc_w2 h + enc_b2            (mu = out[0, K), logvar = clamp(out[K, 2K)))
///   z   = mu + eps * exp(logvar / 2)
///   p   = softmax(head_w z + head_b)
///
/// Gradients share this layout.
struct Model {
  Dims dims;
  MatrixXd enc_w1;  // hidden x d_in
  VectorXd enc_b1;
  MatrixXd enc_w2;  // 2K x hidden
  VectorXd enc_b2;
  MatrixXd head_w;  // n_classes x K
  VectorXd head_b;

  /// All-zero parameters with the given shapes.
  static Model zeros(const Dims& dims);

  std::size_t parameter_count() const;

  /// Visits every parameter tensor in serialization order. Matrices are
  /// column-major in memory; callers that need row-major order do it themselves.
  void for_each_tensor(const std::function<void(Eigen::Ref<MatrixXd>)>& fn);
  void for_each_tensor(const std::function<void(const Eigen::Ref<const MatrixXd>&)>& fn) const;

  VectorXd flatten() const;
  void assign_flat(const VectorXd& flat);

  bool all_finite() const;

  bool operator==(const Model& other) const;
};

using Gradients = Model;

struct GaussianParams {
  VectorXd mu;
  VectorXd logvar;
};

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct ForwardRecord {
  VectorXd x;
  GaussianParams params;
  VectorXd eps;
  VectorXd z;
  VectorXd p;

  // backward caches
  VectorXd hidden_pre;  // enc_w1 x + enc_b1
  VectorXd hidden;      // relu(hidden_pre)
  VectorXd encoder_out; // raw enc_w2 h + enc_b2, before clamping
  VectorXd logits;
};

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
Model init_model(std::size_t d_in, std::size_t hidden, std::size_t latent, std::size_t n_classes,
                 std::uint64_t seed);

GaussianParams encode(const Model& model, const VectorXd& x);
VectorXd reparameterize(const GaussianParams& params, const VectorXd& eps);
VectorXd classify(const Model& model, const VectorXd& z);
ForwardRecord forward(const Model& model, const VectorXd& x, const VectorXd& eps);

/// Max-subtracted softmax.
VectorXd softmax(const VectorXd& logits);

/// Lowest index among maxima.
std::size_t argmax(const VectorXd& v);

}  // namespace vub
