#include "vub/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vub/random.hpp"

namespace vub {

namespace {

void require_length(const VectorXd& v, std::size_t expected, const char* what) {
  if (static_cast<std::size_t>(v.size()) != expected) {
    throw std::invalid_argument(std::string(what) + ": expected length " + std::to_string(expected) +
                                ", got " + std::to_string(v.size()));
  }
}

void fill_glorot(MatrixXd& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  // row-major fill so the draw order matches the serialized layout
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = (2.0 * rng.uniform() - 1.0) * a;
  }
}

}  // namespace

Dims default_dims(std::size_t d_in, std::size_t n_classes) {
  if (d_in == 0 || d_in % 2 != 0) {
    throw std::invalid_argument("default_dims: d_in must be even and positive");
  }
  return Dims{d_in, d_in, d_in / 2, n_classes};
}

Model Model::zeros(const Dims& dims) {
  const auto d = static_cast<Eigen::Index>(dims.d_in);
  const auto h = static_cast<Eigen::Index>(dims.hidden);
  const auto k = static_cast<Eigen::Index>(dims.latent);
  const auto c = static_cast<Eigen::Index>(dims.n_classes);
  Model m;
  m.dims = dims;
  m.enc_w1 = MatrixXd::Zero(h, d);
  m.enc_b1 = VectorXd::Zero(h);
  m.enc_w2 = MatrixXd::Zero(2 * k, h);
  m.enc_b2 = VectorXd::Zero(2 * k);
  m.head_w = MatrixXd::Zero(c, k);
  m.head_b = VectorXd::Zero(c);
  return m;
}

std::size_t Model::parameter_count() const {
  return static_cast<std::size_t>(enc_w1.size() + enc_b1.size() + enc_w2.size() + enc_b2.size() +
                                  head_w.size() + head_b.size());
}

void Model::for_each_tensor(const std::function<void(Eigen::Ref<MatrixXd>)>& fn) {
  fn(enc_w1);
  fn(enc_b1);
  fn(enc_w2);
  fn(enc_b2);
  fn(head_w);
  fn(head_b);
}

void Model::for_each_tensor(
    const std::function<void(const Eigen::Ref<const MatrixXd>&)>& fn) const {
  fn(enc_w1);
  fn(enc_b1);
  fn(enc_w2);
  fn(enc_b2);
  fn(head_w);
  fn(head_b);
}

VectorXd Model::flatten() const {
  VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  for_each_tensor([&](const Eigen::Ref<const MatrixXd>& t) {
    flat.segment(offset, t.size()) = t.reshaped();
    offset += t.size();
  });
  return flat;
}

void Model::assign_flat(const VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw std::invalid_argument("assign_flat: parameter vector has wrong length");
  }
  Eigen::Index offset = 0;
  for_each_tensor([&](Eigen::Ref<MatrixXd> t) {
    t.reshaped() = flat.segment(offset, t.size());
    offset += t.size();
  });
}

bool Model::all_finite() const {
  bool finite = true;
  for_each_tensor([&](const Eigen::Ref<const MatrixXd>& t) { finite = finite && t.allFinite(); });
  return finite;
}

bool Model::operator==(const Model& other) const {
  return dims == other.dims && enc_w1 == other.enc_w1 && enc_b1 == other.enc_b1 &&
         enc_w2 == other.enc_w2 && enc_b2 == other.enc_b2 && head_w == other.head_w &&
         head_b == other.head_b;
}

Model init_model(std::size_t d_in, std::size_t hidden, std::size_t latent, std::size_t n_classes,
                 std::uint64_t seed) {
  if (d_in == 0 || hidden == 0 || latent == 0 || n_classes == 0) {
    throw std::invalid_argument("init_model: all dimensions must be >= 1");
  }
  Model m = Model::zeros(Dims{d_in, hidden, latent, n_classes});
  Rng rng(seed);
  fill_glorot(m.enc_w1, rng);
  fill_glorot(m.enc_w2, rng);
  fill_glorot(m.head_w, rng);
  return m;
}

GaussianParams encode(const Model& model, const VectorXd& x) {
  require_length(x, model.dims.d_in, "encode");
  if (!x.allFinite()) throw std::invalid_argument("encode: input has non-finite entries");
  const auto k = static_cast<Eigen::Index>(model.dims.latent);
  const VectorXd hidden = (model.enc_w1 * x + model.enc_b1).cwiseMax(0.0);
  const VectorXd out = model.enc_w2 * hidden + model.enc_b2;
  return GaussianParams{out.head(k), out.tail(k).cwiseMax(kLogvarMin).cwiseMin(kLogvarMax)};
}

VectorXd reparameterize(const GaussianParams& params, const VectorXd& eps) {
  require_length(eps, static_cast<std::size_t>(params.mu.size()), "reparameterize");
  if (params.logvar.size() != params.mu.size()) {
    throw std::invalid_argument("reparameterize: mu/logvar length mismatch");
  }
  return params.mu + eps.cwiseProduct((0.5 * params.logvar.array()).exp().matrix());
}

VectorXd softmax(const VectorXd& logits) {
  const double top = logits.maxCoeff();
  VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

std::size_t argmax(const VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

VectorXd classify(const Model& model, const VectorXd& z) {
  require_length(z, model.dims.latent, "classify");
  return softmax(model.head_w * z + model.head_b);
}

ForwardRecord forward(const Model& model, const VectorXd& x, const VectorXd& eps) {
  require_length(x, model.dims.d_in, "forward");
  require_length(eps, model.dims.latent, "forward (noise)");
  if (!x.allFinite()) throw std::invalid_argument("forward: input has non-finite entries");

  const auto k = static_cast<Eigen::Index>(model.dims.latent);
  ForwardRecord r;
  r.x = x;
  r.eps = eps;
  r.hidden_pre = model.enc_w1 * x + model.enc_b1;
  r.hidden = r.hidden_pre.cwiseMax(0.0);
  r.encoder_out = model.enc_w2 * r.hidden + model.enc_b2;
  r.params.mu = r.encoder_out.head(k);
  r.params.logvar = r.encoder_out.tail(k).cwiseMax(kLogvarMin).cwiseMin(kLogvarMax);
  r.z = reparameterize(r.params, eps);
  r.logits = model.head_w * r.z + model.head_b;
  r.p = softmax(r.logits);
  return r;
}

}  // namespace vub
