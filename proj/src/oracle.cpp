#include "vub/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace vub::oracle {

namespace {

void require_nonnegative_finite(const MatrixXd& m, const char* what) {
  if (!m.allFinite() || (m.array() < 0.0).any()) {
    throw std::invalid_argument(std::string(what) + ": entries must be finite and >= 0");
  }
}

void require_normalized(double sum, const char* what) {
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                std::to_string(sum) + ", not 1");
  }
}

MatrixXd row_normalize(MatrixXd m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) m.row(r) /= m.row(r).sum();
  return m;
}

// Conditional entropy of a channel row, with 0 log 0 = 0.
double row_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (row(i) > 0.0) h -= row(i) * std::log(row(i));
  }
  return h;
}

double lagrangian(double rate, double distortion, double beta) { return rate - beta * distortion; }

}  // namespace

DiscreteJoint::DiscreteJoint(MatrixXd table) : table_(std::move(table)) {
  if (table_.size() == 0) throw std::invalid_argument("DiscreteJoint: empty table");
  require_nonnegative_finite(table_, "DiscreteJoint");
  const double sum = table_.sum();
  require_normalized(sum, "DiscreteJoint");
  table_ /= sum;
}

DiscreteChannel::DiscreteChannel(MatrixXd table, ChannelFloor floor) : table_(std::move(table)) {
  if (table_.size() == 0) throw std::invalid_argument("DiscreteChannel: empty table");
  require_nonnegative_finite(table_, "DiscreteChannel");
  for (Eigen::Index r = 0; r < table_.rows(); ++r) {
    require_normalized(table_.row(r).sum(), "DiscreteChannel row");
  }
  if (floor == ChannelFloor::apply) table_ = table_.cwiseMax(kChannelFloor);
  table_ = row_normalize(std::move(table_));
}

DiscretePrior::DiscretePrior(VectorXd p) : p_(std::move(p)) {
  if (p_.size() == 0) throw std::invalid_argument("DiscretePrior: empty vector");
  require_nonnegative_finite(p_, "DiscretePrior");
  const double sum = p_.sum();
  require_normalized(sum, "DiscretePrior");
  p_ /= sum;
}

DiscreteInstance::DiscreteInstance(DiscreteJoint joint_, DiscreteChannel encoder_,
                                   DiscreteChannel classifier_, DiscretePrior prior_)
    : joint(std::move(joint_)),
      encoder(std::move(encoder_)),
      classifier(std::move(classifier_)),
      prior(std::move(prior_)) {
  if (encoder.inputs() != joint.nx()) {
    throw std::invalid_argument("DiscreteInstance: encoder rows must equal |X|");
  }
  if (classifier.inputs() != encoder.outputs()) {
    throw std::invalid_argument("DiscreteInstance: classifier rows must equal |Z|");
  }
  if (classifier.outputs() != joint.ny()) {
    throw std::invalid_argument("DiscreteInstance: classifier columns must equal |Y|");
  }
  if (prior.probs().size() != encoder.outputs()) {
    throw std::invalid_argument("DiscreteInstance: prior length must equal |Z|");
  }
}

double entropy(const VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) h -= p(i) * std::log(p(i));
  }
  return h;
}

double kl_divergence(const VectorXd& p, const VectorXd& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    if (q(i) <= 0.0) throw DivergenceError("kl_divergence: q is zero where p has mass");
    kl += p(i) * std::log(p(i) / q(i));
  }
  return kl;
}

double mutual_information(const MatrixXd& joint) {
  if (joint.size() == 0) throw std::invalid_argument("mutual_information: empty table");
  require_nonnegative_finite(joint, "mutual_information");
  require_normalized(joint.sum(), "mutual_information");
  const VectorXd pa = joint.rowwise().sum();
  const Eigen::RowVectorXd pb = joint.colwise().sum();
  double mi = 0.0;
  for (Eigen::Index a = 0; a < joint.rows(); ++a) {
    for (Eigen::Index b = 0; b < joint.cols(); ++b) {
      const double pab = joint(a, b);
      if (pab > 0.0) mi += pab * std::log(pab / (pa(a) * pb(b)));
    }
  }
  return std::max(mi, 0.0);
}

Induced induced_distributions(const DiscreteInstance& inst) {
  const MatrixXd& pxy = inst.joint.table();
  const MatrixXd& enc = inst.encoder.table();
  const VectorXd px = inst.joint.marginal_x();
  Induced out;
  // P(z,x) = P(x) E(z|x)
  out.joint_zx = (px.asDiagonal() * enc).transpose();
  out.p_z = out.joint_zx.rowwise().sum();
  // P(y,z) = sum_x P(x,y) E(z|x)
  out.joint_yz = pxy.transpose() * enc;
  return out;
}

double l_ib_exact(const DiscreteInstance& inst, double beta) {
  const Induced ind = induced_distributions(inst);
  return beta * mutual_information(ind.joint_zx) - mutual_information(ind.joint_yz);
}

double rate_bound_exact(const DiscreteInstance& inst) {
  const VectorXd px = inst.joint.marginal_x();
  const MatrixXd& enc = inst.encoder.table();
  const VectorXd& r = inst.prior.probs();
  double total = 0.0;
  for (Eigen::Index x = 0; x < enc.rows(); ++x) {
    for (Eigen::Index z = 0; z < enc.cols(); ++z) {
      const double mass = px(x) * enc(x, z);
      if (mass <= 0.0) continue;
      if (r(z) <= 0.0) {
        throw DivergenceError("rate_bound_exact: prior is zero where the encoder has mass (z=" +
                              std::to_string(z) + ")");
      }
      total += mass * std::log(enc(x, z) / r(z));
    }
  }
  return total;
}

DistortionBound distortion_bound_exact(const DiscreteInstance& inst) {
  const MatrixXd& pxy = inst.joint.table();
  const MatrixXd& enc = inst.encoder.table();
  const MatrixXd& cls = inst.classifier.table();
  const Induced ind = induced_distributions(inst);

  DistortionBound out;
  for (Eigen::Index y = 0; y < pxy.cols(); ++y) {
    for (Eigen::Index z = 0; z < enc.cols(); ++z) {
      const double mass = ind.joint_yz(y, z);
      if (mass <= 0.0) continue;
      if (cls(z, y) <= 0.0) {
        throw DivergenceError("distortion_bound_exact: classifier is zero on a supported (y,z)");
      }
      out.ce_term += mass * std::log(cls(z, y));
    }
  }
  out.h_y = entropy(inst.joint.marginal_y());
  for (Eigen::Index z = 0; z < enc.cols(); ++z) {
    out.h_c_y_given_z += ind.p_z(z) * row_entropy(cls.row(z));
  }
  out.bound = out.ce_term + out.min_term();
  return out;
}

double l_vib_exact(const DiscreteInstance& inst, double beta) {
  return beta * rate_bound_exact(inst) - distortion_bound_exact(inst).ce_term;
}

double l_vub_exact(const DiscreteInstance& inst, double beta, SignConvention sign) {
  const double min_term = distortion_bound_exact(inst).min_term();
  const double vib = l_vib_exact(inst, beta);
  return sign == SignConvention::subtract_min ? vib - min_term : vib + min_term;
}

bool OrderingReport::all_chain_hold() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.chain_holds; });
}

bool OrderingReport::all_upper_bound_hold() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const auto& e) { return e.upper_bound_holds; });
}

OrderingReport verify_ordering(const DiscreteInstance& inst, std::span<const double> betas,
                               SignConvention sign) {
  const Induced ind = induced_distributions(inst);
  const double i_zx = mutual_information(ind.joint_zx);
  const double i_zy = mutual_information(ind.joint_yz);
  const double rate = rate_bound_exact(inst);
  const DistortionBound dist = distortion_bound_exact(inst);
  const double min_term = dist.min_term();

  OrderingReport report;
  report.sign = sign;
  report.gap = sign == SignConvention::subtract_min ? min_term : -min_term;
  for (double beta : betas) {
    OrderingEntry e;
    e.beta = beta;
    e.l_ib = beta * i_zx - i_zy;
    e.l_vib = beta * rate - dist.ce_term;
    e.l_vub = sign == SignConvention::subtract_min ? e.l_vib - min_term : e.l_vib + min_term;
    e.upper_bound_holds = e.l_ib <= e.l_vub + kOrderingTolerance;
    e.chain_holds = e.upper_bound_holds && e.l_vub <= e.l_vib + kOrderingTolerance;
    report.entries.push_back(e);
  }
  return report;
}

VectorXd sample_dirichlet(Rng& rng, std::size_t n, double concentration) {
  if (!(concentration > 0.0)) {
    throw std::invalid_argument("sample_dirichlet: concentration must be > 0");
  }
  std::gamma_distribution<double> gamma(concentration, 1.0);
  VectorXd v(static_cast<Eigen::Index>(n));
  for (auto& g : v) g = gamma(rng);
  const double sum = v.sum();
  if (sum > 0.0) v /= sum;
  v = v.cwiseMax(kChannelFloor);
  return v / v.sum();
}

DiscreteInstance random_instance(std::uint64_t seed, InstanceSizes sizes, double concentration) {
  if (sizes.x == 0 || sizes.y == 0 || sizes.z == 0) {
    throw std::invalid_argument("random_instance: sizes must be >= 1");
  }
  const auto nx = static_cast<Eigen::Index>(sizes.x);
  const auto ny = static_cast<Eigen::Index>(sizes.y);
  const auto nz = static_cast<Eigen::Index>(sizes.z);
  Rng rng(seed);

  const VectorXd flat = sample_dirichlet(rng, sizes.x * sizes.y, concentration);
  MatrixXd joint = flat.reshaped<Eigen::RowMajor>(nx, ny);

  MatrixXd enc(nx, nz);
  for (Eigen::Index x = 0; x < nx; ++x) enc.row(x) = sample_dirichlet(rng, sizes.z, concentration);
  MatrixXd cls(nz, ny);
  for (Eigen::Index z = 0; z < nz; ++z) cls.row(z) = sample_dirichlet(rng, sizes.y, concentration);
  VectorXd prior = sample_dirichlet(rng, sizes.z, concentration);

  return DiscreteInstance(DiscreteJoint(std::move(joint)), DiscreteChannel(std::move(enc)),
                          DiscreteChannel(std::move(cls)), DiscretePrior(std::move(prior)));
}

namespace {

struct Fixpoint {
  MatrixXd encoder;  // q(z|x), rows x
  std::size_t iterations = 0;
  bool converged = false;
};

struct CurveInputs {
  VectorXd px;
  MatrixXd py_given_x;  // rows x
};

double curve_rate(const CurveInputs& in, const MatrixXd& q) {
  return mutual_information((in.px.asDiagonal() * q).eval());
}

double curve_distortion(const CurveInputs& in, const MatrixXd& q) {
  const MatrixXd pxy = in.px.asDiagonal() * in.py_given_x;
  return mutual_information((pxy.transpose() * q).eval());
}

// Self-consistent equations:
//   p(z)   = sum_x p(x) q(z|x)
//   p(y|z) = sum_x p(x) q(z|x) p(y|x) / p(z)
//   q(z|x) ∝ p(z) exp(-beta KL(p(y|x) || p(y|z)))
Fixpoint solve_point(const CurveInputs& in, MatrixXd q, double beta, std::size_t iters,
                     double tol) {
  const Eigen::Index nx = q.rows();
  const Eigen::Index nz = q.cols();
  const Eigen::Index ny = in.py_given_x.cols();
  const VectorXd py = in.py_given_x.transpose() * in.px;
  constexpr double tiny = 1e-300;

  Fixpoint out;
  for (std::size_t it = 0; it < iters; ++it) {
    const VectorXd pz = q.transpose() * in.px;
    MatrixXd py_given_z(nz, ny);
    for (Eigen::Index z = 0; z < nz; ++z) {
      if (pz(z) > tiny) {
        py_given_z.row(z) = (q.col(z).cwiseProduct(in.px)).transpose() * in.py_given_x / pz(z);
      } else {
        py_given_z.row(z) = py.transpose();
      }
    }

    MatrixXd next(nx, nz);
    for (Eigen::Index x = 0; x < nx; ++x) {
      Eigen::VectorXd logits(nz);
      for (Eigen::Index z = 0; z < nz; ++z) {
        double kl = 0.0;
        for (Eigen::Index y = 0; y < ny; ++y) {
          const double p = in.py_given_x(x, y);
          if (p > 0.0) kl += p * std::log(p / std::max(py_given_z(z, y), tiny));
        }
        logits(z) = pz(z) > 0.0 ? std::log(pz(z)) - beta * kl
                                : -std::numeric_limits<double>::infinity();
      }
      const double top = logits.maxCoeff();
      const Eigen::ArrayXd w = (logits.array() - top).exp();
      next.row(x) = (w / w.sum()).matrix().transpose();
    }

    const double change = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    out.iterations = it + 1;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  out.encoder = std::move(q);
  return out;
}

MatrixXd random_encoder(Rng& rng, Eigen::Index nx, std::size_t nz) {
  MatrixXd q(nx, static_cast<Eigen::Index>(nz));
  for (Eigen::Index x = 0; x < nx; ++x) q.row(x) = sample_dirichlet(rng, nz, 1.0);
  return q;
}

}  // namespace

std::vector<CurvePoint> ib_curve(const DiscreteJoint& joint, std::size_t z_card,
                                 std::span<const double> beta_grid, std::size_t iters, double tol,
                                 std::uint64_t seed) {
  if (z_card == 0) throw std::invalid_argument("ib_curve: z_card must be >= 1");
  if (iters == 0) throw std::invalid_argument("ib_curve: iters must be >= 1");
  std::vector<double> betas(beta_grid.begin(), beta_grid.end());
  for (double b : betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw std::invalid_argument("ib_curve: beta values must be finite and >= 0");
    }
  }
  std::sort(betas.begin(), betas.end());

  CurveInputs in;
  in.px = joint.marginal_x();
  in.py_given_x = joint.table();
  for (Eigen::Index x = 0; x < in.px.size(); ++x) {
    if (in.px(x) > 0.0) {
      in.py_given_x.row(x) /= in.px(x);
    } else {
      in.py_given_x.row(x).setConstant(1.0 / static_cast<double>(joint.ny()));
    }
  }

  Rng rng(seed);
  MatrixXd warm = random_encoder(rng, joint.nx(), z_card);
  std::vector<CurvePoint> curve;
  for (double beta : betas) {
    // Warm start, nudged off the collapsed fixed point so clusters can split,
    // plus one cold start; the lower Lagrangian wins.
    const MatrixXd nudged = row_normalize(0.99 * warm + 0.01 * random_encoder(rng, joint.nx(), z_card));
    Fixpoint best = solve_point(in, nudged, beta, iters, tol);
    Fixpoint cold = solve_point(in, random_encoder(rng, joint.nx(), z_card), beta, iters, tol);
    const double l_best =
        lagrangian(curve_rate(in, best.encoder), curve_distortion(in, best.encoder), beta);
    const double l_cold =
        lagrangian(curve_rate(in, cold.encoder), curve_distortion(in, cold.encoder), beta);
    if (l_cold < l_best) best = std::move(cold);

    CurvePoint pt;
    pt.beta = beta;
    pt.rate = curve_rate(in, best.encoder);
    pt.distortion = curve_distortion(in, best.encoder);
    pt.converged = best.converged;
    pt.iterations = best.iterations;
    curve.push_back(pt);
    warm = best.encoder;
  }
  return curve;
}

}  // namespace vub::oracle
