#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vub/random.hpp"

// Exact information quantities on finite distributions, and the rate /
// distortion bounds evaluated on them. All values in nats; 0 log 0 := 0.
//
// Two trade-off conventions appear here:
//   bound evaluators:  L_IB = beta * I(Z;X) - I(Z;Y)
//   ib_curve:          L    = I(Z;X) - beta * I(Z;Y)
// so a curve point at beta corresponds to a bound-evaluator beta of 1/beta.

namespace vub::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kChannelFloor = 1e-12;

/// Raised when a log-ratio has zero in the denominator but mass in the numerator.
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// P(x, y): rows x, columns y.
class DiscreteJoint {
 public:
  explicit DiscreteJoint(MatrixXd table);
  const MatrixXd& table() const { return table_; }
  VectorXd marginal_x() const { return table_.rowwise().sum(); }
  VectorXd marginal_y() const { return table_.colwise().sum().transpose(); }
  Eigen::Index nx() const { return table_.rows(); }
  Eigen::Index ny() const { return table_.cols(); }

 private:
  MatrixXd table_;
};

enum class ChannelFloor { apply, none };

/// Row-stochastic channel: rows are the conditioning value. With
/// ChannelFloor::apply entries are floored at 1e-12 and rows renormalized.
class DiscreteChannel {
 public:
  explicit DiscreteChannel(MatrixXd table, ChannelFloor floor = ChannelFloor::apply);
  const MatrixXd& table() const { return table_; }
  Eigen::Index inputs() const { return table_.rows(); }
  Eigen::Index outputs() const { return table_.cols(); }

 private:
  MatrixXd table_;
};

class DiscretePrior {
 public:
  explicit DiscretePrior(VectorXd p);
  const VectorXd& probs() const { return p_; }

 private:
  VectorXd p_;
};

/// Joint P*(x,y), encoder E(z|x), classifier C(y|z) and prior R(z).
struct DiscreteInstance {
  DiscreteInstance(DiscreteJoint joint, DiscreteChannel encoder, DiscreteChannel classifier,
                   DiscretePrior prior);

  DiscreteJoint joint;
  DiscreteChannel encoder;
  DiscreteChannel classifier;
  DiscretePrior prior;

  Eigen::Index nx() const { return joint.nx(); }
  Eigen::Index ny() const { return joint.ny(); }
  Eigen::Index nz() const { return encoder.outputs(); }
};

double entropy(const VectorXd& p);

/// KL(p || q); throws DivergenceError when q is zero where p is not.
double kl_divergence(const VectorXd& p, const VectorXd& q);

/// I(A;B) for a joint table; throws std::invalid_argument unless normalized.
double mutual_information(const MatrixXd& joint);

struct Induced {
  VectorXd p_z;
  MatrixXd joint_zx;  // P(z, x)
  MatrixXd joint_yz;  // P(y, z)
};

Induced induced_distributions(const DiscreteInstance& inst);

double l_ib_exact(const DiscreteInstance& inst, double beta);

/// E_x KL(E(.|x) || R) = I(Z;X) + KL(P(z) || R).
double rate_bound_exact(const DiscreteInstance& inst);

struct DistortionBound {
  double ce_term = 0.0;          // sum P(x,y) E(z|x) log C(y|z)
  double h_y = 0.0;              // H(Y)
  double h_c_y_given_z = 0.0;    // classifier conditional entropy under P(z)
  double bound = 0.0;            // ce_term + min(h_y, h_c_y_given_z) <= I(Z;Y)
  double min_term() const { return h_y < h_c_y_given_z ? h_y : h_c_y_given_z; }
};

DistortionBound distortion_bound_exact(const DiscreteInstance& inst);

/// How the min{H(Y), H_c(Y|Z)} term enters the upper bound. `subtract_min`
/// gives the bound that is tighter than VIB; `add_min` is the other printed
/// reading, kept to demonstrate that it is looser.
enum class SignConvention { subtract_min, add_min };

double l_vib_exact(const DiscreteInstance& inst, double beta);
double l_vub_exact(const DiscreteInstance& inst, double beta,
                   SignConvention sign = SignConvention::subtract_min);

inline constexpr double kOrderingTolerance = 1e-9;

struct OrderingEntry {
  double beta = 0.0;
  double l_ib = 0.0;
  double l_vub = 0.0;
  double l_vib = 0.0;
  bool upper_bound_holds = false;  // l_ib <= l_vub
  bool chain_holds = false;        // l_ib <= l_vub <= l_vib
};

struct OrderingReport {
  std::vector<OrderingEntry> entries;
  double gap = 0.0;  // l_vib - l_vub under subtract_min; independent of beta
  SignConvention sign = SignConvention::subtract_min;

  bool all_chain_hold() const;
  bool all_upper_bound_hold() const;
};

OrderingReport verify_ordering(const DiscreteInstance& inst, std::span<const double> betas,
                               SignConvention sign = SignConvention::subtract_min);

struct CurvePoint {
  double beta = 0.0;
  double rate = 0.0;        // I(Z;X)
  double distortion = 0.0;  // I(Z;Y)
  bool converged = false;
  std::size_t iterations = 0;
};

/// Iterative self-consistent IB solver over an ascending beta grid using
/// L = I(Z;X) - beta I(Z;Y). Each point is warm-started from the previous one.
std::vector<CurvePoint> ib_curve(const DiscreteJoint& joint, std::size_t z_card,
                                 std::span<const double> beta_grid, std::size_t iters, double tol,
                                 std::uint64_t seed = 0);

struct InstanceSizes {
  std::size_t x = 1;
  std::size_t y = 1;
  std::size_t z = 1;
};

/// Joint, encoder rows, classifier rows and prior from symmetric
/// Dirichlet(concentration), floored at 1e-12.
DiscreteInstance random_instance(std::uint64_t seed, InstanceSizes sizes, double concentration);

/// Symmetric Dirichlet draw of length n, floored at 1e-12 and renormalized.
VectorXd sample_dirichlet(Rng& rng, std::size_t n, double concentration);

}  // namespace vub::oracle
