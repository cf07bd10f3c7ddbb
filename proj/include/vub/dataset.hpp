#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace vub {

/// Dense feature rows with integer labels in [0, k).
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, std::vector<int> labels, std::size_t k);

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  std::size_t classes() const { return k_; }

  Eigen::VectorXd row(std::size_t i) const {
    return features_.row(static_cast<Eigen::Index>(i)).transpose();
  }

  /// Rows in the given order.
  Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  std::size_t k_;
};

/// Isotropic unit-variance gaussian classes. `separation` is the distance from
/// each class mean to the midpoint between any two nearest means, in noise
/// standard deviations. Means sit on a random orthonormal frame when k <= d,
/// otherwise evenly spaced along a random direction.
Dataset gen_gaussian_mixture(std::size_t k, std::size_t d, std::size_t n, double separation,
                             std::uint64_t seed);

/// vubds text format: header `vubds,v1,<n>,<d>,<k>`, then one line per sample
/// of d floats and an integer label, comma separated.
Dataset load_dataset(const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
void write_dataset(const Dataset& dataset, std::ostream& out);

/// Seeded permutation, then the first round(train_fraction * n) rows train.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed);

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Dataset& train);
  Dataset apply(const Dataset& dataset) const;
};

}  // namespace vub
