#include "vub/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "vub/format_error.hpp"
#include "vub/random.hpp"

namespace vub {

Dataset::Dataset(Eigen::MatrixXd features, std::vector<int> labels, std::size_t k)
    : features_(std::move(features)), labels_(std::move(labels)), k_(k) {
  if (labels_.empty()) throw std::invalid_argument("Dataset: needs at least one sample");
  if (static_cast<std::size_t>(features_.rows()) != labels_.size()) {
    throw std::invalid_argument("Dataset: feature rows and labels differ in count");
  }
  if (features_.cols() < 1) throw std::invalid_argument("Dataset: feature dimension must be >= 1");
  if (k_ < 1) throw std::invalid_argument("Dataset: class count must be >= 1");
  if (!features_.allFinite()) throw std::invalid_argument("Dataset: features must be finite");
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= k_) {
      throw std::invalid_argument("Dataset: label " + std::to_string(y) + " out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(indices.size()), features_.cols());
  std::vector<int> y;
  y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    f.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(indices[i]));
    y.push_back(labels_.at(indices[i]));
  }
  return Dataset(std::move(f), std::move(y), k_);
}

Dataset gen_gaussian_mixture(std::size_t k, std::size_t d, std::size_t n, double separation,
                             std::uint64_t seed) {
  if (k < 1 || d < 1 || n < k) {
    throw std::invalid_argument("gen_gaussian_mixture: need k >= 1, d >= 1 and n >= k");
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("gen_gaussian_mixture: separation must be finite and >= 0");
  }
  Rng rng(seed);
  const auto dd = static_cast<Eigen::Index>(d);
  const auto kk = static_cast<Eigen::Index>(k);

  // Means: pairwise distance between nearest means is 2 * separation.
  Eigen::MatrixXd means(kk, dd);
  if (k <= d) {
    const Eigen::MatrixXd g = Eigen::MatrixXd(standard_normal(rng, dd * kk).reshaped(dd, kk));
    const Eigen::MatrixXd frame = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                                  Eigen::MatrixXd::Identity(dd, kk);
    means = std::sqrt(2.0) * separation * frame.transpose();
  } else {
    Eigen::VectorXd dir = standard_normal(rng, dd);
    dir /= dir.norm();
    for (Eigen::Index c = 0; c < kk; ++c) {
      const double offset = static_cast<double>(c) - 0.5 * static_cast<double>(k - 1);
      means.row(c) = 2.0 * separation * offset * dir.transpose();
    }
  }

  std::vector<int> labels;
  labels.reserve(n);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t count = n / k + (c == 0 ? n % k : 0);
    labels.insert(labels.end(), count, static_cast<int>(c));
  }
  std::shuffle(labels.begin(), labels.end(), rng);

  Eigen::MatrixXd features(static_cast<Eigen::Index>(n), dd);
  for (std::size_t i = 0; i < n; ++i) {
    features.row(static_cast<Eigen::Index>(i)) =
        means.row(labels[i]) + standard_normal(rng, dd).transpose();
  }
  return Dataset(std::move(features), std::move(labels), k);
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) {
    throw FormatError(FormatErrorKind::malformed_header, 1, "missing vubds header");
  }
  const auto header = text::split_commas(line);
  if (header.size() != 5 || header[0] != "vubds" || header[1] != "v1") {
    throw FormatError(FormatErrorKind::malformed_header, 1,
                      "expected header 'vubds,v1,<n>,<d>,<k>'");
  }
  long long n = 0, d = 0, k = 0;
  try {
    n = text::parse_integer(header[2], 1);
    d = text::parse_integer(header[3], 1);
    k = text::parse_integer(header[4], 1);
  } catch (const FormatError& e) {
    throw FormatError(FormatErrorKind::malformed_header, 1, e.what());
  }
  if (n < 1 || d < 1 || k < 1) {
    throw FormatError(FormatErrorKind::malformed_header, 1, "n, d and k must all be >= 1");
  }

  Eigen::MatrixXd features(n, d);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    ++line_no;
    if (!std::getline(in, line)) {
      throw FormatError(FormatErrorKind::row_count, line_no,
                        "expected " + std::to_string(n) + " sample rows, found " +
                            std::to_string(i));
    }
    const auto fields = text::split_commas(line);
    if (static_cast<long long>(fields.size()) != d + 1) {
      throw FormatError(FormatErrorKind::row_length, line_no,
                        "expected " + std::to_string(d + 1) + " fields, got " +
                            std::to_string(fields.size()));
    }
    for (long long j = 0; j < d; ++j) {
      features(i, j) = text::parse_double(fields[static_cast<std::size_t>(j)], line_no);
    }
    const long long y = text::parse_integer(fields.back(), line_no);
    if (y >= k) {
      throw FormatError(FormatErrorKind::label_out_of_range, line_no,
                        "label " + std::to_string(y) + " not below k=" + std::to_string(k));
    }
    labels.push_back(static_cast<int>(y));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line != "\r") {
      throw FormatError(FormatErrorKind::row_count, line_no, "unexpected data after last row");
    }
  }
  return Dataset(std::move(features), std::move(labels), static_cast<std::size_t>(k));
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open " + path.string());
  return read_dataset(in);
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  out << "vubds,v1," << dataset.size() << ',' << dataset.dim() << ',' << dataset.classes()
      << '\n';
  const Eigen::MatrixXd& f = dataset.features();
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) out << text::format_double(f(i, j)) << ',';
    out << dataset.labels()[static_cast<std::size_t>(i)] << '\n';
  }
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatErrorKind::io, 0, "cannot write " + path.string());
  write_dataset(dataset, out);
  if (!out) throw FormatError(FormatErrorKind::io, 0, "write failed for " + path.string());
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double train_fraction,
                                  std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw std::invalid_argument("split: fraction leaves an empty split");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> eval(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {dataset.subset(train), dataset.subset(eval)};
}

Standardizer Standardizer::fit(const Dataset& train) {
  const Eigen::MatrixXd& f = train.features();
  Standardizer s;
  s.mean = f.colwise().mean();
  const Eigen::MatrixXd centered = f.rowwise() - s.mean;
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(f.rows())).sqrt();
  // constant features pass through centred but unscaled
  s.scale = s.scale.unaryExpr([](double v) { return v > 0.0 ? v : 1.0; });
  return s;
}

Dataset Standardizer::apply(const Dataset& dataset) const {
  if (dataset.features().cols() != mean.size()) {
    throw std::invalid_argument("Standardizer: dimension mismatch");
  }
  Eigen::MatrixXd f =
      (dataset.features().rowwise() - mean).array().rowwise() / scale.array();
  return Dataset(std::move(f), dataset.labels(), dataset.classes());
}

}  // namespace vub
