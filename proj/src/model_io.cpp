#include "vub/model_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vub/format_error.hpp"

namespace vub {

namespace {

constexpr std::array<char, 5> kMagic = {'V', 'U', 'B', 'M', '1'};
constexpr std::uint64_t kMaxDim = 1ULL << 24;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
    throw FormatError(FormatErrorKind::truncated, 0, "VUBM1: file ends inside the header");
  }
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

// Row-major traversal matching the documented layout.
template <typename Fn>
void for_each_scalar_row_major(Model& m, Fn&& fn) {
  m.for_each_tensor([&](Eigen::Ref<MatrixXd> t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) fn(t(r, c));
    }
  });
}

}  // namespace

void write_model(const Model& model, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, model.dims.d_in);
  put_u64(out, model.dims.hidden);
  put_u64(out, model.dims.latent);
  put_u64(out, model.dims.n_classes);
  Model copy = model;
  for_each_scalar_row_major(copy, [&](double& v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); });
}

Model read_model(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw FormatError(FormatErrorKind::bad_magic, 0, "not a VUBM1 model file");
  }
  Dims dims;
  dims.d_in = get_u64(in);
  dims.hidden = get_u64(in);
  dims.latent = get_u64(in);
  dims.n_classes = get_u64(in);
  for (std::uint64_t d : {dims.d_in, dims.hidden, dims.latent, dims.n_classes}) {
    if (d == 0 || d > kMaxDim) {
      throw FormatError(FormatErrorKind::malformed_header, 0, "VUBM1: implausible dimension");
    }
  }
  Model m = Model::zeros(dims);
  for_each_scalar_row_major(m, [&](double& v) {
    std::array<unsigned char, 8> bytes{};
    if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) {
      throw FormatError(FormatErrorKind::truncated, 0, "VUBM1: file ends inside the parameters");
    }
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  });
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError(FormatErrorKind::truncated, 0, "VUBM1: trailing bytes after parameters");
  }
  if (!m.all_finite()) {
    throw FormatError(FormatErrorKind::bad_number, 0, "VUBM1: non-finite parameter");
  }
  return m;
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatErrorKind::io, 0, "cannot write " + path.string());
  write_model(model, out);
  if (!out) throw FormatError(FormatErrorKind::io, 0, "write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open " + path.string());
  return read_model(in);
}

}  // namespace vub
