#include "vub/oracle_io.hpp"

#include <fstream>
#include <string>

#include "vub/format_error.hpp"

namespace vub::oracle {

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(const char* expecting) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw FormatError(FormatErrorKind::row_count, line_no_ + 1,
                        std::string("unexpected end of file, expected ") + expecting);
    }
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  std::size_t line() const { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

MatrixXd read_table(LineReader& reader, Eigen::Index rows, Eigen::Index cols, const char* name) {
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string line = reader.next(name);
    const auto fields = text::split_commas(line);
    if (static_cast<Eigen::Index>(fields.size()) != cols) {
      throw FormatError(FormatErrorKind::row_length, reader.line(),
                        std::string(name) + " row needs " + std::to_string(cols) + " values");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = text::parse_double(fields[static_cast<std::size_t>(c)], reader.line());
    }
  }
  return m;
}

void write_table(const MatrixXd& m, std::ostream& out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out << ',';
      out << text::format_double(m(r, c));
    }
    out << '\n';
  }
}

void expect_section(LineReader& reader, const char* name) {
  if (reader.next(name) != name) {
    throw FormatError(FormatErrorKind::malformed_header, reader.line(),
                      std::string("expected section '") + name + "'");
  }
}

std::vector<Eigen::Index> read_header(LineReader& reader, const std::string& magic,
                                      std::size_t n_sizes) {
  const std::string line = reader.next("header");
  const auto fields = text::split_commas(line);
  if (fields.size() != 2 + n_sizes || fields[0] != magic || fields[1] != "v1") {
    throw FormatError(FormatErrorKind::malformed_header, 1,
                      "expected header '" + magic + ",v1,...' with " + std::to_string(n_sizes) +
                          " sizes");
  }
  std::vector<Eigen::Index> sizes;
  for (std::size_t i = 0; i < n_sizes; ++i) {
    const long long v = text::parse_integer(fields[2 + i], 1);
    if (v < 1) throw FormatError(FormatErrorKind::malformed_header, 1, "sizes must be >= 1");
    sizes.push_back(static_cast<Eigen::Index>(v));
  }
  return sizes;
}

template <typename T, typename Fn>
T wrap_invalid(const LineReader& reader, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw FormatError(FormatErrorKind::bad_number, reader.line(), e.what());
  }
}

}  // namespace

DiscreteJoint read_joint(std::istream& in) {
  LineReader reader(in);
  const auto sizes = read_header(reader, "vubjoint", 2);
  MatrixXd table = read_table(reader, sizes[0], sizes[1], "joint");
  return wrap_invalid<DiscreteJoint>(reader, [&] { return DiscreteJoint(std::move(table)); });
}

void write_joint(const DiscreteJoint& joint, std::ostream& out) {
  out << "vubjoint,v1," << joint.nx() << ',' << joint.ny() << '\n';
  write_table(joint.table(), out);
}

DiscreteJoint load_joint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open " + path.string());
  return read_joint(in);
}

DiscreteInstance read_instance(std::istream& in) {
  LineReader reader(in);
  const auto s = read_header(reader, "vubinst", 3);
  const Eigen::Index nx = s[0], ny = s[1], nz = s[2];
  expect_section(reader, "joint");
  MatrixXd joint = read_table(reader, nx, ny, "joint");
  expect_section(reader, "encoder");
  MatrixXd enc = read_table(reader, nx, nz, "encoder");
  expect_section(reader, "classifier");
  MatrixXd cls = read_table(reader, nz, ny, "classifier");
  expect_section(reader, "prior");
  VectorXd prior = read_table(reader, 1, nz, "prior").row(0).transpose();
  return wrap_invalid<DiscreteInstance>(reader, [&] {
    return DiscreteInstance(DiscreteJoint(std::move(joint)), DiscreteChannel(std::move(enc)),
                            DiscreteChannel(std::move(cls)), DiscretePrior(std::move(prior)));
  });
}

void write_instance(const DiscreteInstance& inst, std::ostream& out) {
  out << "vubinst,v1," << inst.nx() << ',' << inst.ny() << ',' << inst.nz() << '\n';
  out << "joint\n";
  write_table(inst.joint.table(), out);
  out << "encoder\n";
  write_table(inst.encoder.table(), out);
  out << "classifier\n";
  write_table(inst.classifier.table(), out);
  out << "prior\n";
  write_table(inst.prior.probs().transpose(), out);
}

DiscreteInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatErrorKind::io, 0, "cannot open " + path.string());
  return read_instance(in);
}

void save_instance(const DiscreteInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(FormatErrorKind::io, 0, "cannot write " + path.string());
  write_instance(inst, out);
}

}  // namespace vub::oracle
