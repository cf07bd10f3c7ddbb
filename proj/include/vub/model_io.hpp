#pragma once

#include <filesystem>
#include <iosfwd>

#include "vub/net.hpp"

namespace vub {

// VUBM1 binary model layout, all little-endian:
//   5 bytes   magic "VUBM1"
//   4 x u64   d_in, hidden, latent, n_classes
//   f64 ...   enc_w1 (row-major, hidden x d_in), enc_b1,
//             enc_w2 (row-major, 2K x hidden), enc_b2,
//             head_w (row-major, n_classes x K), head_b
// Nothing follows the last parameter.

void write_model(const Model& model, std::ostream& out);
Model read_model(std::istream& in);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace vub
