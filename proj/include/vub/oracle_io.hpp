#pragma once

#include <filesystem>
#include <iosfwd>

#include "vub/oracle.hpp"

// Plain-text tables for discrete distributions. Comma separated, one table
// row per line, values written with 17 significant digits.
//
//   vubjoint,v1,<nx>,<ny>          followed by nx rows of ny values
//
//   vubinst,v1,<nx>,<ny>,<nz>
//   joint                          nx rows of ny values
//   encoder                        nx rows of nz values
//   classifier                     nz rows of ny values
//   prior                          1 row of nz values

namespace vub::oracle {

DiscreteJoint read_joint(std::istream& in);
void write_joint(const DiscreteJoint& joint, std::ostream& out);
DiscreteJoint load_joint(const std::filesystem::path& path);

DiscreteInstance read_instance(std::istream& in);
void write_instance(const DiscreteInstance& inst, std::ostream& out);
DiscreteInstance load_instance(const std::filesystem::path& path);
void save_instance(const DiscreteInstance& inst, const std::filesystem::path& path);

}  // namespace vub::oracle
