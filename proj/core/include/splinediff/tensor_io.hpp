#pragma once

#include <iosfwd>
#include <string>

#include "splinediff/tensor.hpp"

namespace splinediff {

// DPT1 tensor file: magic "DPT1", u32 LE ndim, ndim u32 LE extents, then the
// f32 LE payload in row-major order.

void write_dpt(std::ostream& os, const TensorF& t);
void write_dpt(const std::string& path, const TensorF& t);

TensorF read_dpt(std::istream& is);
TensorF read_dpt(const std::string& path);

}  // namespace splinediff
