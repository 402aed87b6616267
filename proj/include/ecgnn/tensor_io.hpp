#pragma once

#include <iosfwd>
#include <string>

#include "ecgnn/tensor.hpp"

namespace ecgnn {

// ECGF tensor file:
//   bytes 0-3   magic "ECGF"
//   bytes 4-7   version (u32 LE): 1 = float32 payload, 2 = float64 payload
//   bytes 8-11  rank (u32 LE)
//   then rank x u32 LE dims
//   then row-major little-endian payload (4 or 8 bytes per element)
// Version 1 is the feature-file format (file size = 12 + 4*rank + 4*numel);
// version 2 carries full-precision parameters inside checkpoints.
// Readers upcast to 64-bit.

void write_tensor_record(std::ostream& os, const Tensor& t, std::uint32_t version);
Tensor read_tensor_record(std::istream& is);

void write_tensor(const std::string& path, const Tensor& t, std::uint32_t version = 1);
Tensor read_tensor(const std::string& path);

}  // namespace ecgnn
