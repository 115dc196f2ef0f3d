#pragma once

#include <filesystem>
#include <iosfwd>

#include "glamor/tensor.hpp"

namespace glamor {

// Text tensor format:
//   #tensor4 v1 shape=N,C,H,W
//   N*C*H*W whitespace-separated reals in NCHW order (written one W-row per line)

void write_tensor(std::ostream& out, const Tensor4& tensor);
Tensor4 read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor4& tensor);
Tensor4 load_tensor(const std::filesystem::path& path);

}  // namespace glamor
