#pragma once

#include <iosfwd>
#include <string>

#include "egogaze/tensor.hpp"

namespace egogaze {

// Flat binary float32 array container.
// Layout: magic "EGC1", u32 rank, u32 dims[rank], then little-endian float32
// payload in row-major order. Rank-2 arrays (the gaze/imu/map files) therefore
// carry a 16-byte header.
void write_array(std::ostream& os, const Tensor<float>& t);
Tensor<float> read_array(std::istream& is, const std::string& what);

void save_array(const std::string& path, const Tensor<float>& t);
Tensor<float> load_array(const std::string& path);

void save_array(const std::string& path, const Tensor<double>& t);
Tensor<double> load_array_f64(const std::string& path);

}  // namespace egogaze
