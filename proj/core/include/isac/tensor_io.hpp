#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isac/mat.hpp"

namespace isac {

/// Binary tensor dump: magic "ISACTNSR", u32 LE rank, rank u32 LE dims,
/// then row-major f32 LE payload.
struct Tensor {
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

Tensor tensor_from_mat(const Mat& m);
Tensor tensor_from_vec(const std::vector<double>& v);

/// Write bytes to path via a temp file and rename, so readers never observe
/// a partial file.
void atomic_write_file(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

}  // namespace isac
