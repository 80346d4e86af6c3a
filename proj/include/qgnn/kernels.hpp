#pragma once

#include <cstddef>
#include <span>

#include "qgnn/tensor.hpp"

// Data-parallel inner loops used by the tape. Each kernel has an OpenMP
// version and a serial reference. Parallel versions partition output elements
// only; every output element is accumulated in the same order as the serial
// reference, so results are bit-identical.
namespace qgnn::kernels {

/// out = a * b
void matmul(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_serial(const Tensor& a, const Tensor& b, Tensor& out);

/// out = a^T * b   (weight gradient)
void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_tn_serial(const Tensor& a, const Tensor& b, Tensor& out);

/// out = a * b^T   (input gradient)
void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt_serial(const Tensor& a, const Tensor& b, Tensor& out);

/// out[ids[r]] += x[r] for every row r; out must be zeroed with
/// num_segments rows.
void segment_sum(const Tensor& x, std::span<const int> ids, Tensor& out);
void segment_sum_serial(const Tensor& x, std::span<const int> ids, Tensor& out);

/// out[r] = x[idx[r]]
void gather_rows(const Tensor& x, std::span<const int> idx, Tensor& out);

/// Work below this many multiply-adds stays on the calling thread.
inline constexpr std::size_t kParallelThreshold = 1 << 15;

}  // namespace qgnn::kernels
