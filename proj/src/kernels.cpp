#include "qgnn/kernels.hpp"

#include <omp.h>

#include <algorithm>

#include "qgnn/errors.hpp"

namespace qgnn::kernels {

namespace {

void check_mm(std::size_t inner_a, std::size_t inner_b, const char* what) {
  if (inner_a != inner_b) throw DimensionError(std::string("inner dimension mismatch in ") + what);
}

bool worth_parallel(std::size_t work) { return work >= kParallelThreshold; }

// This thread's contiguous share [lo, hi) of n items.
std::pair<std::size_t, std::size_t> thread_block(std::size_t n) {
  const auto t = static_cast<std::size_t>(omp_get_thread_num());
  const auto nt = static_cast<std::size_t>(omp_get_num_threads());
  const std::size_t per = (n + nt - 1) / nt;
  return {std::min(n, t * per), std::min(n, (t + 1) * per)};
}

}  // namespace

void matmul_serial(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.cols(), b.rows(), "matmul");
  out = Tensor(a.rows(), b.cols());
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aik * b(k, j);
    }
  }
}

void matmul(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.cols(), b.rows(), "matmul");
  out = Tensor(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
  const std::size_t n = a.cols();
  const std::size_t m = b.cols();
#pragma omp parallel for schedule(static) if (worth_parallel(a.rows() * n * m))
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aik * b(k, j);
    }
  }
}

void matmul_tn_serial(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.rows(), b.rows(), "matmul_tn");
  out = Tensor(a.cols(), b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += ari * b(r, j);
    }
  }
}

void matmul_tn(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.rows(), b.rows(), "matmul_tn");
  out = Tensor(a.cols(), b.cols());
  // Each thread owns a block of output rows and sweeps the inputs row-major;
  // every output element still sums over r in ascending order.
#pragma omp parallel if (worth_parallel(a.rows() * a.cols() * b.cols()))
  {
    const auto [lo, hi] = thread_block(a.cols());
    const std::size_t n = a.cols();
    const std::size_t m = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double ari = pa[r * n + i];
        for (std::size_t j = 0; j < m; ++j) po[i * m + j] += ari * pb[r * m + j];
      }
    }
  }
}

void matmul_nt_serial(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.cols(), b.cols(), "matmul_nt");
  out = Tensor(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
}

void matmul_nt(const Tensor& a, const Tensor& b, Tensor& out) {
  check_mm(a.cols(), b.cols(), "matmul_nt");
  out = Tensor(a.rows(), b.rows());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_parallel(a.rows() * a.cols() * b.rows()))
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
}

void segment_sum_serial(const Tensor& x, std::span<const int> ids, Tensor& out) {
  if (ids.size() != x.rows()) throw DimensionError("segment id count differs from row count");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto s = static_cast<std::size_t>(ids[r]);
    if (s >= out.rows()) throw DimensionError("segment id out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) out(s, c) += x(r, c);
  }
}

void segment_sum(const Tensor& x, std::span<const int> ids, Tensor& out) {
  if (ids.size() != x.rows()) throw DimensionError("segment id count differs from row count");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= out.rows()) throw DimensionError("segment id out of range");
  }
  // Columns are independent: each thread owns a column block and every
  // (segment, column) accumulates rows in ascending order as in the serial loop.
#pragma omp parallel if (worth_parallel(x.rows() * x.cols() * 8))
  {
    const auto [lo, hi] = thread_block(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      const auto s = static_cast<std::size_t>(ids[r]);
      for (std::size_t c = lo; c < hi; ++c) out(s, c) += x(r, c);
    }
  }
}

void gather_rows(const Tensor& x, std::span<const int> idx, Tensor& out) {
  out = Tensor(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto src = static_cast<std::size_t>(idx[r]);
    if (src >= x.rows()) throw DimensionError("gather index out of range");
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(src, c);
  }
}

}  // namespace qgnn::kernels
