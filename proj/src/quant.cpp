#include "qgnn/quant.hpp"

#include <algorithm>
#include <cmath>

#include "qgnn/errors.hpp"

namespace qgnn {

double round_half_away(double x) { return std::round(x); }

double symmetric_scale(const Tensor& w) {
  double m = 0.0;
  for (double v : w.data()) m = std::max(m, std::fabs(v));
  return m > 0.0 ? m / 127.0 : 1.0;
}

QuantizedTensor quantize(const Tensor& w) {
  if (!w.all_finite()) throw ContractError("cannot quantize non-finite weights");
  return quantize_with_scale(w, symmetric_scale(w));
}

QuantizedTensor quantize_with_scale(const Tensor& w, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ContractError("quantization scale must be positive and finite");
  if (!w.all_finite()) throw ContractError("cannot quantize non-finite weights");
  QuantizedTensor q;
  q.rows = w.rows();
  q.cols = w.cols();
  q.scale = scale;
  q.codes.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double r = std::clamp(round_half_away(w[i] / scale), static_cast<double>(q.clip_lo),
                                static_cast<double>(q.clip_hi));
    q.codes[i] = static_cast<std::int8_t>(r);
  }
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor t(q.rows, q.cols);
  for (std::size_t i = 0; i < q.size(); ++i) t[i] = q.value(i);
  return t;
}

Tensor ste_backward(const Tensor& upstream, const Tensor& pre_quant, double lo, double hi) {
  if (!upstream.same_shape(pre_quant)) throw DimensionError("ste_backward: shape mismatch");
  Tensor g(upstream.rows(), upstream.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (pre_quant[i] >= lo && pre_quant[i] <= hi) ? upstream[i] : 0.0;
  }
  return g;
}

void flip_bit(QuantizedTensor& q, std::size_t element, int bit) {
  if (element >= q.size()) {
    throw AddressError("element " + std::to_string(element) + " outside tensor of " + std::to_string(q.size()));
  }
  if (bit < 0 || bit >= kBitsPerCode) throw AddressError("bit position " + std::to_string(bit) + " outside [0,7]");
  const auto raw = static_cast<std::uint8_t>(static_cast<std::uint8_t>(q.codes[element]) ^ (1u << bit));
  q.codes[element] = static_cast<std::int8_t>(raw);
}

QuantizedTensor flipped(const QuantizedTensor& q, std::size_t element, int bit) {
  QuantizedTensor out = q;
  flip_bit(out, element, bit);
  return out;
}

int flip_delta(std::int8_t code, int bit) {
  const int set = code_bit(code, bit);
  if (bit == kSignBit) return set ? 128 : -128;
  return set ? -(1 << bit) : (1 << bit);
}

std::vector<BitGradient> bit_gradients(const Tensor& weight_grad, const QuantizedTensor& q) {
  if (weight_grad.rows() != q.rows || weight_grad.cols() != q.cols) throw DimensionError("bit_gradients: shape mismatch");
  std::vector<BitGradient> out(q.size());
  for (std::size_t e = 0; e < q.size(); ++e) {
    const double g = weight_grad[e] * q.scale;
    for (int i = 0; i < kSignBit; ++i) out[e][static_cast<std::size_t>(i)] = g * static_cast<double>(1 << i);
    out[e][kSignBit] = g * -128.0;
  }
  return out;
}

std::vector<std::uint8_t> ascending_flip_mask(std::span<const std::int8_t> codes, std::span<const BitGradient> grads) {
  if (codes.size() != grads.size()) throw DimensionError("ascending_flip_mask: arrays not aligned");
  std::vector<std::uint8_t> mask(codes.size(), 0);
  for (std::size_t e = 0; e < codes.size(); ++e) {
    for (int i = 0; i < kBitsPerCode; ++i) {
      const double g = grads[e][static_cast<std::size_t>(i)];
      const int b = code_bit(codes[e], i);
      if ((b == 0 && g > 0.0) || (b == 1 && g < 0.0)) mask[e] |= static_cast<std::uint8_t>(1u << i);
    }
  }
  return mask;
}

}  // namespace qgnn
