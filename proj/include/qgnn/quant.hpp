#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qgnn/tensor.hpp"

namespace qgnn {

inline constexpr int kBitsPerCode = 8;
inline constexpr int kSignBit = 7;

/// Signed 8-bit two's-complement codes with one per-tensor scale.
/// dequantized value = code * scale.
struct QuantizedTensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int8_t> codes;
  double scale = 1.0;
  int clip_lo = -128;
  int clip_hi = 127;

  std::size_t size() const { return codes.size(); }
  double value(std::size_t i) const { return static_cast<double>(codes[i]) * scale; }

  friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

/// Round half away from zero.
double round_half_away(double x);

/// Symmetric per-tensor scale max|W| / 127 (1 when W is all zero).
double symmetric_scale(const Tensor& w);

/// quantize_with_scale(w, symmetric_scale(w)). Throws ContractError on
/// non-finite input.
QuantizedTensor quantize(const Tensor& w);

/// codes = clip(round_half_away(w / scale), -128, 127).
QuantizedTensor quantize_with_scale(const Tensor& w, double scale);

Tensor dequantize(const QuantizedTensor& q);

/// Clipped straight-through estimator: upstream gradient where the
/// pre-quantization value lies in [lo, hi] (real units), zero elsewhere.
Tensor ste_backward(const Tensor& upstream, const Tensor& pre_quant, double lo, double hi);

/// Toggles bit `bit` (0 = LSB, 7 = sign) of one code in place. Throws
/// AddressError for an invalid element or bit.
void flip_bit(QuantizedTensor& q, std::size_t element, int bit);

/// Copying variant.
QuantizedTensor flipped(const QuantizedTensor& q, std::size_t element, int bit);

/// Value of bit `bit` of a code's two's-complement byte.
inline int code_bit(std::int8_t code, int bit) {
  return (static_cast<std::uint8_t>(code) >> bit) & 1;
}

/// Signed change of the integer code caused by toggling `bit` of `code`:
/// +-2^bit for bit < 7, -128 when setting the sign bit, +128 when clearing it.
int flip_delta(std::int8_t code, int bit);

using BitGradient = std::array<double, kBitsPerCode>;

/// dL/db_i = dL/dw_hat * s * 2^i for i < 7 and dL/dw_hat * s * (-2^7) for the
/// sign bit. Entry [i] of each row is bit i.
std::vector<BitGradient> bit_gradients(const Tensor& weight_grad, const QuantizedTensor& q);

/// Bit i of mask[e] is set iff flipping bit i of codes[e] follows the
/// gradient-ascending direction: b = 0 with positive gradient or b = 1 with
/// negative gradient. Zero gradients never qualify. Negate the gradients to
/// get the descending direction.
std::vector<std::uint8_t> ascending_flip_mask(std::span<const std::int8_t> codes,
                                              std::span<const BitGradient> grads);

}  // namespace qgnn
