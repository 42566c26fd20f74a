#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "msfin/tensor.hpp"

namespace msfin::ops {

// Elementwise arithmetic. When shapes differ, the smaller operand's shape must
// be a suffix of the larger one and is broadcast over the leading axes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar factor);

/// Batched matrix product [..., m, k] x [..., k, n] -> [..., m, n]. Batch
/// extents must be equal, or one operand may be a plain matrix shared across
/// the batch of the other.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Elements [start, start + length) along `axis`.
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length);

Tensor softmax(const Tensor& x, int axis);
/// Softmax over the last axis restricted to entries whose flag in `allowed`
/// (same element count as x) is nonzero. Masked entries are exactly 0.
/// A row without any allowed entry raises ErrorKind::MaskedRow.
Tensor masked_softmax(const Tensor& x, std::shared_ptr<const std::vector<std::uint8_t>> allowed);
/// Standardizes each last-axis row over its allowed entries (no gain/bias);
/// masked entries are 0.
Tensor masked_row_standardize(const Tensor& x,
                              std::shared_ptr<const std::vector<std::uint8_t>> allowed);

inline constexpr Scalar kLayerNormEps = 1e-5;
/// LayerNorm along `axis` with per-feature gain and bias of that axis' extent.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, int axis = -1);

/// Exact x * Phi(x).
Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Temporal windows over axis 0 of x[T, ...]. `t` is 1-based; the effective
// window is [max(1, t - w + 1), t]. Max routes its gradient to the earliest
// argmax; mean divides by the effective (clipped) length.
Tensor window_max(const Tensor& x, std::size_t t, std::size_t w);
Tensor window_mean(const Tensor& x, std::size_t t, std::size_t w);
/// window_max / window_mean evaluated for every t = 1..T, stacked to x's shape.
Tensor sliding_window_max(const Tensor& x, std::size_t w);
Tensor sliding_window_mean(const Tensor& x, std::size_t w);

}  // namespace msfin::ops
