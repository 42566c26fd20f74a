#include "msfin/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "msfin/errors.hpp"

namespace msfin::ops {

using detail::Node;
using detail::NodePtr;
using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

std::size_t normalize_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    fail(ErrorKind::Index, "axis " + std::to_string(axis) + " out of range for rank " +
                               std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

// (outer, axis extent, inner) decomposition of a shape around one axis.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

bool needs(const NodePtr& n) { return n && n->requires_grad; }

enum class BinOp { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  const bool a_big = sa.size() >= sb.size() && a.numel() >= b.numel();
  const Shape& big = a_big ? sa : sb;
  const Shape& small = a_big ? sb : sa;
  if (!is_suffix(small, big)) {
    fail(ErrorKind::Dimension,
         "elementwise shapes " + shape_str(sa) + " and " + shape_str(sb) + " are not broadcastable");
  }
  const std::size_t n = shape_numel(big);
  const std::size_t na = a.numel(), nb = b.numel();
  auto av = a.data();
  auto bv = b.data();
  std::vector<Scalar> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Scalar x = av[i % na], y = bv[i % nb];
    out[i] = op == BinOp::Add ? x + y : op == BinOp::Sub ? x - y : x * y;
  }
  NodePtr an = a.node(), bn = b.node();
  return detail::make_result(big, std::move(out), {a, b}, [an, bn, op, n, na, nb](Node& self) {
    const auto& g = self.grad;
    if (needs(an)) {
      auto& ga = an->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        ga[i % na] += op == BinOp::Mul ? g[i] * bn->value[i % nb] : g[i];
      }
    }
    if (needs(bn)) {
      auto& gb = bn->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const Scalar gi = op == BinOp::Mul ? g[i] * an->value[i % na]
                          : op == BinOp::Sub ? -g[i]
                                             : g[i];
        gb[i % nb] += gi;
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul); }

Tensor scale(const Tensor& a, Scalar factor) {
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  NodePtr an = a.node();
  return detail::make_result(a.shape(), std::move(out), {a}, [an, factor](Node& self) {
    auto& ga = an->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  auto mismatch = [&] {
    fail(ErrorKind::Dimension, "matmul shape mismatch: " + shape_str(sa) + " x " + shape_str(sb));
  };
  if (sa.size() < 2 || sb.size() < 2) mismatch();
  const std::size_t m = sa[sa.size() - 2], k = sa.back();
  const std::size_t kb = sb[sb.size() - 2], n = sb.back();
  if (k != kb) mismatch();
  const Shape batch_a(sa.begin(), sa.end() - 2), batch_b(sb.begin(), sb.end() - 2);
  const bool a_shared = batch_a.empty() && !batch_b.empty();
  const bool b_shared = batch_b.empty() && !batch_a.empty();
  if (!a_shared && !b_shared && batch_a != batch_b) mismatch();
  const Shape& batch = a_shared ? batch_b : batch_a;
  const std::size_t nbatch = shape_numel(batch);

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<Scalar> out(nbatch * m * n);

  if (b_shared) {
    // One GEMM over the flattened batch.
    MapMat(out.data(), nbatch * m, n).noalias() =
        ConstMapMat(a.data().data(), nbatch * m, k) * ConstMapMat(b.data().data(), k, n);
  } else {
    for (std::size_t i = 0; i < nbatch; ++i) {
      const Scalar* pa = a.data().data() + (a_shared ? 0 : i * m * k);
      const Scalar* pb = b.data().data() + i * k * n;
      MapMat(out.data() + i * m * n, m, n).noalias() = ConstMapMat(pa, m, k) * ConstMapMat(pb, k, n);
    }
  }

  NodePtr an = a.node(), bn = b.node();
  return detail::make_result(
      std::move(out_shape), std::move(out), {a, b},
      [an, bn, m, k, n, nbatch, a_shared, b_shared](Node& self) {
        const Scalar* g = self.grad.data();
        if (b_shared) {
          ConstMapMat G(g, nbatch * m, n);
          if (needs(an)) {
            MapMat(an->grad_buffer().data(), nbatch * m, k).noalias() +=
                G * ConstMapMat(bn->value.data(), k, n).transpose();
          }
          if (needs(bn)) {
            MapMat(bn->grad_buffer().data(), k, n).noalias() +=
                ConstMapMat(an->value.data(), nbatch * m, k).transpose() * G;
          }
          return;
        }
        for (std::size_t i = 0; i < nbatch; ++i) {
          ConstMapMat G(g + i * m * n, m, n);
          const std::size_t oa = a_shared ? 0 : i * m * k;
          const std::size_t ob = i * k * n;
          if (needs(an)) {
            MapMat(an->grad_buffer().data() + oa, m, k).noalias() +=
                G * ConstMapMat(bn->value.data() + ob, k, n).transpose();
          }
          if (needs(bn)) {
            MapMat(bn->grad_buffer().data() + ob, k, n).noalias() +=
                ConstMapMat(an->value.data() + oa, m, k).transpose() * G;
          }
        }
      });
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const auto& s = a.shape();
  const std::size_t r = s.size();
  if (axes.size() != r) fail(ErrorKind::Dimension, "permute axes do not match rank of " + shape_str(s));
  std::vector<bool> seen(r, false);
  for (auto ax : axes) {
    if (ax >= r || seen[ax]) fail(ErrorKind::Dimension, "permute axes are not a permutation");
    seen[ax] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * s[i];
  Shape out_shape(r);
  std::vector<std::size_t> src_stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = s[axes[i]];
    src_stride[i] = in_strides[axes[i]];
  }
  // Flat source index for each output position.
  const std::size_t n = a.numel();
  auto index = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> counter(r, 0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*index)[i] = src;
    for (std::size_t d = r; d-- > 0;) {
      if (++counter[d] < out_shape[d]) {
        src += src_stride[d];
        break;
      }
      src -= src_stride[d] * (out_shape[d] - 1);
      counter[d] = 0;
    }
  }
  std::vector<Scalar> out(n);
  auto av = a.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = av[(*index)[i]];
  NodePtr an = a.node();
  return detail::make_result(std::move(out_shape), std::move(out), {a}, [an, index](Node& self) {
    auto& ga = an->grad_buffer();
    for (std::size_t i = 0; i < index->size(); ++i) ga[(*index)[i]] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rank();
  if (r < 2) fail(ErrorKind::Dimension, "transpose needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(a, axes);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    fail(ErrorKind::Dimension, "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<Scalar> out(a.data().begin(), a.data().end());
  NodePtr an = a.node();
  return detail::make_result(std::move(shape), std::move(out), {a}, [an](Node& self) {
    auto& ga = an->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) fail(ErrorKind::Contract, "concat of zero tensors");
  const Shape& s0 = parts.front().shape();
  const std::size_t ax = normalize_axis(axis, s0.size());
  Shape out_shape = s0;
  out_shape[ax] = 0;
  std::vector<std::size_t> chunk(parts.size());
  const AxisSplit base = split_at(s0, ax);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == ax || s[i] == s0[i];
    if (!ok) {
      fail(ErrorKind::Dimension, "concat shapes " + shape_str(s0) + " and " + shape_str(s) +
                                     " differ off the concat axis");
    }
    out_shape[ax] += s[ax];
    chunk[p] = s[ax] * base.inner;
  }
  const std::size_t row = out_shape[ax] * base.inner;
  std::vector<Scalar> out(base.outer * row);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto v = parts[p].data();
    for (std::size_t o = 0; o < base.outer; ++o) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk[p]), chunk[p],
                  out.begin() + static_cast<std::ptrdiff_t>(o * row + offset));
    }
    offset += chunk[p];
  }
  std::vector<NodePtr> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  const std::size_t outer = base.outer;
  return detail::make_result(std::move(out_shape), std::move(out), parts,
                             [nodes, chunk, row, outer](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < nodes.size(); ++p) {
                                 if (needs(nodes[p])) {
                                   auto& g = nodes[p]->grad_buffer();
                                   for (std::size_t o = 0; o < outer; ++o) {
                                     for (std::size_t i = 0; i < chunk[p]; ++i) {
                                       g[o * chunk[p] + i] += self.grad[o * row + off + i];
                                     }
                                   }
                                 }
                                 off += chunk[p];
                               }
                             });
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  const std::size_t ax = normalize_axis(axis, s.size());
  if (length == 0 || start + length > s[ax]) {
    fail(ErrorKind::Index, "slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                               ") out of range for axis extent " + std::to_string(s[ax]));
  }
  const AxisSplit sp = split_at(s, ax);
  Shape out_shape = s;
  out_shape[ax] = length;
  const std::size_t in_row = sp.len * sp.inner, out_row = length * sp.inner,
                    skip = start * sp.inner;
  std::vector<Scalar> out(sp.outer * out_row);
  auto av = a.data();
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(o * in_row + skip), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  NodePtr an = a.node();
  const std::size_t outer = sp.outer;
  return detail::make_result(std::move(out_shape), std::move(out), {a},
                             [an, outer, in_row, out_row, skip](Node& self) {
                               auto& g = an->grad_buffer();
                               for (std::size_t o = 0; o < outer; ++o) {
                                 for (std::size_t i = 0; i < out_row; ++i) {
                                   g[o * in_row + skip + i] += self.grad[o * out_row + i];
                                 }
                               }
                             });
}

namespace {

// Softmax / standardization over strided rows, shared by the masked and plain
// variants. `allowed` may be null (every entry allowed).
Tensor row_softmax(const Tensor& x, std::size_t axis,
                   std::shared_ptr<const std::vector<std::uint8_t>> allowed) {
  const AxisSplit sp = split_at(x.shape(), axis);
  auto xv = x.data();
  std::vector<Scalar> out(xv.size(), 0);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      auto ok = [&](std::size_t j) { return !allowed || (*allowed)[base + j * sp.inner] != 0; };
      Scalar mx = -std::numeric_limits<Scalar>::infinity();
      for (std::size_t j = 0; j < sp.len; ++j) {
        if (ok(j)) mx = std::max(mx, xv[base + j * sp.inner]);
      }
      if (mx == -std::numeric_limits<Scalar>::infinity()) {
        fail(ErrorKind::MaskedRow, "attention row has no admissible key");
      }
      Scalar total = 0;
      for (std::size_t j = 0; j < sp.len; ++j) {
        if (!ok(j)) continue;
        const Scalar e = std::exp(xv[base + j * sp.inner] - mx);
        out[base + j * sp.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < sp.len; ++j) out[base + j * sp.inner] /= total;
    }
  }
  NodePtr xn = x.node();
  return detail::make_result(x.shape(), std::move(out), {x}, [xn, sp](Node& self) {
    auto& gx = xn->grad_buffer();
    const auto& y = self.value;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t in = 0; in < sp.inner; ++in) {
        const std::size_t base = o * sp.len * sp.inner + in;
        Scalar dot = 0;
        for (std::size_t j = 0; j < sp.len; ++j) dot += y[base + j * sp.inner] * self.grad[base + j * sp.inner];
        for (std::size_t j = 0; j < sp.len; ++j) {
          const std::size_t i = base + j * sp.inner;
          gx[i] += y[i] * (self.grad[i] - dot);
        }
      }
    }
  });
}

void check_mask(const Tensor& x, const std::shared_ptr<const std::vector<std::uint8_t>>& allowed) {
  if (!allowed || allowed->size() != x.numel()) {
    fail(ErrorKind::Dimension, "attention mask size does not match scores " + shape_str(x.shape()));
  }
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  return row_softmax(x, normalize_axis(axis, x.rank()), nullptr);
}

Tensor masked_softmax(const Tensor& x, std::shared_ptr<const std::vector<std::uint8_t>> allowed) {
  check_mask(x, allowed);
  return row_softmax(x, x.rank() - 1, std::move(allowed));
}

Tensor masked_row_standardize(const Tensor& x,
                              std::shared_ptr<const std::vector<std::uint8_t>> allowed) {
  check_mask(x, allowed);
  const std::size_t len = x.shape().back();
  const std::size_t rows = x.numel() / len;
  auto xv = x.data();
  std::vector<Scalar> out(xv.size(), 0);
  auto inv_std = std::make_shared<std::vector<Scalar>>(rows, 0);
  auto count = std::make_shared<std::vector<std::size_t>>(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * len;
    Scalar mu = 0;
    std::size_t c = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if ((*allowed)[base + j]) {
        mu += xv[base + j];
        ++c;
      }
    }
    if (c == 0) fail(ErrorKind::MaskedRow, "attention row has no admissible key");
    mu /= static_cast<Scalar>(c);
    Scalar var = 0;
    for (std::size_t j = 0; j < len; ++j) {
      if ((*allowed)[base + j]) var += (xv[base + j] - mu) * (xv[base + j] - mu);
    }
    var /= static_cast<Scalar>(c);
    const Scalar is = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < len; ++j) {
      if ((*allowed)[base + j]) out[base + j] = (xv[base + j] - mu) * is;
    }
    (*inv_std)[r] = is;
    (*count)[r] = c;
  }
  NodePtr xn = x.node();
  return detail::make_result(x.shape(), std::move(out), {x},
                             [xn, allowed, inv_std, count, len, rows](Node& self) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r) {
                                 const std::size_t base = r * len;
                                 const Scalar c = static_cast<Scalar>((*count)[r]);
                                 Scalar mg = 0, mgy = 0;
                                 for (std::size_t j = 0; j < len; ++j) {
                                   if (!(*allowed)[base + j]) continue;
                                   mg += self.grad[base + j];
                                   mgy += self.grad[base + j] * self.value[base + j];
                                 }
                                 mg /= c;
                                 mgy /= c;
                                 for (std::size_t j = 0; j < len; ++j) {
                                   if (!(*allowed)[base + j]) continue;
                                   gx[base + j] += (*inv_std)[r] *
                                                   (self.grad[base + j] - mg - self.value[base + j] * mgy);
                                 }
                               }
                             });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, int axis) {
  const std::size_t ax = normalize_axis(axis, x.rank());
  const AxisSplit sp = split_at(x.shape(), ax);
  if (gain.numel() != sp.len || bias.numel() != sp.len) {
    fail(ErrorKind::Dimension, "layer_norm gain/bias " + shape_str(gain.shape()) + "/" +
                                   shape_str(bias.shape()) + " do not match axis extent " +
                                   std::to_string(sp.len));
  }
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  auto xhat = std::make_shared<std::vector<Scalar>>(xv.size());
  auto inv_std = std::make_shared<std::vector<Scalar>>(sp.outer * sp.inner);
  std::vector<Scalar> out(xv.size());
  const Scalar n = static_cast<Scalar>(sp.len);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t in = 0; in < sp.inner; ++in) {
      const std::size_t base = o * sp.len * sp.inner + in;
      Scalar mu = 0;
      for (std::size_t j = 0; j < sp.len; ++j) mu += xv[base + j * sp.inner];
      mu /= n;
      Scalar var = 0;
      for (std::size_t j = 0; j < sp.len; ++j) {
        const Scalar d = xv[base + j * sp.inner] - mu;
        var += d * d;
      }
      var /= n;
      const Scalar is = 1.0 / std::sqrt(var + kLayerNormEps);
      (*inv_std)[o * sp.inner + in] = is;
      for (std::size_t j = 0; j < sp.len; ++j) {
        const std::size_t i = base + j * sp.inner;
        (*xhat)[i] = (xv[i] - mu) * is;
        out[i] = gv[j] * (*xhat)[i] + bv[j];
      }
    }
  }
  NodePtr xn = x.node(), gn = gain.node(), bn = bias.node();
  return detail::make_result(
      x.shape(), std::move(out), {x, gain, bias}, [xn, gn, bn, xhat, inv_std, sp](Node& self) {
        const Scalar n = static_cast<Scalar>(sp.len);
        const auto& g = self.grad;
        if (needs(gn) || needs(bn)) {
          for (std::size_t o = 0; o < sp.outer; ++o) {
            for (std::size_t in = 0; in < sp.inner; ++in) {
              const std::size_t base = o * sp.len * sp.inner + in;
              for (std::size_t j = 0; j < sp.len; ++j) {
                const std::size_t i = base + j * sp.inner;
                if (needs(gn)) gn->grad_buffer()[j] += g[i] * (*xhat)[i];
                if (needs(bn)) bn->grad_buffer()[j] += g[i];
              }
            }
          }
        }
        if (!needs(xn)) return;
        auto& gx = xn->grad_buffer();
        for (std::size_t o = 0; o < sp.outer; ++o) {
          for (std::size_t in = 0; in < sp.inner; ++in) {
            const std::size_t base = o * sp.len * sp.inner + in;
            Scalar m1 = 0, m2 = 0;
            for (std::size_t j = 0; j < sp.len; ++j) {
              const std::size_t i = base + j * sp.inner;
              const Scalar dxh = g[i] * gn->value[j];
              m1 += dxh;
              m2 += dxh * (*xhat)[i];
            }
            m1 /= n;
            m2 /= n;
            const Scalar is = (*inv_std)[o * sp.inner + in];
            for (std::size_t j = 0; j < sp.len; ++j) {
              const std::size_t i = base + j * sp.inner;
              gx[i] += is * (g[i] * gn->value[j] - m1 - (*xhat)[i] * m2);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  auto xv = x.data();
  std::vector<Scalar> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = xv[i] * 0.5 * std::erfc(-xv[i] * std::numbers::sqrt2 / 2);
  }
  NodePtr xn = x.node();
  return detail::make_result(x.shape(), std::move(out), {x}, [xn](Node& self) {
    auto& gx = xn->grad_buffer();
    const Scalar inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const Scalar v = xn->value[i];
      const Scalar cdf = 0.5 * std::erfc(-v * std::numbers::sqrt2 / 2);
      const Scalar pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      gx[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  auto xv = x.data();
  std::vector<Scalar> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const Scalar v = xv[i];
    out[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  NodePtr xn = x.node();
  return detail::make_result(x.shape(), std::move(out), {x}, [xn](Node& self) {
    auto& gx = xn->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      const Scalar s = self.value[i];
      gx[i] += self.grad[i] * s * (1 - s);
    }
  });
}

Tensor sum(const Tensor& x) {
  auto xv = x.data();
  const Scalar total = std::accumulate(xv.begin(), xv.end(), Scalar{0});
  NodePtr xn = x.node();
  return detail::make_result({1}, {total}, {x}, [xn](Node& self) {
    auto& gx = xn->grad_buffer();
    for (auto& g : gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<Scalar>(x.numel())); }

namespace {

struct WindowGeom {
  std::size_t steps, inner;
};

WindowGeom window_geom(const Tensor& x, std::size_t w) {
  if (x.rank() < 1) fail(ErrorKind::Dimension, "window reduction needs a time axis");
  if (w < 1) fail(ErrorKind::Config, "window length must be >= 1");
  return {x.shape()[0], x.numel() / x.shape()[0]};
}

// Computes max or mean over windows ending at each requested (1-based) t.
Tensor windowed(const Tensor& x, const std::vector<std::size_t>& ends, std::size_t w, bool is_max,
                Shape out_shape) {
  const WindowGeom g = window_geom(x, w);
  for (auto t : ends) {
    if (t < 1 || t > g.steps) {
      fail(ErrorKind::Index, "window end t=" + std::to_string(t) + " outside [1, " +
                                 std::to_string(g.steps) + "]");
    }
  }
  auto xv = x.data();
  std::vector<Scalar> out(ends.size() * g.inner);
  auto argmax = std::make_shared<std::vector<std::size_t>>(is_max ? out.size() : 0);
  for (std::size_t e = 0; e < ends.size(); ++e) {
    const std::size_t last = ends[e] - 1;
    const std::size_t first = ends[e] >= w ? ends[e] - w : 0;
    for (std::size_t c = 0; c < g.inner; ++c) {
      if (is_max) {
        std::size_t best = first;
        for (std::size_t s = first + 1; s <= last; ++s) {
          if (xv[s * g.inner + c] > xv[best * g.inner + c]) best = s;
        }
        out[e * g.inner + c] = xv[best * g.inner + c];
        (*argmax)[e * g.inner + c] = best;
      } else {
        Scalar total = 0;
        for (std::size_t s = first; s <= last; ++s) total += xv[s * g.inner + c];
        out[e * g.inner + c] = total / static_cast<Scalar>(last - first + 1);
      }
    }
  }
  NodePtr xn = x.node();
  return detail::make_result(std::move(out_shape), std::move(out), {x},
                             [xn, ends, w, is_max, argmax, inner = g.inner](Node& self) {
                               auto& gx = xn->grad_buffer();
                               for (std::size_t e = 0; e < ends.size(); ++e) {
                                 const std::size_t last = ends[e] - 1;
                                 const std::size_t first = ends[e] >= w ? ends[e] - w : 0;
                                 const Scalar inv = 1.0 / static_cast<Scalar>(last - first + 1);
                                 for (std::size_t c = 0; c < inner; ++c) {
                                   const Scalar gi = self.grad[e * inner + c];
                                   if (is_max) {
                                     gx[(*argmax)[e * inner + c] * inner + c] += gi;
                                   } else {
                                     for (std::size_t s = first; s <= last; ++s) gx[s * inner + c] += gi * inv;
                                   }
                                 }
                               }
                             });
}

std::vector<std::size_t> all_ends(std::size_t steps) {
  std::vector<std::size_t> ends(steps);
  std::iota(ends.begin(), ends.end(), std::size_t{1});
  return ends;
}

Shape row_shape(const Tensor& x) { return Shape(x.shape().begin() + 1, x.shape().end()); }

Shape non_empty(Shape s) {
  if (s.empty()) s.push_back(1);
  return s;
}

}  // namespace

Tensor window_max(const Tensor& x, std::size_t t, std::size_t w) {
  return windowed(x, {t}, w, true, non_empty(row_shape(x)));
}

Tensor window_mean(const Tensor& x, std::size_t t, std::size_t w) {
  return windowed(x, {t}, w, false, non_empty(row_shape(x)));
}

Tensor sliding_window_max(const Tensor& x, std::size_t w) {
  return windowed(x, all_ends(window_geom(x, w).steps), w, true, x.shape());
}

Tensor sliding_window_mean(const Tensor& x, std::size_t w) {
  return windowed(x, all_ends(window_geom(x, w).steps), w, false, x.shape());
}

}  // namespace msfin::ops
