#include "msfin/attention.hpp"

#include <cmath>
#include <memory>

#include "msfin/errors.hpp"
#include "msfin/ops.hpp"

namespace msfin::attn {

AttnNorm parse_attn_norm(const std::string& s) {
  if (s == "softmax") return AttnNorm::softmax;
  if (s == "layernorm_literal") return AttnNorm::layernorm_literal;
  fail(ErrorKind::Config, "unknown attn_norm '" + s + "' (expected softmax | layernorm_literal)");
}

std::string to_string(AttnNorm n) {
  return n == AttnNorm::softmax ? "softmax" : "layernorm_literal";
}

AttentionBlockParams AttentionBlockParams::create(ParamStore& store, const std::string& prefix,
                                                  std::size_t d, std::size_t d_ff,
                                                  std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    fail(ErrorKind::Config, "model width " + std::to_string(d) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  }
  AttentionBlockParams p;
  p.heads = heads;
  p.w_q = store.add_uniform(prefix + ".w_q", {d, d}, d, rng);
  p.w_k = store.add_uniform(prefix + ".w_k", {d, d}, d, rng);
  p.w_v = store.add_uniform(prefix + ".w_v", {d, d}, d, rng);
  p.w_o = store.add_uniform(prefix + ".w_o", {d, d}, d, rng);
  p.ln1_gain = store.add_constant(prefix + ".ln1_gain", {d}, 1.0);
  p.ln1_bias = store.add_constant(prefix + ".ln1_bias", {d}, 0.0);
  p.ln2_gain = store.add_constant(prefix + ".ln2_gain", {d}, 1.0);
  p.ln2_bias = store.add_constant(prefix + ".ln2_bias", {d}, 0.0);
  p.ffn_w1 = store.add_uniform(prefix + ".ffn_w1", {d, d_ff}, d, rng);
  p.ffn_b1 = store.add_uniform(prefix + ".ffn_b1", {d_ff}, d, rng);
  p.ffn_w2 = store.add_uniform(prefix + ".ffn_w2", {d_ff, d}, d_ff, rng);
  p.ffn_b2 = store.add_uniform(prefix + ".ffn_b2", {d}, d_ff, rng);
  return p;
}

namespace {

void require_finite(const Tensor& x, const char* what) {
  for (auto v : x.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::Contract, std::string(what) + " contains non-finite values");
  }
}

Tensor as_batched(const Tensor& x) {
  if (x.rank() == 3) return x;
  if (x.rank() == 2) return ops::reshape(x, {1, x.dim(0), x.dim(1)});
  fail(ErrorKind::Dimension, "attention input must be [L, d] or [B, L, d], got " + shape_str(x.shape()));
}

std::shared_ptr<std::vector<std::uint8_t>> build_allowed(const AttentionMask& mask, std::size_t batch,
                                                         std::size_t heads, std::size_t lq,
                                                         std::size_t lk) {
  auto allowed = std::make_shared<std::vector<std::uint8_t>>(batch * heads * lq * lk, 1);
  if (mask.kind == MaskKind::causal) {
    if (lq != lk) fail(ErrorKind::Dimension, "causal mask needs equal query and key lengths");
    for (std::size_t bh = 0; bh < batch * heads; ++bh) {
      for (std::size_t i = 0; i < lq; ++i) {
        for (std::size_t j = i + 1; j < lk; ++j) (*allowed)[(bh * lq + i) * lk + j] = 0;
      }
    }
  } else if (mask.kind == MaskKind::causal_padding) {
    if (lq != lk) fail(ErrorKind::Dimension, "causal mask needs equal query and key lengths");
    const bool shared = mask.padding.size() == lk;
    if (!shared && mask.padding.size() != batch * lk) {
      fail(ErrorKind::Dimension, "key padding has " + std::to_string(mask.padding.size()) +
                                     " flags for " + std::to_string(batch) + " x " +
                                     std::to_string(lk) + " keys");
    }
    for (std::size_t b = 0; b < batch; ++b) {
      const std::uint8_t* pad = mask.padding.data() + (shared ? 0 : b * lk);
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < lq; ++i) {
          for (std::size_t j = 0; j < lk; ++j) {
            (*allowed)[(((b * heads + h) * lq) + i) * lk + j] = j == i || (j < i && pad[j] == 0);
          }
        }
      }
    }
  } else if (mask.kind == MaskKind::key_padding) {
    const bool shared = mask.padding.size() == lk;
    if (!shared && mask.padding.size() != batch * lk) {
      fail(ErrorKind::Dimension, "key padding has " + std::to_string(mask.padding.size()) +
                                     " flags for " + std::to_string(batch) + " x " +
                                     std::to_string(lk) + " keys");
    }
    for (std::size_t b = 0; b < batch; ++b) {
      const std::uint8_t* pad = mask.padding.data() + (shared ? 0 : b * lk);
      bool any = false;
      for (std::size_t j = 0; j < lk; ++j) any = any || pad[j] == 0;
      if (!any) {
        fail(ErrorKind::MaskedRow, "every key is padded in batch entry " + std::to_string(b));
      }
      for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < lq; ++i) {
          for (std::size_t j = 0; j < lk; ++j) {
            (*allowed)[(((b * heads + h) * lq) + i) * lk + j] = pad[j] == 0;
          }
        }
      }
    }
  }
  return allowed;
}

// [B, L, d] -> [B * heads, L, d / heads]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.dim(0), l = x.dim(1), d = x.dim(2);
  auto t = ops::reshape(x, {b, l, heads, d / heads});
  t = ops::permute(t, {0, 2, 1, 3});
  return ops::reshape(t, {b * heads, l, d / heads});
}

Tensor merge_heads(const Tensor& x, std::size_t batch, std::size_t heads) {
  const std::size_t l = x.dim(1), dh = x.dim(2);
  auto t = ops::reshape(x, {batch, heads, l, dh});
  t = ops::permute(t, {0, 2, 1, 3});
  return ops::reshape(t, {batch, l, heads * dh});
}

AttentionOutput attend(const Tensor& query_in, const Tensor* kv_in, const AttentionBlockParams& p,
                       const AttentionMask& mask, AttnNorm norm) {
  require_finite(query_in, "attention query input");
  if (kv_in) require_finite(*kv_in, "attention key/value input");
  const bool unbatched = query_in.rank() == 2;
  const Tensor q = as_batched(query_in);
  const Tensor kv = kv_in ? as_batched(*kv_in) : q;
  const std::size_t d = p.width();
  if (q.dim(2) != d || kv.dim(2) != d) {
    fail(ErrorKind::Dimension, "attention inputs " + shape_str(q.shape()) + " / " +
                                   shape_str(kv.shape()) + " do not match block width " +
                                   std::to_string(d));
  }
  if (q.dim(0) != kv.dim(0)) {
    fail(ErrorKind::Dimension, "query batch " + shape_str(q.shape()) + " and key batch " +
                                   shape_str(kv.shape()) + " differ");
  }
  const std::size_t batch = q.dim(0), lq = q.dim(1), lk = kv.dim(1), heads = p.heads;
  const std::size_t dh = d / heads;

  const Tensor qn = ops::layer_norm(q, p.ln1_gain, p.ln1_bias);
  const Tensor kvn = kv_in ? ops::layer_norm(kv, p.ln1_gain, p.ln1_bias) : qn;

  const Tensor queries = split_heads(ops::matmul(qn, p.w_q), heads);
  const Tensor keys = split_heads(ops::matmul(kvn, p.w_k), heads);
  const Tensor values = split_heads(ops::matmul(kvn, p.w_v), heads);

  const Tensor scores =
      ops::scale(ops::matmul(queries, ops::transpose(keys)), 1.0 / std::sqrt(static_cast<double>(dh)));
  Tensor weights;
  if (norm == AttnNorm::softmax && mask.kind == MaskKind::none) {
    weights = ops::softmax(scores, -1);
  } else {
    auto allowed = build_allowed(mask, batch, heads, lq, lk);
    weights = norm == AttnNorm::softmax ? ops::masked_softmax(scores, allowed)
                                        : ops::masked_row_standardize(scores, allowed);
  }
  const Tensor mixed = ops::matmul(merge_heads(ops::matmul(weights, values), batch, heads), p.w_o);

  const Tensor attended = ops::layer_norm(ops::add(qn, mixed), p.ln2_gain, p.ln2_bias);
  const Tensor hidden = ops::gelu(ops::add(ops::matmul(attended, p.ffn_w1), p.ffn_b1));
  Tensor out = ops::add(attended, ops::add(ops::matmul(hidden, p.ffn_w2), p.ffn_b2));

  if (unbatched) {
    return {ops::reshape(out, {lq, d}), ops::reshape(weights, {heads, lq, lk})};
  }
  return {out, ops::reshape(weights, {batch, heads, lq, lk})};
}

}  // namespace

AttentionOutput self_attention_block(const Tensor& x, const AttentionBlockParams& p,
                                     const AttentionMask& mask, AttnNorm norm) {
  return attend(x, nullptr, p, mask, norm);
}

AttentionOutput cross_attention_block(const Tensor& query_seq, const Tensor& kv_seq,
                                      const AttentionBlockParams& p, const AttentionMask& mask,
                                      AttnNorm norm) {
  if (mask.kind == MaskKind::causal && query_seq.dim(-2) != kv_seq.dim(-2)) {
    fail(ErrorKind::Dimension, "causal cross-attention needs equal sequence lengths");
  }
  return attend(query_seq, &kv_seq, p, mask, norm);
}

Tensor causal_temporal_block(const Tensor& x, const AttentionBlockParams& p, AttnNorm norm) {
  return attend(x, nullptr, p, AttentionMask::causal(), norm).out;
}

AttentionOutput stack(const std::vector<AttentionBlockParams>& blocks, const Tensor& x,
                      const AttentionMask& mask, AttnNorm norm) {
  AttentionOutput result{x, Tensor()};
  for (const auto& b : blocks) result = self_attention_block(result.out, b, mask, norm);
  return result;
}

AttentionOutput cross_stack(const std::vector<AttentionBlockParams>& blocks, const Tensor& query_seq,
                            const Tensor& kv_seq, const AttentionMask& mask, AttnNorm norm) {
  AttentionOutput result{query_seq, Tensor()};
  for (const auto& b : blocks) result = cross_attention_block(result.out, kv_seq, b, mask, norm);
  return result;
}

}  // namespace msfin::attn
