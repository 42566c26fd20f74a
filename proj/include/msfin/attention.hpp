#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msfin/params.hpp"
#include "msfin/tensor.hpp"

namespace msfin::attn {

/// How score rows are turned into mixing weights. `softmax` is the default;
/// `layernorm_literal` standardizes each score row instead.
enum class AttnNorm { softmax, layernorm_literal };

AttnNorm parse_attn_norm(const std::string& s);
std::string to_string(AttnNorm n);

/// Pre-norm transformer block parameters (projections without bias, two
/// LayerNorms, GeLU feed-forward).
struct AttentionBlockParams {
  Tensor w_q, w_k, w_v, w_o;        // d x d
  Tensor ln1_gain, ln1_bias;        // d
  Tensor ln2_gain, ln2_bias;        // d
  Tensor ffn_w1, ffn_b1;            // d x d_ff, d_ff
  Tensor ffn_w2, ffn_b2;            // d_ff x d, d
  std::size_t heads = 1;

  std::size_t width() const { return w_q.dim(0); }

  static AttentionBlockParams create(ParamStore& store, const std::string& prefix, std::size_t d,
                                     std::size_t d_ff, std::size_t heads, Rng& rng);
};

enum class MaskKind { none, causal, key_padding, causal_padding };

struct AttentionMask {
  MaskKind kind = MaskKind::none;
  /// For key_padding: nonzero marks a padded key. Either one flag per key
  /// (shared over the batch) or batch * keys flags.
  std::vector<std::uint8_t> padding;

  static AttentionMask none() { return {}; }
  static AttentionMask causal() { return {MaskKind::causal, {}}; }
  static AttentionMask key_padding(std::vector<std::uint8_t> padded) {
    return {MaskKind::key_padding, std::move(padded)};
  }
  /// Causal, and padded positions are hidden from every later query. A query
  /// always sees its own position so no row is empty.
  static AttentionMask causal_padding(std::vector<std::uint8_t> padded) {
    return {MaskKind::causal_padding, std::move(padded)};
  }
};

/// Block output plus attention weights. For rank-3 inputs [B, L, d] weights
/// are [B, heads, Lq, Lk]; for rank-2 inputs the batch axis is dropped.
struct AttentionOutput {
  Tensor out;
  Tensor weights;
};

// Inputs are [L, d] or batched [B, L, d].
AttentionOutput self_attention_block(const Tensor& x, const AttentionBlockParams& p,
                                     const AttentionMask& mask,
                                     AttnNorm norm = AttnNorm::softmax);
AttentionOutput cross_attention_block(const Tensor& query_seq, const Tensor& kv_seq,
                                      const AttentionBlockParams& p, const AttentionMask& mask,
                                      AttnNorm norm = AttnNorm::softmax);
/// Self-attention block under a causal mask.
Tensor causal_temporal_block(const Tensor& x, const AttentionBlockParams& p,
                             AttnNorm norm = AttnNorm::softmax);

/// Sequential self-attention stack; weights come from the last layer (undefined
/// when `blocks` is empty, in which case the input is returned unchanged).
AttentionOutput stack(const std::vector<AttentionBlockParams>& blocks, const Tensor& x,
                      const AttentionMask& mask, AttnNorm norm = AttnNorm::softmax);
/// Cross-attention stack: each layer queries with the previous output and
/// attends over the same `kv_seq`.
AttentionOutput cross_stack(const std::vector<AttentionBlockParams>& blocks, const Tensor& query_seq,
                            const Tensor& kv_seq, const AttentionMask& mask,
                            AttnNorm norm = AttnNorm::softmax);

}  // namespace msfin::attn
