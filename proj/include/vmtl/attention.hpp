#pragma once

#include <cstddef>

#include "vmtl/conv.hpp"
#include "vmtl/ops.hpp"

namespace vmtl {

// One deeply supervised attention branch. Produces saliency features and an
// activation map for the supervision path (both upsampled to image size) and
// a spatial attention map at the level's native resolution.
struct AttentionOut {
    Var s_up;      // saliency features [F,H0,W0]
    Var a_up;      // activation logits [H0,W0]
    Var attention; // softmax map [h,w], entries sum to 1
};

// x: [C,T,h,w]. feat_w: [F,C,3,3], act_w: [1,F,1,1]; biases per channel.
// Pipeline: temporal average pool -> feature conv (+ReLU) -> activation conv;
// the attention map is a spatial softmax of the native-resolution activation.
inline AttentionOut attention_forward(Var x, Var feat_w, Var feat_b, Var act_w, Var act_b,
                                      std::size_t target_h, std::size_t target_w) {
    const Tensor& fw = feat_w.value();
    check_dim(fw.rank() == 4 && fw.dim(2) % 2 == 1 && fw.dim(3) % 2 == 1,
              "attention_forward: feature kernel must have odd spatial extent");
    const std::size_t ph = (fw.dim(2) - 1) / 2, pw = (fw.dim(3) - 1) / 2;

    Var pooled = ops::temporal_avg_pool(x); // [C,h,w]
    Var s = ops::relu(ops::add_channel_bias(
        ops::conv2d_spatial(pooled, feat_w, {1, 1}, {ph, pw}), feat_b));
    Var a3 = ops::add_channel_bias(ops::conv2d_spatial(s, act_w, {1, 1}, {0, 0}), act_b);
    check_dim(a3.value().dim(0) == 1, "attention_forward: activation conv must emit 1 channel");
    const std::size_t h = a3.value().dim(1), w = a3.value().dim(2);

    Var a = ops::reshape(a3, {h, w});
    AttentionOut out;
    out.attention = ops::spatial_softmax(a);
    out.s_up = ops::upsample_bilinear(s, target_h, target_w);
    out.a_up = ops::upsample_bilinear(a, target_h, target_w);
    return out;
}

// Feature modulation: (1 + M) ⊙ X with M broadcast over channels and time.
inline Var apply_attention(Var x, Var attention) { return ops::scale_by_map(x, attention); }

} // namespace vmtl
