#ifndef FACESWAP_AD_HPP
#define FACESWAP_AD_HPP

#include <functional>
#include <memory>
#include <vector>

#include "faceswap/tensor.hpp"

// Reverse-mode automatic differentiation over Tensor values. Graphs are
// built per evaluation and freed when the last Var goes out of scope.
namespace faceswap::ad {

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;

    Tensor& ensure_grad() {
        if (!has_grad) {
            grad = Tensor::zeros(value.shape);
            has_grad = true;
        }
        return grad;
    }
};

Var leaf(Tensor value);        // participates in gradients
Var constant(Tensor value);    // no gradient tracked

// Runs reverse-mode accumulation from a scalar root (shape {1}).
void backward(const Var& root);

// --- elementwise / reductions ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float c);
Var add_scalar(const Var& a, float c);
Var silu(const Var& a);
Var clamp(const Var& a, float lo, float hi);  // gradient passes only inside (lo, hi)
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var mse(const Var& a, const Var& b);
Var dot(const Var& a, const Var& b);
Var sqrt_s(const Var& a, float eps = 0.0f);  // elementwise sqrt(x + eps)
Var div_s(const Var& a, const Var& b);       // elementwise a / b
Var l2_normalize(const Var& v, float eps = 1e-12f);
Var cosine(const Var& a, const Var& b);

// --- shape / layout ---
Var concat_ch(const Var& a, const Var& b);
Var broadcast_add_ch(const Var& x, const Var& per_channel);
Var global_avg_pool(const Var& x);
Var avg_pool2(const Var& x);
Var upsample_nearest2(const Var& x);
// Samples an axis-aligned source rectangle (top-left y0,x0, size hs x ws,
// in pixel units) to an out_h x out_w grid with bilinear interpolation.
Var crop_resize(const Var& x, float y0, float x0, float hs, float ws, int out_h, int out_w);

// --- linear algebra / network layers ---
Var linear(const Var& x, const Var& w, const Var& b);              // x {I}, w {O,I}, b {O}
Var conv2d(const Var& x, const Var& w, const Var& b, int pad);     // stride 1
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, float eps = 1e-5f);
Var softmax_ch(const Var& x);                                      // per-pixel over channels
Var attention(const Var& q, const Var& k, const Var& v);           // single head, {C,H,W} each

// --- losses ---
Var cross_entropy_logits(const Var& logits, int label);                   // logits {K}
Var cross_entropy_map(const Var& logits, const std::vector<int>& labels); // logits {K,H,W}

}  // namespace faceswap::ad

#endif
