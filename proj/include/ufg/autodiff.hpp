#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ufg/tensor.hpp"

namespace ufg::ad {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Reverse-mode tape node. Graphs are rebuilt per forward pass; leaves
// (parameters, inputs) persist across passes and keep their grad buffers.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  // Accumulates this node's grad into its inputs' grads.
  std::function<void(Node&)> backward_op;

  Tensor& ensure_grad() {
    if (grad.size() != value.size()) grad = Tensor(value.shape());
    return grad;
  }
  void zero_grad() {
    if (grad.size() == value.size()) grad.fill(0.0);
  }
};

NodePtr leaf(Tensor v, bool requires_grad = true);
NodePtr constant(Tensor v);
NodePtr constant_scalar(double v);

// Runs reverse accumulation from a scalar root (value size must be 1).
void backward(const NodePtr& root);

// ---- elementwise (b may be shape {1}: broadcast over a) ----
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr div(const NodePtr& a, const NodePtr& b);
NodePtr add_scalar(const NodePtr& a, double c);
NodePtr mul_scalar(const NodePtr& a, double c);
NodePtr neg(const NodePtr& a);
NodePtr exp_(const NodePtr& a);
NodePtr abs_(const NodePtr& a);
NodePtr square(const NodePtr& a);
NodePtr pow_const(const NodePtr& a, double p);
NodePtr leaky_relu(const NodePtr& a, double slope);
NodePtr relu(const NodePtr& a);
// clamp to [0,1]; gradient passes where the pre-clamp value is inside (0,1)
NodePtr clamp01(const NodePtr& a);

// ---- structure ----
NodePtr concat_ch(const std::vector<NodePtr>& parts);  // {C,H,W} along C
NodePtr stack_scalars(const std::vector<NodePtr>& scalars);  // {1}... -> {N}
NodePtr mean_all(const NodePtr& a);  // -> {1}
NodePtr sum_all(const NodePtr& a);   // -> {1}
NodePtr luminance(const NodePtr& a);  // {3,H,W} -> {1,H,W}; {1,H,W} passthrough

// ---- spatial ----
// x {C,H,W}, w {O,C,Kh,Kw}, b {O} or nullptr. Zero padding.
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b,
               int stride, int dilation, int pad_h, int pad_w);
// w {C,1,Kh,Kw}: per-channel 3x3-style conv
NodePtr conv2d_depthwise(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         int pad);
NodePtr avg_pool(const NodePtr& x, int factor);  // floor semantics
NodePtr upsample_nearest(const NodePtr& x, int factor);

// Spectral weight scaling for conv kernels: returns w / sigma with
// sigma = u^T W v, u and v treated as constants (they are power-iteration
// buffers updated outside the graph).
NodePtr spectral_scale(const NodePtr& w, const Tensor& u, const Tensor& v,
                       double sigma_floor = 1e-12);

// ---- plain-tensor helpers shared with non-autodiff code paths ----
Tensor conv2d_value(const Tensor& x, const Tensor& w, const Tensor* b,
                    int stride, int dilation, int pad_h, int pad_w);
Tensor avg_pool_value(const Tensor& x, int factor);
Tensor luminance_value(const Tensor& x);

}  // namespace ufg::ad
