#include "ufg/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace ufg::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

NodePtr make_node(Tensor value, std::vector<NodePtr> inputs,
                  std::function<void(Node&)> backward_op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->inputs = std::move(inputs);
  for (const auto& in : n->inputs)
    if (in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backward_op = std::move(backward_op);
  return n;
}

void check_broadcastable(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b) && b.size() != 1)
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

}  // namespace

NodePtr leaf(Tensor v, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->requires_grad = requires_grad;
  return n;
}

NodePtr constant(Tensor v) { return leaf(std::move(v), false); }

NodePtr constant_scalar(double v) { return constant(Tensor::scalar(v)); }

void backward(const NodePtr& root) {
  if (root->value.size() != 1)
    throw DimensionError("backward: root must be a scalar node");
  if (!root->requires_grad && root->inputs.empty() && !root->backward_op) {
    // constant graph; nothing to do
  }
  // Post-order DFS over the requires_grad subgraph.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* child = node->inputs[idx++].get();
      if (child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad.fill(0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_op && n->grad.size() == n->value.size()) n->backward_op(*n);
  }
}

// ---------------------------------------------------------------- elementwise

namespace {

template <class FwdAB, class BwdA, class BwdB>
NodePtr binary_op(const NodePtr& a, const NodePtr& b, const char* name,
                  FwdAB fwd, BwdA bwd_a, BwdB bwd_b) {
  check_broadcastable(a->value, b->value, name);
  const bool bcast = b->value.size() == 1 && a->value.size() != 1;
  Tensor out(a->value.shape());
  const int64_t n = a->value.size();
  const double* pa = a->value.data();
  const double* pb = b->value.data();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(pa[i], pb[bcast ? 0 : i]);
  return make_node(std::move(out), {a, b},
                   [bcast, bwd_a, bwd_b](Node& self) {
                     const auto& a_ = self.inputs[0];
                     const auto& b_ = self.inputs[1];
                     const int64_t n_ = self.value.size();
                     const double* g = self.grad.data();
                     const double* pa_ = a_->value.data();
                     const double* pb_ = b_->value.data();
                     if (a_->requires_grad) {
                       double* da = a_->ensure_grad().data();
                       for (int64_t i = 0; i < n_; ++i)
                         da[i] += g[i] * bwd_a(pa_[i], pb_[bcast ? 0 : i]);
                     }
                     if (b_->requires_grad) {
                       double* db = b_->ensure_grad().data();
                       for (int64_t i = 0; i < n_; ++i)
                         db[bcast ? 0 : i] += g[i] * bwd_b(pa_[i], pb_[bcast ? 0 : i]);
                     }
                   });
}

template <class Fwd, class Bwd>
NodePtr unary_op(const NodePtr& a, Fwd fwd, Bwd bwd) {
  Tensor out(a->value.shape());
  const int64_t n = a->value.size();
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(a->value[i]);
  return make_node(std::move(out), {a}, [bwd](Node& self) {
    const auto& a_ = self.inputs[0];
    if (!a_->requires_grad) return;
    double* da = a_->ensure_grad().data();
    const double* g = self.grad.data();
    const double* pa = a_->value.data();
    const int64_t n_ = self.value.size();
    for (int64_t i = 0; i < n_; ++i) da[i] += g[i] * bwd(pa[i]);
  });
}

}  // namespace

NodePtr add(const NodePtr& a, const NodePtr& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return 1.0; });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double) { return 1.0; },
                   [](double, double) { return -1.0; });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double, double y) { return y; },
                   [](double x, double) { return x; });
}

NodePtr div(const NodePtr& a, const NodePtr& b) {
  return binary_op(a, b, "div", [](double x, double y) { return x / y; },
                   [](double, double y) { return 1.0 / y; },
                   [](double x, double y) { return -x / (y * y); });
}

NodePtr add_scalar(const NodePtr& a, double c) {
  return unary_op(a, [c](double x) { return x + c; }, [](double) { return 1.0; });
}

NodePtr mul_scalar(const NodePtr& a, double c) {
  return unary_op(a, [c](double x) { return x * c; }, [c](double) { return c; });
}

NodePtr neg(const NodePtr& a) { return mul_scalar(a, -1.0); }

NodePtr exp_(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double x) { return std::exp(x); });
}

NodePtr abs_(const NodePtr& a) {
  return unary_op(a, [](double x) { return std::fabs(x); },
                  [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

NodePtr square(const NodePtr& a) {
  return unary_op(a, [](double x) { return x * x; },
                  [](double x) { return 2.0 * x; });
}

NodePtr pow_const(const NodePtr& a, double p) {
  return unary_op(a, [p](double x) { return std::pow(x, p); },
                  [p](double x) {
                    if (x > 0.0) return p * std::pow(x, p - 1.0);
                    if (p == 1.0) return 1.0;
                    return 0.0;
                  });
}

NodePtr leaky_relu(const NodePtr& a, double slope) {
  return unary_op(a, [slope](double x) { return x >= 0 ? x : slope * x; },
                  [slope](double x) { return x >= 0 ? 1.0 : slope; });
}

NodePtr relu(const NodePtr& a) { return leaky_relu(a, 0.0); }

NodePtr clamp01(const NodePtr& a) {
  return unary_op(a,
                  [](double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); },
                  [](double x) { return (x > 0.0 && x < 1.0) ? 1.0 : 0.0; });
}

// ------------------------------------------------------------------ structure

NodePtr concat_ch(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw DimensionError("concat_ch: empty input list");
  const int h = parts[0]->value.dim(1);
  const int w = parts[0]->value.dim(2);
  int c_total = 0;
  for (const auto& p : parts) {
    if (p->value.ndim() != 3 || p->value.dim(1) != h || p->value.dim(2) != w)
      throw DimensionError("concat_ch: spatial dims mismatch");
    c_total += p->value.dim(0);
  }
  Tensor out({c_total, h, w});
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.data(), p->value.data() + p->value.size(),
              out.data() + off);
    off += p->value.size();
  }
  return make_node(std::move(out), parts, [](Node& self) {
    int64_t off_ = 0;
    for (auto& in : self.inputs) {
      const int64_t n = in->value.size();
      if (in->requires_grad) {
        double* d = in->ensure_grad().data();
        const double* g = self.grad.data() + off_;
        for (int64_t i = 0; i < n; ++i) d[i] += g[i];
      }
      off_ += n;
    }
  });
}

NodePtr stack_scalars(const std::vector<NodePtr>& scalars) {
  if (scalars.empty()) throw DimensionError("stack_scalars: empty batch");
  Tensor out({static_cast<int>(scalars.size())});
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i]->value.size() != 1)
      throw DimensionError("stack_scalars: inputs must be scalars");
    out[static_cast<int64_t>(i)] = scalars[i]->value[0];
  }
  return make_node(std::move(out), scalars, [](Node& self) {
    for (size_t i = 0; i < self.inputs.size(); ++i) {
      auto& in = self.inputs[i];
      if (in->requires_grad)
        in->ensure_grad()[0] += self.grad[static_cast<int64_t>(i)];
    }
  });
}

NodePtr mean_all(const NodePtr& a) {
  const int64_t n = a->value.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a->value[i];
  return make_node(Tensor::scalar(s / static_cast<double>(n)), {a},
                   [](Node& self) {
                     auto& in = self.inputs[0];
                     if (!in->requires_grad) return;
                     const double g =
                         self.grad[0] / static_cast<double>(in->value.size());
                     double* d = in->ensure_grad().data();
                     const int64_t n_ = in->value.size();
                     for (int64_t i = 0; i < n_; ++i) d[i] += g;
                   });
}

NodePtr sum_all(const NodePtr& a) {
  const int64_t n = a->value.size();
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a->value[i];
  return make_node(Tensor::scalar(s), {a}, [](Node& self) {
    auto& in = self.inputs[0];
    if (!in->requires_grad) return;
    const double g = self.grad[0];
    double* d = in->ensure_grad().data();
    const int64_t n_ = in->value.size();
    for (int64_t i = 0; i < n_; ++i) d[i] += g;
  });
}

Tensor luminance_value(const Tensor& x) {
  if (x.ndim() != 3) throw DimensionError("luminance: expected {C,H,W}");
  if (x.dim(0) == 1) return x;
  if (x.dim(0) != 3) throw DimensionError("luminance: channels must be 1 or 3");
  const int h = x.dim(1), w = x.dim(2);
  Tensor out({1, h, w});
  const int64_t plane = static_cast<int64_t>(h) * w;
  const double* r = x.data();
  const double* g = x.data() + plane;
  const double* b = x.data() + 2 * plane;
  for (int64_t i = 0; i < plane; ++i)
    out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

NodePtr luminance(const NodePtr& a) {
  if (a->value.dim(0) == 1) return a;
  Tensor out = luminance_value(a->value);
  return make_node(std::move(out), {a}, [](Node& self) {
    auto& in = self.inputs[0];
    if (!in->requires_grad) return;
    const int64_t plane = self.value.size();
    double* d = in->ensure_grad().data();
    const double* g = self.grad.data();
    for (int64_t i = 0; i < plane; ++i) {
      d[i] += 0.299 * g[i];
      d[plane + i] += 0.587 * g[i];
      d[2 * plane + i] += 0.114 * g[i];
    }
  });
}

// -------------------------------------------------------------------- conv2d

namespace {

struct ConvDims {
  int c, h, w, o, kh, kw, stride, dil, ph, pw, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& wt, int stride, int dil,
                   int ph, int pw) {
  if (x.ndim() != 3 || wt.ndim() != 4)
    throw DimensionError("conv2d: expected x {C,H,W}, w {O,C,Kh,Kw}");
  ConvDims d{};
  d.c = x.dim(0);
  d.h = x.dim(1);
  d.w = x.dim(2);
  d.o = wt.dim(0);
  d.kh = wt.dim(2);
  d.kw = wt.dim(3);
  d.stride = stride;
  d.dil = dil;
  d.ph = ph;
  d.pw = pw;
  if (wt.dim(1) != d.c)
    throw DimensionError("conv2d: weight expects " + std::to_string(wt.dim(1)) +
                         " input channels, got " + std::to_string(d.c));
  d.oh = (d.h + 2 * ph - dil * (d.kh - 1) - 1) / stride + 1;
  d.ow = (d.w + 2 * pw - dil * (d.kw - 1) - 1) / stride + 1;
  if (d.oh <= 0 || d.ow <= 0)
    throw DimensionError("conv2d: input too small for kernel");
  return d;
}

void im2col(const Tensor& x, const ConvDims& d, std::vector<double>& col) {
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
  col.assign(static_cast<size_t>(d.c) * d.kh * d.kw * cols, 0.0);
  for (int c = 0; c < d.c; ++c) {
    const double* plane = x.data() + static_cast<int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        double* row =
            col.data() + ((static_cast<int64_t>(c) * d.kh + ky) * d.kw + kx) * cols;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.ph + ky * d.dil;
          if (iy < 0 || iy >= d.h) continue;
          const double* src = plane + static_cast<int64_t>(iy) * d.w;
          double* dst = row + static_cast<int64_t>(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pw + kx * d.dil;
            if (ix >= 0 && ix < d.w) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& col, const ConvDims& d, Tensor& dx) {
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
  for (int c = 0; c < d.c; ++c) {
    double* plane = dx.data() + static_cast<int64_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const double* row =
            col.data() + ((static_cast<int64_t>(c) * d.kh + ky) * d.kw + kx) * cols;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.ph + ky * d.dil;
          if (iy < 0 || iy >= d.h) continue;
          double* dst = plane + static_cast<int64_t>(iy) * d.w;
          const double* src = row + static_cast<int64_t>(oy) * d.ow;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pw + kx * d.dil;
            if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor conv_forward(const Tensor& x, const Tensor& wt, const Tensor* bias,
                    const ConvDims& d) {
  const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
  const int64_t k = static_cast<int64_t>(d.c) * d.kh * d.kw;
  std::vector<double> col;
  im2col(x, d, col);
  Tensor out({d.o, d.oh, d.ow});
  CMapMat wm(wt.data(), d.o, k);
  CMapMat cm(col.data(), k, cols);
  MapMat om(out.data(), d.o, cols);
  om.noalias() = wm * cm;
  if (bias) {
    for (int o = 0; o < d.o; ++o) {
      double* row = out.data() + static_cast<int64_t>(o) * cols;
      const double b = (*bias)[o];
      for (int64_t i = 0; i < cols; ++i) row[i] += b;
    }
  }
  return out;
}

}  // namespace

Tensor conv2d_value(const Tensor& x, const Tensor& w, const Tensor* b,
                    int stride, int dilation, int pad_h, int pad_w) {
  const ConvDims d = conv_dims(x, w, stride, dilation, pad_h, pad_w);
  return conv_forward(x, w, b, d);
}

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b,
               int stride, int dilation, int pad_h, int pad_w) {
  const ConvDims d = conv_dims(x->value, w->value, stride, dilation, pad_h, pad_w);
  if (b && b->value.size() != d.o)
    throw DimensionError("conv2d: bias size mismatch");
  Tensor out = conv_forward(x->value, w->value, b ? &b->value : nullptr, d);
  std::vector<NodePtr> inputs = b ? std::vector<NodePtr>{x, w, b}
                                  : std::vector<NodePtr>{x, w};
  return make_node(std::move(out), std::move(inputs), [d](Node& self) {
    const auto& x_ = self.inputs[0];
    const auto& w_ = self.inputs[1];
    const NodePtr b_ = self.inputs.size() > 2 ? self.inputs[2] : nullptr;
    const int64_t cols = static_cast<int64_t>(d.oh) * d.ow;
    const int64_t k = static_cast<int64_t>(d.c) * d.kh * d.kw;
    CMapMat gm(self.grad.data(), d.o, cols);
    if (w_->requires_grad) {
      // dW = G * col^T ; the col matrix is recomputed to avoid holding it
      // alive for the whole graph.
      std::vector<double> col;
      im2col(x_->value, d, col);
      CMapMat cm(col.data(), k, cols);
      MapMat dwm(w_->ensure_grad().data(), d.o, k);
      dwm.noalias() += gm * cm.transpose();
    }
    if (b_ && b_->requires_grad) {
      double* db = b_->ensure_grad().data();
      for (int o = 0; o < d.o; ++o) {
        const double* row = self.grad.data() + static_cast<int64_t>(o) * cols;
        double s = 0.0;
        for (int64_t i = 0; i < cols; ++i) s += row[i];
        db[o] += s;
      }
    }
    if (x_->requires_grad) {
      std::vector<double> dcol(static_cast<size_t>(k) * cols);
      MapMat dcm(dcol.data(), k, cols);
      CMapMat wm(w_->value.data(), d.o, k);
      dcm.noalias() = wm.transpose() * gm;
      col2im_add(dcol, d, x_->ensure_grad());
    }
  });
}

NodePtr conv2d_depthwise(const NodePtr& x, const NodePtr& w, const NodePtr& b,
                         int pad) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.ndim() != 3 || wv.ndim() != 4 || wv.dim(1) != 1 ||
      wv.dim(0) != xv.dim(0))
    throw DimensionError("conv2d_depthwise: expected w {C,1,Kh,Kw} matching x");
  const int c = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
  const int kh = wv.dim(2), kw = wv.dim(3);
  Tensor out({c, h, wd});
  for (int ch = 0; ch < c; ++ch) {
    const double* plane = xv.data() + static_cast<int64_t>(ch) * h * wd;
    const double* kern = wv.data() + static_cast<int64_t>(ch) * kh * kw;
    const double bias = b ? b->value[ch] : 0.0;
    double* op = out.data() + static_cast<int64_t>(ch) * h * wd;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < wd; ++xx) {
        double s = bias;
        for (int ky = 0; ky < kh; ++ky) {
          const int iy = y - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kw; ++kx) {
            const int ix = xx - pad + kx;
            if (ix < 0 || ix >= wd) continue;
            s += kern[ky * kw + kx] * plane[static_cast<int64_t>(iy) * wd + ix];
          }
        }
        op[static_cast<int64_t>(y) * wd + xx] = s;
      }
    }
  }
  std::vector<NodePtr> inputs = b ? std::vector<NodePtr>{x, w, b}
                                  : std::vector<NodePtr>{x, w};
  return make_node(std::move(out), std::move(inputs), [pad, kh, kw](Node& self) {
    const auto& x_ = self.inputs[0];
    const auto& w_ = self.inputs[1];
    const NodePtr b_ = self.inputs.size() > 2 ? self.inputs[2] : nullptr;
    const int c_ = x_->value.dim(0), h_ = x_->value.dim(1),
              wd_ = x_->value.dim(2);
    for (int ch = 0; ch < c_; ++ch) {
      const double* g = self.grad.data() + static_cast<int64_t>(ch) * h_ * wd_;
      const double* plane = x_->value.data() + static_cast<int64_t>(ch) * h_ * wd_;
      const double* kern = w_->value.data() + static_cast<int64_t>(ch) * kh * kw;
      double* dk = w_->requires_grad
                       ? w_->ensure_grad().data() + static_cast<int64_t>(ch) * kh * kw
                       : nullptr;
      double* dx = x_->requires_grad
                       ? x_->ensure_grad().data() + static_cast<int64_t>(ch) * h_ * wd_
                       : nullptr;
      double db = 0.0;
      for (int y = 0; y < h_; ++y) {
        for (int xx = 0; xx < wd_; ++xx) {
          const double gv = g[static_cast<int64_t>(y) * wd_ + xx];
          db += gv;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = y - pad + ky;
            if (iy < 0 || iy >= h_) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = xx - pad + kx;
              if (ix < 0 || ix >= wd_) continue;
              if (dk) dk[ky * kw + kx] += gv * plane[static_cast<int64_t>(iy) * wd_ + ix];
              if (dx) dx[static_cast<int64_t>(iy) * wd_ + ix] += gv * kern[ky * kw + kx];
            }
          }
        }
      }
      if (b_ && b_->requires_grad) b_->ensure_grad()[ch] += db;
    }
  });
}

// ------------------------------------------------------------------- pooling

Tensor avg_pool_value(const Tensor& x, int factor) {
  if (x.ndim() != 3) throw DimensionError("avg_pool: expected {C,H,W}");
  if (factor < 1) throw DimensionError("avg_pool: factor must be >= 1");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h / factor, ow = w / factor;
  if (oh == 0 || ow == 0) throw DimensionError("avg_pool: input smaller than factor");
  Tensor out({c, oh, ow});
  const double inv = 1.0 / (static_cast<double>(factor) * factor);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = 0.0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx)
            s += x.at(ch, oy * factor + dy, ox * factor + dx);
        out.at(ch, oy, ox) = s * inv;
      }
  return out;
}

NodePtr avg_pool(const NodePtr& x, int factor) {
  Tensor out = avg_pool_value(x->value, factor);
  return make_node(std::move(out), {x}, [factor](Node& self) {
    auto& in = self.inputs[0];
    if (!in->requires_grad) return;
    Tensor& dx = in->ensure_grad();
    const int c = self.value.dim(0), oh = self.value.dim(1),
              ow = self.value.dim(2);
    const double inv = 1.0 / (static_cast<double>(factor) * factor);
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const double g = self.grad.at(ch, oy, ox) * inv;
          for (int dy = 0; dy < factor; ++dy)
            for (int dx_ = 0; dx_ < factor; ++dx_)
              dx.at(ch, oy * factor + dy, ox * factor + dx_) += g;
        }
  });
}

NodePtr upsample_nearest(const NodePtr& x, int factor) {
  if (x->value.ndim() != 3)
    throw DimensionError("upsample_nearest: expected {C,H,W}");
  const int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  Tensor out({c, h * factor, w * factor});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h * factor; ++y)
      for (int xx = 0; xx < w * factor; ++xx)
        out.at(ch, y, xx) = x->value.at(ch, y / factor, xx / factor);
  return make_node(std::move(out), {x}, [factor](Node& self) {
    auto& in = self.inputs[0];
    if (!in->requires_grad) return;
    Tensor& dx = in->ensure_grad();
    const int c = self.value.dim(0), oh = self.value.dim(1),
              ow = self.value.dim(2);
    for (int ch = 0; ch < c; ++ch)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx)
          dx.at(ch, y / factor, xx / factor) += self.grad.at(ch, y, xx);
  });
}

// ------------------------------------------------------------- spectral scale

NodePtr spectral_scale(const NodePtr& w, const Tensor& u, const Tensor& v,
                       double sigma_floor) {
  const Tensor& wv = w->value;
  const int rows = wv.dim(0);
  const int64_t cols = wv.size() / rows;
  if (u.size() != rows || v.size() != cols)
    throw DimensionError("spectral_scale: u/v size mismatch");
  // sigma = u^T W v
  double sigma = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* row = wv.data() + r * cols;
    double s = 0.0;
    for (int64_t ccc = 0; ccc < cols; ++ccc) s += row[ccc] * v[ccc];
    sigma += u[r] * s;
  }
  if (std::fabs(sigma) < sigma_floor) sigma = sigma_floor;
  Tensor out(wv.shape());
  const double inv = 1.0 / sigma;
  for (int64_t i = 0; i < wv.size(); ++i) out[i] = wv[i] * inv;
  Tensor u_copy = u, v_copy = v;
  return make_node(std::move(out), {w},
                   [sigma, u_copy, v_copy, rows, cols](Node& self) {
                     auto& w_ = self.inputs[0];
                     if (!w_->requires_grad) return;
                     // d(W/sigma)/dW with sigma = u^T W v, u v constant:
                     // dL/dW = G/sigma - (sum G .* Wbar)/sigma * u v^T
                     double gdotwbar = 0.0;
                     for (int64_t i = 0; i < self.value.size(); ++i)
                       gdotwbar += self.grad[i] * self.value[i];
                     const double coef = gdotwbar / sigma;
                     double* dw = w_->ensure_grad().data();
                     const double inv_ = 1.0 / sigma;
                     for (int r = 0; r < rows; ++r)
                       for (int64_t ccc = 0; ccc < cols; ++ccc)
                         dw[r * cols + ccc] +=
                             self.grad[r * cols + ccc] * inv_ -
                             coef * u_copy[r] * v_copy[ccc];
                   });
}

}  // namespace ufg::ad
