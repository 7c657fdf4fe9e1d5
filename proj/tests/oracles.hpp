#pragma once

// Independent brute-force oracles. These stay deliberately naive (plain
// loops, no shared code with src/) so they can certify the optimized paths.

#include <cmath>
#include <vector>

#include "ufg/metrics.hpp"
#include "ufg/tensor.hpp"

namespace ufg::test {

inline Tensor conv2d_naive(const Tensor& x, const Tensor& w, const Tensor* b,
                           int stride, int dil, int ph, int pw) {
  const int c = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int oh = (h + 2 * ph - dil * (kh - 1) - 1) / stride + 1;
  const int ow = (wd + 2 * pw - dil * (kw - 1) - 1) / stride + 1;
  Tensor out({o, oh, ow});
  for (int oc = 0; oc < o; ++oc)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = b ? (*b)[oc] : 0.0;
        for (int ic = 0; ic < c; ++ic)
          for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
              const int iy = oy * stride - ph + ky * dil;
              const int ix = ox * stride - pw + kx * dil;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              s += w[((static_cast<int64_t>(oc) * c + ic) * kh + ky) * kw + kx] *
                   x.at(ic, iy, ix);
            }
        out.at(oc, oy, ox) = s;
      }
  return out;
}

inline double mse_naive(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline double l1_naive(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline Tensor luminance_naive(const Tensor& x) {
  if (x.dim(0) == 1) return x;
  Tensor out({1, x.dim(1), x.dim(2)});
  for (int y = 0; y < x.dim(1); ++y)
    for (int xx = 0; xx < x.dim(2); ++xx)
      out.at(0, y, xx) = 0.299 * x.at(0, y, xx) + 0.587 * x.at(1, y, xx) +
                         0.114 * x.at(2, y, xx);
  return out;
}

// Direct sliding-window SSIM statistics: every window evaluated from
// scratch with explicit weighted sums (no separable shortcut, no shared
// filtering code).
struct WindowStats {
  double mean_ssim = 0.0;
  double mean_cs = 0.0;
};

inline WindowStats ssim_windows_naive(const Tensor& a, const Tensor& b,
                                      int win) {
  const auto kernel = gaussian_window(win, kSsimSigma);
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  const int h = a.dim(1), w = a.dim(2);
  double sum_ssim = 0.0, sum_cs = 0.0;
  int count = 0;
  for (int y = 0; y + win <= h; ++y)
    for (int x = 0; x + win <= w; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double wt = kernel[static_cast<size_t>(i)] * kernel[static_cast<size_t>(j)];
          ma += wt * a.at(0, y + i, x + j);
          mb += wt * b.at(0, y + i, x + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double wt = kernel[static_cast<size_t>(i)] * kernel[static_cast<size_t>(j)];
          const double da = a.at(0, y + i, x + j) - ma;
          const double db = b.at(0, y + i, x + j) - mb;
          va += wt * da * da;
          vb += wt * db * db;
          cov += wt * da * db;
        }
      const double cs = (2 * cov + c2) / (va + vb + c2);
      const double lum = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
      sum_cs += cs;
      sum_ssim += lum * cs;
      ++count;
    }
  return {sum_ssim / count, sum_cs / count};
}

inline Tensor downsample2_naive(const Tensor& x) {
  const int h = x.dim(1) / 2, w = x.dim(2) / 2;
  Tensor out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      out.at(0, y, xx) = 0.25 * (x.at(0, 2 * y, 2 * xx) + x.at(0, 2 * y, 2 * xx + 1) +
                                 x.at(0, 2 * y + 1, 2 * xx) +
                                 x.at(0, 2 * y + 1, 2 * xx + 1));
  return out;
}

// Per-scale MS-SSIM oracle: luminance, then at each scale the direct
// windowed statistics, combined with the published weights.
inline double ms_ssim_naive(const Tensor& a, const Tensor& b) {
  Tensor la = luminance_naive(a);
  Tensor lb = luminance_naive(b);
  double score = 1.0;
  for (int s = 0; s < kMsSsimScales; ++s) {
    const int side = std::min(la.dim(1), la.dim(2));
    const int win = std::min(kSsimWindow, side);
    const WindowStats st = ssim_windows_naive(la, lb, win);
    const double term = s + 1 < kMsSsimScales ? std::max(st.mean_cs, 0.0)
                                              : std::max(st.mean_ssim, 0.0);
    score *= std::pow(term, kMsSsimWeights[static_cast<size_t>(s)]);
    if (s + 1 < kMsSsimScales) {
      la = downsample2_naive(la);
      lb = downsample2_naive(lb);
    }
  }
  return score;
}

}  // namespace ufg::test

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace ufg::test {

// largest singular value via dense SVD (Eigen), used as the spectral-norm
// oracle; the weight is matrixized as {rows, rest} like the implementation
inline double largest_singular_value(const Tensor& w) {
  const int rows = w.dim(0);
  const auto cols = static_cast<Eigen::Index>(w.size() / rows);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = w[r * cols + c];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace ufg::test
