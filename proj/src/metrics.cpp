#include "ufg/metrics.hpp"

#include <cmath>

#include "ufg/autodiff.hpp"
#include "ufg/errors.hpp"
#include "ufg/image.hpp"

namespace ufg {

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<size_t>(size));
  const double center = (size - 1) / 2.0;
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - center;
    w[static_cast<size_t>(i)] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += w[static_cast<size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  const double v = 10.0 * std::log10(1.0 / m);
  return v > kPsnrCap ? kPsnrCap : v;
}

namespace {

// Valid separable filtering: rows then columns, matching the graph-side
// ms_ssim loss which chains two conv nodes in the same order.
Tensor filter_valid(const Tensor& plane, const std::vector<double>& win) {
  const int h = plane.dim(1), w = plane.dim(2);
  const int k = static_cast<int>(win.size());
  Tensor tmp({1, h, w - k + 1});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x + k <= w; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * plane.at(0, y, x + i);
      tmp.at(0, y, x) = s;
    }
  Tensor out({1, h - k + 1, w - k + 1});
  for (int y = 0; y + k <= h; ++y)
    for (int x = 0; x < w - k + 1; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[static_cast<size_t>(i)] * tmp.at(0, y + i, x);
      out.at(0, y, x) = s;
    }
  return out;
}

Tensor elem_mul(const Tensor& a, const Tensor& b) {
  Tensor out(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

SsimStats ssim_stats(const Tensor& a, const Tensor& b, int window) {
  if (a.dim(0) != 1 || b.dim(0) != 1)
    throw DimensionError("ssim_stats: expects 1-channel planes");
  require_same_shape(a, b, "ssim_stats");
  if (a.dim(1) < window || a.dim(2) < window)
    throw TooSmallError("ssim_stats: plane smaller than window");

  const auto win = gaussian_window(window, kSsimSigma);
  const double c1 = kSsimK1 * kSsimK1;  // L = 1
  const double c2 = kSsimK2 * kSsimK2;

  const Tensor mu_a = filter_valid(a, win);
  const Tensor mu_b = filter_valid(b, win);
  const Tensor e_aa = filter_valid(elem_mul(a, a), win);
  const Tensor e_bb = filter_valid(elem_mul(b, b), win);
  const Tensor e_ab = filter_valid(elem_mul(a, b), win);

  double sum_ssim = 0.0, sum_cs = 0.0;
  const int64_t n = mu_a.size();
  for (int64_t i = 0; i < n; ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    sum_cs += cs;
    sum_ssim += lum * cs;
  }
  return {sum_ssim / static_cast<double>(n), sum_cs / static_cast<double>(n)};
}

double ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ssim");
  require_image(a, "ssim");
  if (a.dim(1) < kSsimWindow || a.dim(2) < kSsimWindow)
    throw TooSmallError("ssim: sides must be >= 11");
  return ssim_stats(ad::luminance_value(a), ad::luminance_value(b), kSsimWindow)
      .mean_ssim;
}

double ms_ssim(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "ms_ssim");
  require_image(a, "ms_ssim");
  if (a.dim(1) < kMsSsimMinSide || a.dim(2) < kMsSsimMinSide)
    throw TooSmallError("ms_ssim: sides must be >= 32 for 5 fixed scales");

  Tensor la = ad::luminance_value(a);
  Tensor lb = ad::luminance_value(b);
  double score = 1.0;
  for (int s = 0; s < kMsSsimScales; ++s) {
    const int side = std::min(la.dim(1), la.dim(2));
    const int window = std::min(kSsimWindow, side);
    const SsimStats st = ssim_stats(la, lb, window);
    const double term =
        s + 1 < kMsSsimScales ? std::max(st.mean_cs, 0.0) : std::max(st.mean_ssim, 0.0);
    score *= std::pow(term, kMsSsimWeights[static_cast<size_t>(s)]);
    if (s + 1 < kMsSsimScales) {
      la = ad::avg_pool_value(la, 2);
      lb = ad::avg_pool_value(lb, 2);
    }
  }
  return score;
}

}  // namespace ufg
