#pragma once

#include <array>
#include <vector>

#include "ufg/tensor.hpp"

namespace ufg {

inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr int kMsSsimScales = 5;
inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001,
                                                         0.2363, 0.1333};
inline constexpr double kPsnrCap = 100.0;
// Five fixed scales need 2^4 per side with at least a 2px coarsest plane.
inline constexpr int kMsSsimMinSide = 32;

// Normalized 1-D Gaussian window; samples at i - (size-1)/2 so even sizes
// (used when a coarse MS-SSIM scale is narrower than 11) stay centered.
std::vector<double> gaussian_window(int size, double sigma);

double mse(const Tensor& a, const Tensor& b);

// 10*log10(1/MSE), peak 1.0; identical images return the 100 dB cap.
double psnr(const Tensor& a, const Tensor& b);

// Mean local SSIM, 11x11 Gaussian window sigma 1.5, valid positions only;
// 3-channel inputs are converted to luminance first.
double ssim(const Tensor& a, const Tensor& b);

// Fixed 5-scale MS-SSIM (2x2 average-pool pyramid). The window shrinks to
// the plane side when a coarse scale is narrower than 11.
double ms_ssim(const Tensor& a, const Tensor& b);

struct SsimStats {
  double mean_ssim = 0.0;
  double mean_cs = 0.0;
};

// Windowed statistics on 1-channel planes; shared by ssim and ms_ssim.
SsimStats ssim_stats(const Tensor& a, const Tensor& b, int window);

}  // namespace ufg
