#pragma once

#include <string>

#include "ufg/image.hpp"
#include "ufg/tensor.hpp"

namespace ufg {

// EdgeMap: {1,H,W} in [0,1].  RainMap: {3,H,W} signed residual in [-1,1].
using EdgeMap = Tensor;
using RainMap = Tensor;

// Gaussian pre-smooth (sigma 1), Sobel magnitude on luminance, normalized by
// the 99th-percentile magnitude (nearest rank) and clamped to [0,1].
EdgeMap edge_map(const ImageTensor& x);

// M_R = x_ra - x_est, both in [0,1], so the residual stays in [-1,1].
RainMap compute_rain_map(const ImageTensor& x_ra, const ImageTensor& x_est);

enum class PriorKind { edge, rain };

struct ExternalPrior {
  PriorKind kind;
  Tensor map;
};

// PNG loads as an EdgeMap; the raw container (magic "UFPR", dtype code,
// C, H, W in a 16-byte header, then little-endian floats) loads as a
// RainMap rescaled to [-1,1] when stored differently. Nonzero expected dims
// are enforced against the file.
ExternalPrior load_external_prior(const std::string& path, int expect_h = 0,
                                  int expect_w = 0);

void save_rain_prior(const std::string& path, const RainMap& map);

}  // namespace ufg
