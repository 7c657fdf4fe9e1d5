#include "ufg/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ufg/autodiff.hpp"
#include "ufg/errors.hpp"

namespace ufg {

EdgeMap edge_map(const ImageTensor& x) {
  require_image(x, "edge_map");
  const Tensor lum = ad::luminance_value(x);
  const Tensor smooth = gaussian_blur(lum, 1.0);
  const int h = smooth.dim(1), w = smooth.dim(2);

  auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
  auto px = [&](int y, int xx) { return smooth.at(0, clampi(y, h), clampi(xx, w)); };

  Tensor mag({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx) {
      const double gx = (px(y - 1, xx + 1) + 2.0 * px(y, xx + 1) + px(y + 1, xx + 1)) -
                        (px(y - 1, xx - 1) + 2.0 * px(y, xx - 1) + px(y + 1, xx - 1));
      const double gy = (px(y + 1, xx - 1) + 2.0 * px(y + 1, xx) + px(y + 1, xx + 1)) -
                        (px(y - 1, xx - 1) + 2.0 * px(y - 1, xx) + px(y - 1, xx + 1));
      mag.at(0, y, xx) = std::sqrt(gx * gx + gy * gy);
    }

  // nearest-rank 99th percentile
  std::vector<double> sorted(mag.data(), mag.data() + mag.size());
  std::sort(sorted.begin(), sorted.end());
  const size_t rank = static_cast<size_t>(
      std::ceil(0.99 * static_cast<double>(sorted.size())));
  const double p99 = sorted[std::min(rank, sorted.size()) - 1];

  Tensor out({1, h, w});
  if (p99 <= 0.0) return out;  // flat image: no edges
  for (int64_t i = 0; i < mag.size(); ++i) {
    const double v = mag[i] / p99;
    out[i] = v > 1.0 ? 1.0 : v;
  }
  return out;
}

RainMap compute_rain_map(const ImageTensor& x_ra, const ImageTensor& x_est) {
  require_same_shape(x_ra, x_est, "compute_rain_map");
  Tensor out(x_ra.shape());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = x_ra[i] - x_est[i];
  return out;
}

namespace {

constexpr char kPriorMagic[4] = {'U', 'F', 'P', 'R'};

template <class T>
void write_le(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_le(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_rain_prior(const std::string& path, const RainMap& map) {
  if (map.ndim() != 3) throw DimensionError("save_rain_prior: expected {C,H,W}");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("save_rain_prior: cannot open " + path);
  os.write(kPriorMagic, 4);
  write_le<uint16_t>(os, 0);  // dtype: f32
  write_le<uint16_t>(os, static_cast<uint16_t>(map.dim(0)));
  write_le<uint32_t>(os, static_cast<uint32_t>(map.dim(1)));
  write_le<uint32_t>(os, static_cast<uint32_t>(map.dim(2)));
  for (int64_t i = 0; i < map.size(); ++i) {
    const float f = static_cast<float>(map[i]);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
  if (!os) throw IoError("save_rain_prior: write failure for " + path);
}

ExternalPrior load_external_prior(const std::string& path, int expect_h,
                                  int expect_w) {
  auto check_dims = [&](const Tensor& t) {
    if ((expect_h > 0 && t.dim(1) != expect_h) ||
        (expect_w > 0 && t.dim(2) != expect_w))
      throw DimensionError("load_external_prior: file dims " + t.shape_str() +
                           " do not match expected " + std::to_string(expect_h) +
                           "x" + std::to_string(expect_w));
  };
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("load_external_prior: missing file " + path);
    char magic[4] = {};
    probe.read(magic, 4);
    if (std::memcmp(magic, kPriorMagic, 4) == 0) {
      std::ifstream is(path, std::ios::binary);
      is.seekg(4);
      const uint16_t dtype = read_le<uint16_t>(is);
      const int c = read_le<uint16_t>(is);
      const int h = static_cast<int>(read_le<uint32_t>(is));
      const int w = static_cast<int>(read_le<uint32_t>(is));
      if (dtype != 0) throw IoError("load_external_prior: unknown dtype code");
      if (c < 1 || h < 1 || w < 1)
        throw DimensionError("load_external_prior: bad dims in header");
      Tensor map({c, h, w});
      for (int64_t i = 0; i < map.size(); ++i) {
        float f;
        is.read(reinterpret_cast<char*>(&f), 4);
        map[i] = f;
      }
      if (!is) throw IoError("load_external_prior: truncated file " + path);
      for (int64_t i = 0; i < map.size(); ++i)
        map[i] = std::clamp(map[i], -1.0, 1.0);
      check_dims(map);
      return {PriorKind::rain, std::move(map)};
    }
  }
  // otherwise treat as PNG edge map
  Tensor img = load_png(path);
  Tensor map = img.dim(0) == 1 ? img : ad::luminance_value(img);
  check_dims(map);
  return {PriorKind::edge, std::move(map)};
}

}  // namespace ufg
