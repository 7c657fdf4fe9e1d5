#include "ufg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ufg/errors.hpp"

namespace fs = std::filesystem;

namespace ufg {

RainPreset RainPreset::heavy() {
  return {"heavy", 40, 80, 6.0, 24.0, 0.5, 1.6};
}
RainPreset RainPreset::moderate() {
  return {"moderate", 15, 40, 4.0, 16.0, 0.25, 1.2};
}
RainPreset RainPreset::light() {
  return {"light", 3, 15, 3.0, 10.0, 0.1, 0.9};
}

RainPreset RainPreset::by_name(const std::string& name) {
  if (name == "heavy") return heavy();
  if (name == "moderate") return moderate();
  if (name == "light") return light();
  throw ConfigError("unknown rain preset: " + name);
}

void RainPreset::validate() const {
  if (drop_count_min < 0 || drop_count_max < drop_count_min)
    throw ConfigError("RainPreset: bad drop count range");
  if (radius_min <= 0.0 || radius_max < radius_min)
    throw ConfigError("RainPreset: bad radius range");
  if (flow_probability < 0.0 || flow_probability > 1.0)
    throw ConfigError("RainPreset: flow_probability outside [0,1]");
}

namespace {

double bilinear(const ImageTensor& img, int c, double y, double x) {
  const int h = img.dim(1), w = img.dim(2);
  const auto clampd = [](double v, double hi) {
    return v < 0.0 ? 0.0 : (v > hi ? hi : v);
  };
  y = clampd(y, h - 1.0);
  x = clampd(x, w - 1.0);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = y - y0, fx = x - x0;
  return img.at(c, y0, x0) * (1 - fy) * (1 - fx) +
         img.at(c, y0, x1) * (1 - fy) * fx +
         img.at(c, y1, x0) * fy * (1 - fx) + img.at(c, y1, x1) * fy * fx;
}

struct DropSpec {
  double cx, cy, rx, ry;
  double flow_len;  // 0 = plain drop
};

// Stamps one drop (or one flow segment chain) into premultiplied overlay
// buffers: content accumulates refraction-sampled pixels weighted by alpha,
// alpha accumulates with the standard over operator.
void stamp_drop(const ImageTensor& clean, const DropSpec& d, Tensor& content,
                Tensor& alpha) {
  const int h = clean.dim(1), w = clean.dim(2);
  const int segments = d.flow_len > 0 ? static_cast<int>(d.flow_len) + 1 : 1;
  for (int s = 0; s < segments; ++s) {
    const double fade = segments == 1 ? 1.0 : 1.0 - static_cast<double>(s) / segments;
    const double shrink = segments == 1 ? 1.0 : 1.0 - 0.5 * s / segments;
    const double cy = d.cy + s, cx = d.cx;
    const double rx = std::max(1.0, d.rx * shrink);
    const double ry = std::max(1.0, d.ry * shrink);
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + ry)));
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + rx)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const double dist2 = dx * dx + dy * dy;
        if (dist2 >= 1.0) continue;
        const double a = fade * std::pow(1.0 - dist2, 1.5);
        if (a <= 0.0) continue;
        // refraction: flipped vertically about the drop center, 1.2x magnified
        const double sy = cy - (y - cy) / 1.2;
        const double sx = cx + (x - cx) / 1.2;
        const double prev_a = alpha.at(0, y, x);
        const double add_a = a * (1.0 - prev_a);
        if (add_a <= 0.0) continue;
        alpha.at(0, y, x) = prev_a + add_a;
        for (int c = 0; c < 3; ++c) {
          const double v = std::min(1.0, bilinear(clean, c, sy, sx) + 0.05);
          content.at(c, y, x) += add_a * v;
        }
      }
    }
  }
}

}  // namespace

PairedSample synthesize(const ImageTensor& clean, const RainPreset& preset,
                        uint64_t seed) {
  require_image(clean, "synthesize");
  if (clean.dim(0) != 3)
    throw DimensionError("synthesize: clean image must have 3 channels");
  const int h = clean.dim(1), w = clean.dim(2);
  if (h < 64 || w < 64)
    throw DimensionError("synthesize: min side is 64, got " + clean.shape_str());
  preset.validate();

  Rng rng(seed);
  const int n_drops = rng.uniform_int(preset.drop_count_min, preset.drop_count_max);

  Tensor content({3, h, w});  // premultiplied by alpha
  Tensor alpha({1, h, w});
  for (int i = 0; i < n_drops; ++i) {
    DropSpec d{};
    d.cx = rng.uniform(0.0, w - 1.0);
    d.cy = rng.uniform(0.0, h - 1.0);
    d.rx = rng.uniform(preset.radius_min, preset.radius_max);
    d.ry = d.rx * rng.uniform(0.8, 1.3);
    const bool flow = rng.uniform() < preset.flow_probability;
    d.flow_len = flow ? rng.uniform(2.0, 5.0) * d.ry : 0.0;
    stamp_drop(clean, d, content, alpha);
  }

  Tensor alpha_blur = preset.blur_sigma > 0 ? gaussian_blur(alpha, preset.blur_sigma)
                                            : alpha;
  Tensor content_blur = preset.blur_sigma > 0
                            ? gaussian_blur(content, preset.blur_sigma)
                            : content;

  PairedSample out;
  out.clean = clean;
  out.seed = seed;
  out.drop_mask = Tensor({1, h, w});
  out.rain = Tensor({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double a = alpha_blur.at(0, y, x);
      a = a < 0.0 ? 0.0 : (a > 1.0 ? 1.0 : a);
      out.drop_mask.at(0, y, x) = a;
      for (int c = 0; c < 3; ++c) {
        const double base = clean.at(c, y, x);
        if (a == 0.0) {
          out.rain.at(c, y, x) = base;  // exact identity outside the mask
          continue;
        }
        // un-premultiply the blurred drop layer before compositing
        const double drop = content_blur.at(c, y, x) / std::max(alpha_blur.at(0, y, x), 1e-12);
        double v = base * (1.0 - a) + drop * a;
        out.rain.at(c, y, x) = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
    }
  return out;
}

namespace {

std::string index_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d.png", index);
  return buf;
}

}  // namespace

std::vector<ManifestRow> build_dataset(const std::string& clean_dir,
                                       const std::string& out_dir,
                                       const RainPreset& preset, int n,
                                       uint64_t seed) {
  preset.validate();
  std::vector<std::string> sources;
  if (!fs::is_directory(clean_dir))
    throw InputError("build_dataset: clean_dir does not exist: " + clean_dir);
  for (const auto& e : fs::directory_iterator(clean_dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      sources.push_back(e.path().string());
  std::sort(sources.begin(), sources.end());
  if (sources.empty())
    throw InputError("build_dataset: no PNG files in " + clean_dir);

  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "rain", ec);
  fs::create_directories(fs::path(out_dir) / "clean", ec);
  fs::create_directories(fs::path(out_dir) / "mask", ec);
  if (!fs::is_directory(fs::path(out_dir) / "rain"))
    throw IoError("build_dataset: cannot create output dir " + out_dir);

  std::vector<ManifestRow> rows;
  uint64_t seq = seed;
  for (int i = 0; i < n; ++i) {
    uint64_t mix = seq + 0x632be59bd9b4e019ULL * (static_cast<uint64_t>(i) + 1);
    const uint64_t pair_seed = splitmix64(mix);
    const std::string& src = sources[static_cast<size_t>(i) % sources.size()];
    const ImageTensor clean = load_png(src);
    const PairedSample s = synthesize(clean, preset, pair_seed);
    save_png((fs::path(out_dir) / "rain" / index_name(i)).string(), s.rain);
    save_png((fs::path(out_dir) / "clean" / index_name(i)).string(), s.clean);
    save_png((fs::path(out_dir) / "mask" / index_name(i)).string(), s.drop_mask);
    rows.push_back({i, fs::path(src).filename().string(), pair_seed, preset.name});
  }

  std::ofstream mf(fs::path(out_dir) / "manifest.csv");
  if (!mf) throw IoError("build_dataset: cannot write manifest in " + out_dir);
  mf << "index,clean_source,seed,preset\n";
  for (const auto& r : rows)
    mf << r.index << "," << r.clean_source << "," << r.seed << "," << r.preset
       << "\n";
  return rows;
}

std::vector<ManifestRow> read_manifest(const std::string& dataset_dir) {
  std::ifstream mf(fs::path(dataset_dir) / "manifest.csv");
  if (!mf)
    throw InputError("read_manifest: missing manifest.csv in " + dataset_dir);
  std::vector<ManifestRow> rows;
  std::string line;
  std::getline(mf, line);  // header
  while (std::getline(mf, line)) {
    if (line.empty()) continue;
    ManifestRow r;
    size_t p0 = line.find(','), p1 = line.find(',', p0 + 1),
           p2 = line.find(',', p1 + 1);
    if (p0 == std::string::npos || p1 == std::string::npos ||
        p2 == std::string::npos)
      throw InputError("read_manifest: malformed row: " + line);
    r.index = std::stoi(line.substr(0, p0));
    r.clean_source = line.substr(p0 + 1, p1 - p0 - 1);
    r.seed = std::stoull(line.substr(p1 + 1, p2 - p1 - 1));
    r.preset = line.substr(p2 + 1);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<DatasetPair> load_dataset(const std::string& dataset_dir) {
  const auto rows = read_manifest(dataset_dir);
  std::vector<DatasetPair> pairs;
  pairs.reserve(rows.size());
  for (const auto& r : rows) {
    DatasetPair p;
    p.rain = load_png((fs::path(dataset_dir) / "rain" / index_name(r.index)).string());
    p.clean = load_png((fs::path(dataset_dir) / "clean" / index_name(r.index)).string());
    p.mask = load_png((fs::path(dataset_dir) / "mask" / index_name(r.index)).string());
    p.row = r;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace ufg
