#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "ufg/image.hpp"
#include "ufg/synth.hpp"

using namespace ufg;
using namespace ufg::test;

namespace {

ImageTensor make_scene(uint64_t seed, int h = 96, int w = 96) {
  Rng rng(seed);
  return gaussian_blur(random_tensor({3, h, w}, rng), 2.0);
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synthesize is bit-deterministic for a fixed seed") {
  const ImageTensor clean = make_scene(1);
  const auto a = synthesize(clean, RainPreset::light(), 7);
  const auto b = synthesize(clean, RainPreset::light(), 7);
  REQUIRE(a.rain.same_shape(b.rain));
  for (int64_t i = 0; i < a.rain.size(); ++i) CHECK(a.rain[i] == b.rain[i]);
  for (int64_t i = 0; i < a.drop_mask.size(); ++i)
    CHECK(a.drop_mask[i] == b.drop_mask[i]);
}

TEST_CASE("degenerate preset with zero drops returns the clean image") {
  ImageTensor clean = make_scene(2);
  RainPreset preset = RainPreset::light();
  preset.drop_count_min = preset.drop_count_max = 0;
  const auto s = synthesize(clean, preset, 3);
  for (int64_t i = 0; i < clean.size(); ++i) CHECK(s.rain[i] == clean[i]);
  for (int64_t i = 0; i < s.drop_mask.size(); ++i) CHECK(s.drop_mask[i] == 0.0);
}

TEST_CASE("outside the mask, rain equals clean exactly") {
  const ImageTensor clean = make_scene(3);
  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    const auto s = synthesize(clean, RainPreset::moderate(), seed);
    for (int y = 0; y < clean.dim(1); ++y)
      for (int x = 0; x < clean.dim(2); ++x) {
        if (s.drop_mask.at(0, y, x) != 0.0) continue;
        for (int c = 0; c < 3; ++c) CHECK(s.rain.at(c, y, x) == clean.at(c, y, x));
      }
  }
}

TEST_CASE("all outputs stay inside [0,1]") {
  const ImageTensor clean = make_scene(4);
  const auto s = synthesize(clean, RainPreset::heavy(), 21);
  CHECK(s.rain.min() >= 0.0);
  CHECK(s.rain.max() <= 1.0);
  CHECK(s.drop_mask.min() >= 0.0);
  CHECK(s.drop_mask.max() <= 1.0);
  CHECK(s.rain.all_finite());
}

TEST_CASE("heavy preset covers more than light over 100 seeds") {
  const ImageTensor clean = make_scene(5, 128, 128);
  double heavy_sum = 0.0, light_sum = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    heavy_sum += synthesize(clean, RainPreset::heavy(), seed).drop_mask.mean();
    light_sum += synthesize(clean, RainPreset::light(), seed).drop_mask.mean();
  }
  CHECK(heavy_sum / 100.0 > light_sum / 100.0);
  // and moderate sits between them (monotone presets)
  double mod_sum = 0.0;
  for (uint64_t seed = 0; seed < 100; ++seed)
    mod_sum += synthesize(clean, RainPreset::moderate(), seed).drop_mask.mean();
  CHECK(heavy_sum > mod_sum);
  CHECK(mod_sum > light_sum);
}

TEST_CASE("different seeds give different samples when drops exist") {
  const ImageTensor clean = make_scene(6);
  RainPreset preset = RainPreset::light();
  preset.drop_count_min = 1;
  int distinct = 0;
  auto prev = synthesize(clean, preset, 0);
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    auto cur = synthesize(clean, preset, seed);
    bool differs = false;
    for (int64_t i = 0; i < cur.rain.size() && !differs; ++i)
      differs = cur.rain[i] != prev.rain[i];
    if (differs) ++distinct;
    prev = std::move(cur);
  }
  CHECK(distinct == 100);
}

TEST_CASE("synthesize rejects undersized images") {
  Rng rng(7);
  Tensor tiny = random_tensor({3, 48, 96}, rng);
  CHECK_THROWS_AS(synthesize(tiny, RainPreset::light(), 1), DimensionError);
}

TEST_CASE("build_dataset: counting, layout, and byte determinism") {
  namespace fs = std::filesystem;
  const std::string root = "test_synth_tmp";
  fs::remove_all(root);
  fs::create_directories(root + "/clean");
  save_png(root + "/clean/a.png", make_scene(8));
  save_png(root + "/clean/b.png", make_scene(9));

  const auto rows =
      build_dataset(root + "/clean", root + "/ds", RainPreset::light(), 4, 5);
  CHECK(rows.size() == 4);
  for (int i = 0; i < 4; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "%05d.png", i);
    CHECK(fs::exists(root + "/ds/rain/" + name));
    CHECK(fs::exists(root + "/ds/clean/" + name));
    CHECK(fs::exists(root + "/ds/mask/" + name));
  }
  const auto manifest = read_manifest(root + "/ds");
  CHECK(manifest.size() == 4);
  CHECK(manifest[0].index == 0);
  CHECK(manifest[3].index == 3);
  CHECK(manifest[0].clean_source == "a.png");
  CHECK(manifest[1].clean_source == "b.png");
  CHECK(manifest[2].clean_source == "a.png");  // sources cycle
  CHECK(manifest[0].seed != manifest[2].seed);  // distinct per-index seeds

  const std::string manifest_bytes = read_file(root + "/ds/manifest.csv");
  const std::string rain0 = read_file(root + "/ds/rain/00000.png");
  build_dataset(root + "/clean", root + "/ds2", RainPreset::light(), 4, 5);
  CHECK(read_file(root + "/ds2/manifest.csv") == manifest_bytes);
  CHECK(read_file(root + "/ds2/rain/00000.png") == rain0);

  CHECK_THROWS_AS(
      build_dataset(root + "/missing", root + "/ds3", RainPreset::light(), 1, 1),
      InputError);
  fs::create_directories(root + "/empty");
  CHECK_THROWS_AS(
      build_dataset(root + "/empty", root + "/ds3", RainPreset::light(), 1, 1),
      InputError);
  fs::remove_all(root);
}
