#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ufg/image.hpp"
#include "ufg/rng.hpp"
#include "ufg/tensor.hpp"

namespace ufg {

struct RainPreset {
  std::string name;
  int drop_count_min = 0;
  int drop_count_max = 0;
  double radius_min = 0.0;  // pixels
  double radius_max = 0.0;
  double flow_probability = 0.0;
  double blur_sigma = 0.0;

  static RainPreset heavy();
  static RainPreset moderate();
  static RainPreset light();
  static RainPreset by_name(const std::string& name);
  void validate() const;
};

struct PairedSample {
  ImageTensor rain;       // {3,H,W}
  ImageTensor clean;      // {3,H,W}
  ImageTensor drop_mask;  // {1,H,W} soft alpha
  uint64_t seed = 0;
};

// Deterministic raindrop/flow compositor. Drop interiors are a vertically
// flipped 1.2x-magnified resample of the local neighborhood, blurred and
// brightness-lifted; flows are drops extruded downward with fading alpha.
PairedSample synthesize(const ImageTensor& clean, const RainPreset& preset,
                        uint64_t seed);

struct ManifestRow {
  int index = 0;
  std::string clean_source;
  uint64_t seed = 0;
  std::string preset;
};

// Writes <out>/{rain,clean,mask}/NNNNN.png plus manifest.csv. Clean images
// are cycled; each index gets its own derived seed.
std::vector<ManifestRow> build_dataset(const std::string& clean_dir,
                                       const std::string& out_dir,
                                       const RainPreset& preset, int n,
                                       uint64_t seed);

std::vector<ManifestRow> read_manifest(const std::string& dataset_dir);

struct DatasetPair {
  ImageTensor rain, clean, mask;
  ManifestRow row;
};

std::vector<DatasetPair> load_dataset(const std::string& dataset_dir);

}  // namespace ufg
