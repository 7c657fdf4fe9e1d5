#pragma once

#include <string>
#include <vector>

#include "ufg/blocks.hpp"
#include "ufg/checkpoint.hpp"

namespace ufg::nn {

struct GeneratorConfig {
  int in_channels = 3;
  int base_channels = 32;
  int depth = 3;
  std::vector<int> bottom_dilations = {1, 2, 4, 8};
  int growth = 16;
  int drdb_layers = 3;
  bool use_attention = true;
  bool use_dilation = true;  // ablation switch: false forces dilation 1
  AamConfig attention;

  void validate() const;
  int stage_channels(int k) const { return base_channels << k; }
};

// DRD-UNet: DRDB encoder stages with stride-2 downsampling, four chained
// DRDBs with a long skip at the bottom, nearest-upsample decoder with
// encoder skips, AAM/AuAM prior injection on decoder features, and a
// zero-initialized residual head so the net starts as the identity map.
struct Generator {
  GeneratorConfig cfg;
  Conv2dLayer stem;
  std::vector<Drdb> enc_drdb;
  std::vector<Conv2dLayer> down;
  std::vector<Drdb> bottom;
  std::vector<Conv2dLayer> up_conv;
  std::vector<Conv2dLayer> fuse_conv;
  std::vector<Drdb> dec_drdb;
  Conv2dLayer head;
  Aam aam;
  std::vector<AuAm> auams;

  static Generator make(ParamStore& ps, const std::string& prefix,
                        const GeneratorConfig& cfg, Rng& rng);
  NodePtr forward(const NodePtr& o, const NodePtr& m_r, const NodePtr& m_e) const;
  Tensor infer(const Tensor& o, const Tensor& m_r, const Tensor& m_e) const;
};

// EstNet is the same backbone with attention disabled.
GeneratorConfig estnet_config(GeneratorConfig cfg);

struct CriticConfig {
  int in_channels = 3;
  std::vector<int> widths = {64, 128, 256, 512};
  bool spectral = true;
  bool use_attention = true;
  AamConfig attention;

  void validate() const;
};

// Spectrally normalized stride-2 conv stack with prior injection after the
// first stage; the score is the spatial mean of an untransformed 1-channel
// head.
struct Critic {
  CriticConfig cfg;
  std::vector<Conv2dLayer> convs;
  Conv2dLayer head;
  Aam aam;
  AuAm auam;

  static Critic make(ParamStore& ps, const std::string& prefix,
                     const CriticConfig& cfg, Rng& rng);
  NodePtr forward(const NodePtr& x, const NodePtr& m_r, const NodePtr& m_e,
                  bool update_sn) const;
  // Runs a power-iteration step on every spectral weight (no forward pass).
  void warm_up_spectral(int iterations) const;
};

// ---- parameter (de)serialization --------------------------------------

std::vector<ckpt::Record> store_records(const ParamStore& ps,
                                        ckpt::Dtype dtype = ckpt::f32);
// Loads records whose names carry the store's parameters; missing or
// mismatched shapes throw.
void load_store(ParamStore& ps, const ckpt::Checkpoint& c);

}  // namespace ufg::nn
