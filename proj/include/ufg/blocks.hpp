#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ufg/autodiff.hpp"
#include "ufg/rng.hpp"
#include "ufg/tensor.hpp"

namespace ufg::nn {

using ad::NodePtr;

// Registry of named parameter leaves. Insertion order is the checkpoint and
// optimizer order, so construction must be deterministic.
class ParamStore {
 public:
  explicit ParamStore(bool trainable = true) : trainable_(trainable) {}

  NodePtr create(const std::string& name, Tensor init);
  NodePtr find(const std::string& name) const;
  bool trainable() const { return trainable_; }

  const std::vector<std::pair<std::string, NodePtr>>& items() const {
    return items_;
  }
  std::vector<NodePtr> nodes() const;
  int64_t param_count() const;
  void zero_grads();

 private:
  bool trainable_;
  std::vector<std::pair<std::string, NodePtr>> items_;
  std::unordered_map<std::string, size_t> index_;
};

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng);

enum class WeightInit { he, zero };

// Persistent power-iteration vectors for one spectrally normalized weight.
struct SpectralState {
  Tensor u, v;
  static SpectralState init(int rows, int64_t cols, Rng& rng);
};

// One power-iteration step on (u,v); returns the spectral norm estimate
// sigma = u^T W v (floored at 1e-12). w is matrixized as {rows, rest}.
double spectral_power_iterate(const Tensor& w, SpectralState& st);
double spectral_sigma(const Tensor& w, const SpectralState& st);

// One power-iteration step, then returns w / sigma (plain-tensor path).
Tensor spectral_normalize(const Tensor& w, SpectralState& st);

struct Conv2dLayer {
  NodePtr w, b;
  int stride = 1, dilation = 1, pad_h = 0, pad_w = 0;
  bool spectral = false;
  mutable SpectralState sn;

  static Conv2dLayer make(ParamStore& ps, const std::string& name, int in_ch,
                          int out_ch, int kh, int kw, int stride, int dilation,
                          int pad_h, int pad_w, Rng& rng,
                          WeightInit init = WeightInit::he,
                          double bias_value = 0.0, bool spectral = false);

  // update_sn runs one power-iteration step before normalizing; pass false
  // for evaluation so inference does not mutate state.
  NodePtr forward(const NodePtr& x, bool update_sn = false) const;
};

struct DrdbConfig {
  int in_channels = 0;
  int growth = 16;
  int layers = 3;
  int dilation = 1;
};

// Dilated residual dense block: `layers` dilated 3x3 convs with dense
// connectivity and LeakyReLU(0.2), a 1x1 fusion back to in_channels, and a
// residual shortcut.
struct Drdb {
  DrdbConfig cfg;
  std::vector<Conv2dLayer> dense;
  Conv2dLayer fusion;

  static Drdb make(ParamStore& ps, const std::string& name, const DrdbConfig& cfg,
                   Rng& rng);
  NodePtr forward(const NodePtr& x) const;
};

// Learnable gate u = v * exp(-z^2) with z = depthwise3x3(DRDB(LeakyReLU(v))).
struct Daf {
  Drdb drdb;
  NodePtr dw_w, dw_b;

  static Daf make(ParamStore& ps, const std::string& name, int channels,
                  int growth, int layers, Rng& rng);
  NodePtr forward(const NodePtr& v) const;
};

enum class AttnAct { daf, relu };

// Phi in the attention modules: DAF normally, plain ReLU for the ablation.
struct AttnActivation {
  AttnAct mode = AttnAct::daf;
  Daf daf;

  static AttnActivation make(ParamStore& ps, const std::string& name,
                             int channels, int growth, int layers, AttnAct mode,
                             Rng& rng);
  NodePtr forward(const NodePtr& x) const;
};

struct AamConfig {
  int rain_channels = 3;
  int edge_channels = 1;
  int branch_width = 16;  // per-branch output width; fused = 2x
  AttnAct act = AttnAct::daf;
  int daf_growth = 8;
  int daf_layers = 2;
  int fused_channels() const { return 2 * branch_width; }
};

// Maps (rain map, edge map) to the fused attention features M_F*.
struct Aam {
  AamConfig cfg;
  Conv2dLayer conv_rain, conv_edge;
  AttnActivation act_rain, act_edge;

  static Aam make(ParamStore& ps, const std::string& name, const AamConfig& cfg,
                  Rng& rng);
  NodePtr forward(const NodePtr& m_r, const NodePtr& m_e) const;
};

// Pools M_F* down to the target map's size and multiplies the target by a
// learned gate. The gate conv starts at bias 1 so injection begins near
// identity.
struct AuAm {
  int target_channels = 0;
  Conv2dLayer conv_f, conv_s;
  AttnActivation act;

  static AuAm make(ParamStore& ps, const std::string& name, int fused_channels,
                   int target_channels, AttnAct mode, int daf_growth,
                   int daf_layers, Rng& rng);
  NodePtr forward(const NodePtr& m_f_star, const NodePtr& t_k) const;
};

}  // namespace ufg::nn
