#include "ufg/blocks.hpp"

#include <cmath>

#include "ufg/errors.hpp"

namespace ufg::nn {

NodePtr ParamStore::create(const std::string& name, Tensor init) {
  if (index_.count(name))
    throw ConfigError("ParamStore: duplicate parameter " + name);
  auto node = ad::leaf(std::move(init), trainable_);
  index_[name] = items_.size();
  items_.emplace_back(name, node);
  return node;
}

NodePtr ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("ParamStore: missing parameter " + name);
  return items_[it->second].second;
}

std::vector<NodePtr> ParamStore::nodes() const {
  std::vector<NodePtr> out;
  out.reserve(items_.size());
  for (const auto& [_, n] : items_) out.push_back(n);
  return out;
}

int64_t ParamStore::param_count() const {
  int64_t n = 0;
  for (const auto& [_, node] : items_) n += node->value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (const auto& [_, node] : items_) node->zero_grad();
}

Tensor he_normal(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double stddev = std::sqrt(2.0 / std::max(1, fan_in));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = stddev * rng.gaussian();
  return t;
}

// ------------------------------------------------------------- spectral norm

SpectralState SpectralState::init(int rows, int64_t cols, Rng& rng) {
  SpectralState st;
  st.u = Tensor({rows});
  st.v = Tensor({static_cast<int>(cols)});
  for (int64_t i = 0; i < st.u.size(); ++i) st.u[i] = rng.gaussian();
  for (int64_t i = 0; i < st.v.size(); ++i) st.v[i] = rng.gaussian();
  auto normalize = [](Tensor& t) {
    double n = 0.0;
    for (int64_t i = 0; i < t.size(); ++i) n += t[i] * t[i];
    n = std::sqrt(n);
    if (n > 1e-12)
      for (int64_t i = 0; i < t.size(); ++i) t[i] /= n;
  };
  normalize(st.u);
  normalize(st.v);
  return st;
}

namespace {

void normalize_vec(Tensor& t) {
  double n = 0.0;
  for (int64_t i = 0; i < t.size(); ++i) n += t[i] * t[i];
  n = std::sqrt(n);
  if (n > 1e-12)
    for (int64_t i = 0; i < t.size(); ++i) t[i] /= n;
}

}  // namespace

double spectral_sigma(const Tensor& w, const SpectralState& st) {
  const int rows = w.dim(0);
  const int64_t cols = w.size() / rows;
  double sigma = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double s = 0.0;
    for (int64_t c = 0; c < cols; ++c) s += row[c] * st.v[c];
    sigma += st.u[r] * s;
  }
  return std::fabs(sigma) < 1e-12 ? 1e-12 : sigma;
}

double spectral_power_iterate(const Tensor& w, SpectralState& st) {
  const int rows = w.dim(0);
  const int64_t cols = w.size() / rows;
  if (st.u.size() != rows || st.v.size() != cols)
    throw DimensionError("spectral_power_iterate: state size mismatch");
  // v <- normalize(W^T u); u <- normalize(W v)
  Tensor v_new({static_cast<int>(cols)});
  for (int r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    const double ur = st.u[r];
    for (int64_t c = 0; c < cols; ++c) v_new[c] += row[c] * ur;
  }
  normalize_vec(v_new);
  Tensor u_new({rows});
  for (int r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double s = 0.0;
    for (int64_t c = 0; c < cols; ++c) s += row[c] * v_new[c];
    u_new[r] = s;
  }
  normalize_vec(u_new);
  st.u = std::move(u_new);
  st.v = std::move(v_new);
  return spectral_sigma(w, st);
}

Tensor spectral_normalize(const Tensor& w, SpectralState& st) {
  const double sigma = spectral_power_iterate(w, st);
  Tensor out = w;
  for (int64_t i = 0; i < out.size(); ++i) out[i] /= sigma;
  return out;
}

// -------------------------------------------------------------------- layers

Conv2dLayer Conv2dLayer::make(ParamStore& ps, const std::string& name, int in_ch,
                              int out_ch, int kh, int kw, int stride,
                              int dilation, int pad_h, int pad_w, Rng& rng,
                              WeightInit init, double bias_value, bool spectral) {
  Conv2dLayer layer;
  const int fan_in = in_ch * kh * kw;
  Tensor wt = init == WeightInit::he
                  ? he_normal({out_ch, in_ch, kh, kw}, fan_in, rng)
                  : Tensor({out_ch, in_ch, kh, kw});
  layer.w = ps.create(name + ".w", std::move(wt));
  layer.b = ps.create(name + ".b", Tensor({out_ch}, bias_value));
  layer.stride = stride;
  layer.dilation = dilation;
  layer.pad_h = pad_h;
  layer.pad_w = pad_w;
  layer.spectral = spectral;
  if (spectral)
    layer.sn = SpectralState::init(out_ch, static_cast<int64_t>(in_ch) * kh * kw, rng);
  return layer;
}

NodePtr Conv2dLayer::forward(const NodePtr& x, bool update_sn) const {
  NodePtr weight = w;
  if (spectral) {
    if (update_sn) spectral_power_iterate(w->value, sn);
    weight = ad::spectral_scale(w, sn.u, sn.v);
  }
  return ad::conv2d(x, weight, b, stride, dilation, pad_h, pad_w);
}

// ---------------------------------------------------------------------- DRDB

Drdb Drdb::make(ParamStore& ps, const std::string& name, const DrdbConfig& cfg,
                Rng& rng) {
  if (cfg.layers < 1) throw ConfigError("Drdb: layers must be >= 1");
  if (cfg.in_channels < 1 || cfg.growth < 1 || cfg.dilation < 1)
    throw ConfigError("Drdb: bad config");
  Drdb block;
  block.cfg = cfg;
  int width = cfg.in_channels;
  for (int i = 0; i < cfg.layers; ++i) {
    block.dense.push_back(Conv2dLayer::make(
        ps, name + ".dense" + std::to_string(i), width, cfg.growth, 3, 3, 1,
        cfg.dilation, cfg.dilation, cfg.dilation, rng));
    width += cfg.growth;
  }
  block.fusion = Conv2dLayer::make(ps, name + ".fusion", width, cfg.in_channels,
                                   1, 1, 1, 1, 0, 0, rng);
  return block;
}

NodePtr Drdb::forward(const NodePtr& x) const {
  if (x->value.dim(0) != cfg.in_channels)
    throw DimensionError("Drdb: expected " + std::to_string(cfg.in_channels) +
                         " channels, got " + std::to_string(x->value.dim(0)));
  std::vector<NodePtr> feats{x};
  NodePtr cat = x;
  for (const auto& layer : dense) {
    auto out = ad::leaky_relu(layer.forward(cat), 0.2);
    feats.push_back(out);
    cat = ad::concat_ch(feats);
  }
  auto fused = fusion.forward(cat);
  return ad::add(fused, x);
}

// ----------------------------------------------------------------------- DAF

Daf Daf::make(ParamStore& ps, const std::string& name, int channels, int growth,
              int layers, Rng& rng) {
  Daf daf;
  daf.drdb = Drdb::make(ps, name + ".drdb",
                        DrdbConfig{channels, growth, layers, 1}, rng);
  daf.dw_w = ps.create(name + ".dw.w",
                       he_normal({channels, 1, 3, 3}, 9, rng));
  daf.dw_b = ps.create(name + ".dw.b", Tensor({channels}));
  return daf;
}

NodePtr Daf::forward(const NodePtr& v) const {
  auto z = ad::conv2d_depthwise(drdb.forward(ad::leaky_relu(v, 0.2)), dw_w, dw_b, 1);
  auto w = ad::exp_(ad::neg(ad::square(z)));
  return ad::mul(v, w);
}

AttnActivation AttnActivation::make(ParamStore& ps, const std::string& name,
                                    int channels, int growth, int layers,
                                    AttnAct mode, Rng& rng) {
  AttnActivation act;
  act.mode = mode;
  if (mode == AttnAct::daf)
    act.daf = Daf::make(ps, name + ".daf", channels, growth, layers, rng);
  return act;
}

NodePtr AttnActivation::forward(const NodePtr& x) const {
  return mode == AttnAct::daf ? daf.forward(x) : ad::relu(x);
}

// ----------------------------------------------------------------------- AAM

Aam Aam::make(ParamStore& ps, const std::string& name, const AamConfig& cfg,
              Rng& rng) {
  Aam aam;
  aam.cfg = cfg;
  aam.conv_rain = Conv2dLayer::make(ps, name + ".rain_conv", cfg.rain_channels,
                                    cfg.branch_width, 3, 3, 1, 1, 1, 1, rng);
  aam.conv_edge = Conv2dLayer::make(ps, name + ".edge_conv", cfg.edge_channels,
                                    cfg.branch_width, 3, 3, 1, 1, 1, 1, rng);
  aam.act_rain = AttnActivation::make(ps, name + ".rain_act", cfg.branch_width,
                                      cfg.daf_growth, cfg.daf_layers, cfg.act, rng);
  aam.act_edge = AttnActivation::make(ps, name + ".edge_act", cfg.branch_width,
                                      cfg.daf_growth, cfg.daf_layers, cfg.act, rng);
  return aam;
}

NodePtr Aam::forward(const NodePtr& m_r, const NodePtr& m_e) const {
  if (m_r->value.dim(1) != m_e->value.dim(1) ||
      m_r->value.dim(2) != m_e->value.dim(2))
    throw DimensionError("Aam: rain/edge maps must share spatial dims");
  auto rain = act_rain.forward(conv_rain.forward(m_r));
  auto edge = act_edge.forward(conv_edge.forward(m_e));
  return ad::concat_ch({rain, edge});
}

// ---------------------------------------------------------------------- AuAM

AuAm AuAm::make(ParamStore& ps, const std::string& name, int fused_channels,
                int target_channels, AttnAct mode, int daf_growth,
                int daf_layers, Rng& rng) {
  AuAm au;
  au.target_channels = target_channels;
  au.conv_f = Conv2dLayer::make(ps, name + ".f_conv", fused_channels,
                                fused_channels, 3, 3, 1, 1, 1, 1, rng);
  au.act = AttnActivation::make(ps, name + ".act", fused_channels, daf_growth,
                                daf_layers, mode, rng);
  au.conv_s = Conv2dLayer::make(ps, name + ".gate_conv", fused_channels,
                                target_channels, 3, 3, 1, 1, 1, 1, rng,
                                WeightInit::he, 1.0);
  return au;
}

NodePtr AuAm::forward(const NodePtr& m_f_star, const NodePtr& t_k) const {
  if (t_k->value.dim(0) != target_channels)
    throw DimensionError("AuAm: target has " + std::to_string(t_k->value.dim(0)) +
                         " channels, gate emits " + std::to_string(target_channels));
  const int mh = m_f_star->value.dim(1), th = t_k->value.dim(1);
  const int mw = m_f_star->value.dim(2), tw = t_k->value.dim(2);
  if (th < 1 || mh % th != 0 || mw % tw != 0 || mh / th != mw / tw)
    throw DimensionError("AuAm: attention map not pool-divisible to target dims");
  const int factor = mh / th;
  NodePtr pooled = factor == 1 ? m_f_star : ad::avg_pool(m_f_star, factor);
  auto gate = conv_s.forward(act.forward(conv_f.forward(pooled)));
  return ad::mul(t_k, gate);
}

}  // namespace ufg::nn
