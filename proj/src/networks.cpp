#include "ufg/networks.hpp"

#include "ufg/errors.hpp"

namespace ufg::nn {

void GeneratorConfig::validate() const {
  if (base_channels < 1 || depth < 1) throw ConfigError("GeneratorConfig: bad sizes");
  if (bottom_dilations.size() != 4)
    throw ConfigError("GeneratorConfig: exactly four bottom DRDBs expected");
  for (int d : bottom_dilations)
    if (d < 1) throw ConfigError("GeneratorConfig: dilation must be >= 1");
}

Generator Generator::make(ParamStore& ps, const std::string& prefix,
                          const GeneratorConfig& cfg, Rng& rng) {
  cfg.validate();
  Generator g;
  g.cfg = cfg;
  g.stem = Conv2dLayer::make(ps, prefix + ".stem", cfg.in_channels,
                             cfg.base_channels, 3, 3, 1, 1, 1, 1, rng);
  for (int k = 0; k < cfg.depth; ++k) {
    const int c = cfg.stage_channels(k);
    g.enc_drdb.push_back(Drdb::make(
        ps, prefix + ".enc" + std::to_string(k),
        DrdbConfig{c, cfg.growth, cfg.drdb_layers, 1}, rng));
    g.down.push_back(Conv2dLayer::make(ps, prefix + ".down" + std::to_string(k),
                                       c, cfg.stage_channels(k + 1), 3, 3, 2, 1,
                                       1, 1, rng));
  }
  const int cb = cfg.stage_channels(cfg.depth);
  for (int i = 0; i < 4; ++i) {
    const int dil = cfg.use_dilation ? cfg.bottom_dilations[static_cast<size_t>(i)] : 1;
    g.bottom.push_back(Drdb::make(ps, prefix + ".bottom" + std::to_string(i),
                                  DrdbConfig{cb, cfg.growth, cfg.drdb_layers, dil},
                                  rng));
  }
  for (int k = cfg.depth - 1; k >= 0; --k) {
    const int c = cfg.stage_channels(k);
    g.up_conv.push_back(Conv2dLayer::make(ps, prefix + ".up" + std::to_string(k),
                                          cfg.stage_channels(k + 1), c, 3, 3, 1,
                                          1, 1, 1, rng));
    g.fuse_conv.push_back(Conv2dLayer::make(
        ps, prefix + ".fuse" + std::to_string(k), 2 * c, c, 1, 1, 1, 1, 0, 0, rng));
    g.dec_drdb.push_back(Drdb::make(ps, prefix + ".dec" + std::to_string(k),
                                    DrdbConfig{c, cfg.growth, cfg.drdb_layers, 1},
                                    rng));
  }
  g.head = Conv2dLayer::make(ps, prefix + ".head", cfg.base_channels,
                             cfg.in_channels, 3, 3, 1, 1, 1, 1, rng,
                             WeightInit::zero);
  if (cfg.use_attention) {
    g.aam = Aam::make(ps, prefix + ".aam", cfg.attention, rng);
    for (int k = cfg.depth - 1; k >= 0; --k)
      g.auams.push_back(AuAm::make(ps, prefix + ".auam" + std::to_string(k),
                                   cfg.attention.fused_channels(),
                                   cfg.stage_channels(k), cfg.attention.act,
                                   cfg.attention.daf_growth,
                                   cfg.attention.daf_layers, rng));
  }
  return g;
}

NodePtr Generator::forward(const NodePtr& o, const NodePtr& m_r,
                           const NodePtr& m_e) const {
  const Tensor& ov = o->value;
  if (ov.ndim() != 3 || ov.dim(0) != cfg.in_channels)
    throw DimensionError("generator: expected {" + std::to_string(cfg.in_channels) +
                         ",H,W} input, got " + ov.shape_str());
  const int div = 1 << cfg.depth;
  if (ov.dim(1) % div != 0 || ov.dim(2) % div != 0)
    throw DimensionError("generator: dims must be divisible by 2^depth = " +
                         std::to_string(div) + ", got " + ov.shape_str());
  NodePtr m_f_star;
  if (cfg.use_attention) {
    if (!m_r || !m_e)
      throw ConfigError("generator: attention enabled but priors missing");
    if (m_r->value.dim(1) != ov.dim(1) || m_r->value.dim(2) != ov.dim(2) ||
        m_e->value.dim(1) != ov.dim(1) || m_e->value.dim(2) != ov.dim(2))
      throw DimensionError("generator: priors must share the input's spatial dims");
    m_f_star = aam.forward(m_r, m_e);
  }

  NodePtr x = stem.forward(o);
  std::vector<NodePtr> skips;
  for (int k = 0; k < cfg.depth; ++k) {
    x = enc_drdb[static_cast<size_t>(k)].forward(x);
    skips.push_back(x);
    x = ad::leaky_relu(down[static_cast<size_t>(k)].forward(x), 0.2);
  }
  const NodePtr bottom_in = x;
  for (const auto& block : bottom) x = block.forward(x);
  x = ad::add(x, bottom_in);  // long skip across the four bottom blocks
  for (int i = 0; i < cfg.depth; ++i) {
    const int k = cfg.depth - 1 - i;
    x = ad::upsample_nearest(x, 2);
    x = ad::leaky_relu(up_conv[static_cast<size_t>(i)].forward(x), 0.2);
    x = ad::concat_ch({x, skips[static_cast<size_t>(k)]});
    x = fuse_conv[static_cast<size_t>(i)].forward(x);
    x = dec_drdb[static_cast<size_t>(i)].forward(x);
    if (cfg.use_attention) x = auams[static_cast<size_t>(i)].forward(m_f_star, x);
  }
  return ad::clamp01(ad::add(o, head.forward(x)));
}

Tensor Generator::infer(const Tensor& o, const Tensor& m_r,
                        const Tensor& m_e) const {
  NodePtr on = ad::constant(o);
  NodePtr rn = cfg.use_attention ? ad::constant(m_r) : nullptr;
  NodePtr en = cfg.use_attention ? ad::constant(m_e) : nullptr;
  return forward(on, rn, en)->value;
}

GeneratorConfig estnet_config(GeneratorConfig cfg) {
  cfg.use_attention = false;
  return cfg;
}

void CriticConfig::validate() const {
  if (widths.empty()) throw ConfigError("CriticConfig: empty conv stack");
  for (int w : widths)
    if (w < 1) throw ConfigError("CriticConfig: bad width");
}

Critic Critic::make(ParamStore& ps, const std::string& prefix,
                    const CriticConfig& cfg, Rng& rng) {
  cfg.validate();
  Critic c;
  c.cfg = cfg;
  int in_ch = cfg.in_channels;
  for (size_t i = 0; i < cfg.widths.size(); ++i) {
    c.convs.push_back(Conv2dLayer::make(ps, prefix + ".conv" + std::to_string(i),
                                        in_ch, cfg.widths[i], 3, 3, 2, 1, 1, 1,
                                        rng, WeightInit::he, 0.0, cfg.spectral));
    in_ch = cfg.widths[i];
  }
  c.head = Conv2dLayer::make(ps, prefix + ".score", in_ch, 1, 3, 3, 1, 1, 1, 1,
                             rng, WeightInit::he, 0.0, cfg.spectral);
  if (cfg.use_attention) {
    c.aam = Aam::make(ps, prefix + ".aam", cfg.attention, rng);
    c.auam = AuAm::make(ps, prefix + ".auam", cfg.attention.fused_channels(),
                        cfg.widths[0], cfg.attention.act,
                        cfg.attention.daf_growth, cfg.attention.daf_layers, rng);
  }
  return c;
}

NodePtr Critic::forward(const NodePtr& x, const NodePtr& m_r, const NodePtr& m_e,
                        bool update_sn) const {
  const Tensor& xv = x->value;
  const int need = 1 << static_cast<int>(cfg.widths.size());
  if (xv.dim(1) < need || xv.dim(2) < need)
    throw DimensionError("critic: input dims must be >= " + std::to_string(need));
  NodePtr h = ad::leaky_relu(convs[0].forward(x, update_sn), 0.2);
  if (cfg.use_attention) {
    if (!m_r || !m_e) throw ConfigError("critic: attention enabled but priors missing");
    h = auam.forward(aam.forward(m_r, m_e), h);
  }
  for (size_t i = 1; i < convs.size(); ++i)
    h = ad::leaky_relu(convs[i].forward(h, update_sn), 0.2);
  return ad::mean_all(head.forward(h, update_sn));
}

void Critic::warm_up_spectral(int iterations) const {
  for (int it = 0; it < iterations; ++it) {
    for (const auto& conv : convs)
      if (conv.spectral) spectral_power_iterate(conv.w->value, conv.sn);
    if (head.spectral) spectral_power_iterate(head.w->value, head.sn);
  }
}

std::vector<ckpt::Record> store_records(const ParamStore& ps, ckpt::Dtype dtype) {
  std::vector<ckpt::Record> out;
  out.reserve(ps.items().size());
  for (const auto& [name, node] : ps.items())
    out.push_back(ckpt::Record::from_tensor(name, node->value, dtype));
  return out;
}

void load_store(ParamStore& ps, const ckpt::Checkpoint& c) {
  for (const auto& [name, node] : ps.items()) {
    const ckpt::Record* r = c.find(name);
    if (!r) throw ConfigError("checkpoint: missing parameter " + name);
    Tensor t = r->to_tensor();
    if (!t.same_shape(node->value))
      throw ConfigError("checkpoint: shape mismatch for " + name);
    node->value = std::move(t);
  }
}

}  // namespace ufg::nn
