#include "ufg/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ufg/errors.hpp"
#include "ufg/image.hpp"
#include "ufg/metrics.hpp"
#include "ufg/priors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ufg {

// ------------------------------------------------------------------ variants

VariantSpec parse_variant(const std::string& tag) {
  if (tag == "U") return {false, false, nn::AttnAct::relu, AdvMode::none};
  if (tag == "U+D") return {true, false, nn::AttnAct::relu, AdvMode::none};
  if (tag == "U+D+G") return {true, false, nn::AttnAct::relu, AdvMode::standard};
  if (tag == "U+D+ReLU+G")
    return {true, true, nn::AttnAct::relu, AdvMode::standard};
  if (tag == "U+D+ReLU+UG")
    return {true, true, nn::AttnAct::relu, AdvMode::unfair};
  if (tag == "UnfairGAN") return {true, true, nn::AttnAct::daf, AdvMode::unfair};
  throw ConfigError("unknown ablation variant tag: " + tag);
}

const std::vector<std::string>& ablation_ladder() {
  static const std::vector<std::string> ladder = {
      "U", "U+D", "U+D+G", "U+D+ReLU+G", "U+D+ReLU+UG", "UnfairGAN"};
  return ladder;
}

// -------------------------------------------------------------------- config

void TrainConfig::validate() const {
  const VariantSpec var = parse_variant(variant);
  if (patch_size < 1 || batch_size < 1)
    throw ConfigError("TrainConfig: bad patch/batch size");
  if (patch_size % (1 << depth) != 0)
    throw ConfigError("TrainConfig: patch_size must be divisible by 2^depth");
  if (weights.w2 > 0.0 && patch_size < kMsSsimMinSide)
    throw ConfigError("TrainConfig: MS-SSIM loss needs patch_size >= 32");
  if (var.adv != AdvMode::none &&
      patch_size < (1 << static_cast<int>(critic_widths.size())))
    throw ConfigError("TrainConfig: patch too small for the critic stack");
  LookaheadConfig{lookahead_k, lookahead_alpha}.validate();
  weights.validate();
  generator_config().validate();
  critic_config().validate();
}

nn::GeneratorConfig TrainConfig::generator_config() const {
  const VariantSpec var = parse_variant(variant);
  nn::GeneratorConfig g;
  g.base_channels = base_channels;
  g.depth = depth;
  g.bottom_dilations = bottom_dilations;
  g.growth = growth;
  g.drdb_layers = drdb_layers;
  g.use_attention = var.use_attention;
  g.use_dilation = var.dilated;
  g.attention.branch_width = attention_width;
  g.attention.act = var.attn_act;
  g.attention.daf_growth = attn_daf_growth;
  g.attention.daf_layers = attn_daf_layers;
  return g;
}

nn::CriticConfig TrainConfig::critic_config() const {
  const VariantSpec var = parse_variant(variant);
  nn::CriticConfig c;
  c.widths = critic_widths;
  c.spectral = true;
  c.use_attention = var.use_attention;
  c.attention.branch_width = attention_width;
  c.attention.act = var.attn_act;
  c.attention.daf_growth = attn_daf_growth;
  c.attention.daf_layers = attn_daf_layers;
  return c;
}

std::string TrainConfig::to_json() const {
  json j;
  j["patch_size"] = patch_size;
  j["batch_size"] = batch_size;
  j["est_steps"] = est_steps;
  j["gan_steps"] = gan_steps;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["adam_eps"] = adam_eps;
  j["lookahead_k"] = lookahead_k;
  j["lookahead_alpha"] = lookahead_alpha;
  j["seed"] = seed;
  j["weights"] = {{"w1", weights.w1}, {"w2", weights.w2}, {"w3", weights.w3},
                  {"w4", weights.w4}};
  j["variant"] = variant;
  j["train_critic"] = train_critic;
  j["supervised_only"] = supervised_only;
  j["log_every"] = log_every;
  j["percep_seed"] = percep_seed;
  j["base_channels"] = base_channels;
  j["depth"] = depth;
  j["growth"] = growth;
  j["drdb_layers"] = drdb_layers;
  j["bottom_dilations"] = bottom_dilations;
  j["attention_width"] = attention_width;
  j["attn_daf_growth"] = attn_daf_growth;
  j["attn_daf_layers"] = attn_daf_layers;
  j["critic_widths"] = critic_widths;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("patch_size", c.patch_size);
  get("batch_size", c.batch_size);
  get("est_steps", c.est_steps);
  get("gan_steps", c.gan_steps);
  get("lr", c.lr);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("lookahead_k", c.lookahead_k);
  get("lookahead_alpha", c.lookahead_alpha);
  get("seed", c.seed);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (w.contains("w1")) c.weights.w1 = w.at("w1").get<double>();
    if (w.contains("w2")) c.weights.w2 = w.at("w2").get<double>();
    if (w.contains("w3")) c.weights.w3 = w.at("w3").get<double>();
    if (w.contains("w4")) c.weights.w4 = w.at("w4").get<double>();
  }
  get("variant", c.variant);
  get("train_critic", c.train_critic);
  get("supervised_only", c.supervised_only);
  get("log_every", c.log_every);
  get("percep_seed", c.percep_seed);
  get("base_channels", c.base_channels);
  get("depth", c.depth);
  get("growth", c.growth);
  get("drdb_layers", c.drdb_layers);
  get("bottom_dilations", c.bottom_dilations);
  get("attention_width", c.attention_width);
  get("attn_daf_growth", c.attn_daf_growth);
  get("attn_daf_layers", c.attn_daf_layers);
  get("critic_widths", c.critic_widths);
  return c;
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

std::string TrainConfig::model_json() const {
  const VariantSpec var = parse_variant(variant);
  json j;
  j["base_channels"] = base_channels;
  j["depth"] = depth;
  j["growth"] = growth;
  j["drdb_layers"] = drdb_layers;
  j["bottom_dilations"] = bottom_dilations;
  j["dilated"] = var.dilated;
  j["attention"] = var.use_attention;
  j["attn_act"] = var.attn_act == nn::AttnAct::daf ? "daf" : "relu";
  j["attention_width"] = attention_width;
  j["attn_daf_growth"] = attn_daf_growth;
  j["attn_daf_layers"] = attn_daf_layers;
  j["critic_widths"] = critic_widths;
  return j.dump();
}

std::string TrainConfig::est_model_json() const {
  const VariantSpec var = parse_variant(variant);
  json j;
  j["base_channels"] = base_channels;
  j["depth"] = depth;
  j["growth"] = growth;
  j["drdb_layers"] = drdb_layers;
  j["bottom_dilations"] = bottom_dilations;
  j["dilated"] = var.dilated;
  return j.dump();
}

uint64_t TrainConfig::model_digest() const { return fnv1a64(model_json()); }
uint64_t TrainConfig::est_model_digest() const {
  return fnv1a64(est_model_json());
}

// ------------------------------------------------------------------- helpers

Tensor crop(const Tensor& t, int y0, int x0, int h, int w) {
  if (t.ndim() != 3) throw DimensionError("crop: expected {C,H,W}");
  if (y0 < 0 || x0 < 0 || y0 + h > t.dim(1) || x0 + w > t.dim(2))
    throw DimensionError("crop: window outside image");
  Tensor out({t.dim(0), h, w});
  for (int c = 0; c < t.dim(0); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
  return out;
}

Tensor pad_replicate(const Tensor& t, int to_h, int to_w) {
  if (t.ndim() != 3) throw DimensionError("pad_replicate: expected {C,H,W}");
  if (to_h < t.dim(1) || to_w < t.dim(2))
    throw DimensionError("pad_replicate: target smaller than input");
  if (to_h == t.dim(1) && to_w == t.dim(2)) return t;
  Tensor out({t.dim(0), to_h, to_w});
  for (int c = 0; c < t.dim(0); ++c)
    for (int y = 0; y < to_h; ++y)
      for (int x = 0; x < to_w; ++x)
        out.at(c, y, x) =
            t.at(c, std::min(y, t.dim(1) - 1), std::min(x, t.dim(2) - 1));
  return out;
}

namespace {

std::vector<TrainItem> load_train_items(const std::string& data_dir,
                                        const nn::Generator* frozen_est) {
  const auto pairs = load_dataset(data_dir);
  if (pairs.empty()) throw InputError("train: dataset is empty: " + data_dir);
  std::vector<TrainItem> items;
  items.reserve(pairs.size());
  for (const auto& p : pairs) {
    TrainItem it;
    it.rain = p.rain;
    it.clean = p.clean;
    if (frozen_est) {
      const Tensor est_out = frozen_est->infer(p.rain, {}, {});
      it.m_r = compute_rain_map(p.rain, est_out);
      it.m_e = edge_map(p.rain);
    }
    items.push_back(std::move(it));
  }
  return items;
}

struct PatchBatch {
  std::vector<Tensor> rain, clean, m_r, m_e;
};

PatchBatch sample_batch(const std::vector<TrainItem>& data, Rng& rng, int batch,
                        int patch, bool with_priors) {
  PatchBatch b;
  for (int i = 0; i < batch; ++i) {
    const int idx = rng.uniform_int(0, static_cast<int>(data.size()) - 1);
    const TrainItem& it = data[static_cast<size_t>(idx)];
    const int h = it.rain.dim(1), w = it.rain.dim(2);
    if (h < patch || w < patch)
      throw InputError("train: image smaller than patch size");
    const int y0 = rng.uniform_int(0, h - patch);
    const int x0 = rng.uniform_int(0, w - patch);
    b.rain.push_back(crop(it.rain, y0, x0, patch, patch));
    b.clean.push_back(crop(it.clean, y0, x0, patch, patch));
    if (with_priors) {
      b.m_r.push_back(crop(it.m_r, y0, x0, patch, patch));
      b.m_e.push_back(crop(it.m_e, y0, x0, patch, patch));
    }
  }
  return b;
}

[[noreturn]] void abort_with_dump(const std::string& stage, int step,
                                  const PatchBatch& batch,
                                  const std::vector<ad::NodePtr>* x_f) {
  const std::string dir = "nan_dump_" + stage;
  std::error_code ec;
  fs::create_directories(dir, ec);
  for (size_t i = 0; i < batch.rain.size(); ++i) {
    save_png(dir + "/rain_" + std::to_string(i) + ".png",
             clamp01_image(batch.rain[i]));
    save_png(dir + "/clean_" + std::to_string(i) + ".png",
             clamp01_image(batch.clean[i]));
    if (x_f && i < x_f->size())
      save_png(dir + "/fake_" + std::to_string(i) + ".png",
               clamp01_image((*x_f)[i]->value));
  }
  throw std::runtime_error("training aborted: non-finite " + stage +
                           " loss at step " + std::to_string(step) +
                           "; last batch dumped to " + dir + "/");
}

std::vector<uint64_t> rng_words(const Rng& rng) {
  const auto s = rng.save_state();
  return std::vector<uint64_t>(s.begin(), s.end());
}

}  // namespace

// ------------------------------------------------------------- EstNet stage

void train_estnet(const std::string& data_dir, const TrainConfig& cfg,
                  const std::string& out_ckpt, std::ostream* log) {
  cfg.validate();
  auto items = load_train_items(data_dir, nullptr);

  const Rng master(cfg.seed);
  Rng init_rng = master.fork(12);
  Rng data_rng = master.fork(1);

  nn::ParamStore store(true);
  const nn::GeneratorConfig est_cfg = nn::estnet_config(cfg.generator_config());
  nn::Generator est = nn::Generator::make(store, "est", est_cfg, init_rng);
  Optimizer opt(store.nodes(), {cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps},
                {cfg.lookahead_k, cfg.lookahead_alpha});

  for (int step = 1; step <= cfg.est_steps; ++step) {
    auto batch = sample_batch(items, data_rng, cfg.batch_size, cfg.patch_size,
                              false);
    ad::NodePtr loss;
    for (int i = 0; i < cfg.batch_size; ++i) {
      auto rain = ad::constant(batch.rain[static_cast<size_t>(i)]);
      auto clean = ad::constant(batch.clean[static_cast<size_t>(i)]);
      auto out = est.forward(rain, nullptr, nullptr);
      auto li = estnet_loss(out, clean);
      loss = i == 0 ? li : ad::add(loss, li);
    }
    loss = ad::mul_scalar(loss, 1.0 / cfg.batch_size);
    if (!std::isfinite(loss->value[0]))
      abort_with_dump("estnet", step, batch, nullptr);
    opt.zero_grad();
    ad::backward(loss);
    opt.step();
    if (log && (step % cfg.log_every == 0 || step == cfg.est_steps))
      *log << "[est] step " << step << " l1 " << loss->value[0] << "\n";
  }

  ckpt::save(out_ckpt, cfg.est_model_digest(), cfg.to_json(),
             nn::store_records(store));
}

// ---------------------------------------------------------------- GAN stage

namespace {

class GanTrainer {
 public:
  GanTrainer(std::vector<TrainItem> items, const TrainConfig& cfg)
      : cfg_(cfg),
        var_(parse_variant(cfg.variant)),
        items_(std::move(items)),
        master_(cfg.seed),
        data_rng_(master_.fork(1)),
        gan_rng_(master_.fork(2)),
        gen_store_(true),
        critic_store_(true),
        est_store_(false),
        percep_(cfg.percep_seed) {
    if (cfg_.supervised_only) var_.adv = AdvMode::none;
    Rng init_g = master_.fork(10);
    Rng init_d = master_.fork(11);
    Rng init_est = master_.fork(12);
    gen_ = nn::Generator::make(gen_store_, "gen", cfg_.generator_config(), init_g);
    if (var_.adv != AdvMode::none)
      critic_ = nn::Critic::make(critic_store_, "critic", cfg_.critic_config(),
                                 init_d);
    if (var_.use_attention)
      est_ = nn::Generator::make(est_store_, "est",
                                 nn::estnet_config(cfg_.generator_config()),
                                 init_est);
    opt_g_ = std::make_unique<Optimizer>(
        gen_store_.nodes(), AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps},
        LookaheadConfig{cfg_.lookahead_k, cfg_.lookahead_alpha});
    if (critic_)
      opt_d_ = std::make_unique<Optimizer>(
          critic_store_.nodes(),
          AdamConfig{cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.adam_eps},
          LookaheadConfig{cfg_.lookahead_k, cfg_.lookahead_alpha});
  }

  bool needs_estnet() const { return var_.use_attention; }

  void load_estnet(const ckpt::Checkpoint& c) {
    ckpt::require_digest(c, cfg_.est_model_digest());
    nn::load_store(est_store_, c);
  }

  void precompute_priors() {
    if (!var_.use_attention) return;
    for (auto& it : items_) {
      const Tensor est_out = est_->infer(it.rain, {}, {});
      it.m_r = compute_rain_map(it.rain, est_out);
      it.m_e = edge_map(it.rain);
    }
  }

  void run(std::ostream* log) {
    for (int step = 1; step <= cfg_.gan_steps; ++step) train_step(step, log);
  }

  void train_step(int step, std::ostream* log) {
    auto batch = sample_batch(items_, data_rng_, cfg_.batch_size,
                              cfg_.patch_size, var_.use_attention);
    const int bs = cfg_.batch_size;
    std::vector<ad::NodePtr> rain_c(bs), clean_c(bs), m_r_c(bs), m_e_c(bs);
    for (int i = 0; i < bs; ++i) {
      rain_c[i] = ad::constant(batch.rain[static_cast<size_t>(i)]);
      clean_c[i] = ad::constant(batch.clean[static_cast<size_t>(i)]);
      if (var_.use_attention) {
        m_r_c[i] = ad::constant(batch.m_r[static_cast<size_t>(i)]);
        m_e_c[i] = ad::constant(batch.m_e[static_cast<size_t>(i)]);
      }
    }

    // generator forward (shared by both phases' fakes)
    std::vector<ad::NodePtr> x_f(bs);
    for (int i = 0; i < bs; ++i)
      x_f[i] = gen_.forward(rain_c[i], m_r_c[i], m_e_c[i]);

    double d_loss_value = 0.0;
    if (critic_ && cfg_.train_critic) {
      critic_->warm_up_spectral(1);  // one power-iteration step per update
      std::vector<ad::NodePtr> dc_r(bs), dc_f(bs);
      for (int i = 0; i < bs; ++i)
        dc_r[i] = critic_->forward(clean_c[i], m_r_c[i], m_e_c[i], false);
      for (int i = 0; i < bs; ++i) {
        Tensor fake = x_f[i]->value;  // detached: no gradient into G
        if (var_.adv == AdvMode::unfair)
          fake = unfair_fake(fake, batch.clean[static_cast<size_t>(i)], gan_rng_)
                     .x_f_star;
        dc_f[i] = critic_->forward(ad::constant(std::move(fake)), m_r_c[i],
                                   m_e_c[i], false);
      }
      ad::NodePtr dl = var_.adv == AdvMode::unfair ? d_loss(dc_r, dc_f)
                                                   : lsgan_d_loss(dc_r, dc_f);
      d_loss_value = dl->value[0];
      if (!std::isfinite(d_loss_value)) abort_with_dump("critic", step, batch, &x_f);
      opt_d_->zero_grad();
      gen_store_.zero_grads();  // critic graphs touch no gen params; cheap guard
      ad::backward(dl);
      opt_d_->step();
    }

    // generator update
    std::vector<ad::NodePtr> gc_f, gc_r;
    if (critic_) {
      gc_f.reserve(static_cast<size_t>(bs));
      gc_r.reserve(static_cast<size_t>(bs));
      for (int i = 0; i < bs; ++i)
        gc_f.push_back(critic_->forward(x_f[i], m_r_c[i], m_e_c[i], false));
      for (int i = 0; i < bs; ++i)
        gc_r.push_back(critic_->forward(clean_c[i], m_r_c[i], m_e_c[i], false));
    }
    GenLossParts parts;
    if (var_.adv == AdvMode::standard) {
      parts = generator_loss(x_f, clean_c, {}, {}, cfg_.weights, percep_);
      auto adv = lsgan_g_loss(gc_f);
      parts.adv = adv->value[0];
      parts.total = ad::add(parts.total, ad::mul_scalar(adv, cfg_.weights.w3));
      parts.total_value = parts.total->value[0];
    } else {
      parts = generator_loss(x_f, clean_c, gc_f, gc_r, cfg_.weights, percep_);
    }
    if (!std::isfinite(parts.total_value))
      abort_with_dump("generator", step, batch, &x_f);
    opt_g_->zero_grad();
    if (critic_) critic_store_.zero_grads();
    ad::backward(parts.total);
    opt_g_->step();

    if (log && (step % cfg_.log_every == 0 || step == cfg_.gan_steps))
      *log << "[gan] step " << step << " d " << d_loss_value << " g "
           << parts.total_value << " (l1 " << parts.l1 << " msssim "
           << parts.ms_ssim << " adv " << parts.adv << " per "
           << parts.perceptual << ")\n";
  }

  void save_bundle(const std::string& path) const {
    auto records = nn::store_records(gen_store_);
    if (critic_)
      for (auto& r : nn::store_records(critic_store_)) records.push_back(std::move(r));
    if (est_)
      for (auto& r : nn::store_records(est_store_)) records.push_back(std::move(r));
    for (auto& r : nn::store_records(percep_.store)) records.push_back(std::move(r));
    ckpt::save(path, cfg_.model_digest(), cfg_.to_json(), records);
  }

  void save_state(const std::string& path) const {
    auto records = nn::store_records(gen_store_);
    if (critic_)
      for (auto& r : nn::store_records(critic_store_)) records.push_back(std::move(r));
    if (est_)
      for (auto& r : nn::store_records(est_store_)) records.push_back(std::move(r));
    for (auto& r : nn::store_records(percep_.store)) records.push_back(std::move(r));

    auto add_opt = [&records](const char* tag, const Optimizer& opt,
                              const nn::ParamStore& store) {
      const auto& items = store.items();
      auto& m = const_cast<Optimizer&>(opt).moments_m();
      auto& v = const_cast<Optimizer&>(opt).moments_v();
      auto& slow = const_cast<Optimizer&>(opt).slow_weights();
      for (size_t i = 0; i < items.size(); ++i) {
        records.push_back(ckpt::Record::from_tensor(
            "state." + std::string(tag) + ".m." + items[i].first, m[i], ckpt::f64));
        records.push_back(ckpt::Record::from_tensor(
            "state." + std::string(tag) + ".v." + items[i].first, v[i], ckpt::f64));
        records.push_back(ckpt::Record::from_tensor(
            "state." + std::string(tag) + ".slow." + items[i].first, slow[i],
            ckpt::f64));
      }
      records.push_back(ckpt::Record::from_u64(
          "state." + std::string(tag) + ".step",
          {static_cast<uint64_t>(opt.step_count())}));
    };
    add_opt("adam_g", *opt_g_, gen_store_);
    if (critic_) {
      add_opt("adam_d", *opt_d_, critic_store_);
      auto add_sn = [&records](const std::string& name, const nn::Conv2dLayer& l) {
        if (!l.spectral) return;
        records.push_back(ckpt::Record::from_tensor("state.sn.u." + name, l.sn.u,
                                                    ckpt::f64));
        records.push_back(ckpt::Record::from_tensor("state.sn.v." + name, l.sn.v,
                                                    ckpt::f64));
      };
      for (size_t i = 0; i < critic_->convs.size(); ++i)
        add_sn("critic.conv" + std::to_string(i), critic_->convs[i]);
      add_sn("critic.score", critic_->head);
    }
    records.push_back(ckpt::Record::from_u64("state.rng.data", rng_words(data_rng_)));
    records.push_back(ckpt::Record::from_u64("state.rng.gan", rng_words(gan_rng_)));
    ckpt::save(path, cfg_.model_digest(), cfg_.to_json(), records);
  }

  const nn::ParamStore& est_store() const { return est_store_; }

 private:
  TrainConfig cfg_;
  VariantSpec var_;
  std::vector<TrainItem> items_;
  Rng master_, data_rng_, gan_rng_;
  nn::ParamStore gen_store_, critic_store_, est_store_;
  ConvStackExtractor percep_;
  nn::Generator gen_;
  std::optional<nn::Critic> critic_;
  std::optional<nn::Generator> est_;
  std::unique_ptr<Optimizer> opt_g_, opt_d_;
};

}  // namespace

void train_gan(const std::string& data_dir, const std::string& estnet_ckpt,
               const TrainConfig& cfg, const std::string& out_ckpt,
               std::ostream* log) {
  cfg.validate();
  auto items = load_train_items(data_dir, nullptr);
  GanTrainer trainer(std::move(items), cfg);
  if (trainer.needs_estnet()) {
    if (estnet_ckpt.empty())
      throw ConfigError("train_gan: attention variant needs an EstNet checkpoint");
    trainer.load_estnet(ckpt::load(estnet_ckpt));
  }
  trainer.precompute_priors();
  trainer.run(log);
  trainer.save_bundle(out_ckpt);
  trainer.save_state(out_ckpt + ".state");
}

// ----------------------------------------------------------------- inference

ModelBundle ModelBundle::load(const std::string& path) {
  const ckpt::Checkpoint c = ckpt::load(path);
  ModelBundle b;
  b.cfg = TrainConfig::from_json(c.config_json);
  b.variant = parse_variant(b.cfg.variant);
  const bool is_bundle = c.model_digest == b.cfg.model_digest();
  const bool is_est = c.model_digest == b.cfg.est_model_digest();
  if (!is_bundle && !is_est)
    throw ConfigError("checkpoint: digest matches neither the bundle nor the "
                      "EstNet architecture of its embedded config");

  b.est_store = std::make_shared<nn::ParamStore>(false);
  if (is_bundle) {
    b.gen_store = std::make_shared<nn::ParamStore>(false);
    Rng init(0);
    b.gen = nn::Generator::make(*b.gen_store, "gen", b.cfg.generator_config(),
                                init);
    nn::load_store(*b.gen_store, c);
    if (b.variant.use_attention) {
      Rng init_e(0);
      b.est = nn::Generator::make(*b.est_store, "est",
                                  nn::estnet_config(b.cfg.generator_config()),
                                  init_e);
      nn::load_store(*b.est_store, c);
    }
  } else {
    Rng init_e(0);
    b.est = nn::Generator::make(*b.est_store, "est",
                                nn::estnet_config(b.cfg.generator_config()),
                                init_e);
    nn::load_store(*b.est_store, c);
  }
  return b;
}

Tensor ModelBundle::derain(const Tensor& rain) const {
  require_image(rain, "derain");
  const int div = 1 << cfg.depth;
  const int ph = (rain.dim(1) + div - 1) / div * div;
  const int pw = (rain.dim(2) + div - 1) / div * div;
  const Tensor padded = pad_replicate(rain, ph, pw);
  Tensor out;
  if (gen) {
    Tensor m_r, m_e;
    if (variant.use_attention) {
      const Tensor est_out = est->infer(padded, {}, {});
      m_r = compute_rain_map(padded, est_out);
      m_e = edge_map(padded);
    }
    out = gen->infer(padded, m_r, m_e);
  } else {
    out = est->infer(padded, {}, {});
  }
  return crop(out, 0, 0, rain.dim(1), rain.dim(2));
}

// ---------------------------------------------------------------- evaluation

EvalReport evaluate(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& report_path) {
  const ModelBundle bundle = ModelBundle::load(ckpt_path);
  const auto pairs = load_dataset(data_dir);
  if (pairs.empty()) throw InputError("evaluate: empty dataset " + data_dir);

  EvalReport rep;
  // preserve preset order of first appearance
  std::vector<std::string> presets;
  for (const auto& p : pairs)
    if (std::find(presets.begin(), presets.end(), p.row.preset) == presets.end())
      presets.push_back(p.row.preset);

  char line[160];
  std::string csv = "preset,index,psnr,ssim\n";
  for (const auto& preset : presets) {
    double sum_p = 0.0, sum_s = 0.0;
    int count = 0;
    for (const auto& p : pairs) {
      if (p.row.preset != preset) continue;
      const Tensor out = bundle.derain(p.rain);
      const double pv = psnr(out, p.clean);
      const double sv = ssim(out, p.clean);
      rep.rows.push_back({preset, p.row.index, pv, sv});
      std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f\n", preset.c_str(),
                    p.row.index, pv, sv);
      csv += line;
      sum_p += pv;
      sum_s += sv;
      ++count;
    }
    const double mp = sum_p / count, ms = sum_s / count;
    rep.rows.push_back({preset, -1, mp, ms});
    std::snprintf(line, sizeof(line), "%s,mean,%.6f,%.6f\n", preset.c_str(), mp,
                  ms);
    csv += line;
  }
  rep.csv = csv;
  if (!report_path.empty()) {
    std::ofstream os(report_path, std::ios::binary);
    if (!os) throw IoError("evaluate: cannot write report " + report_path);
    os << csv;
  }
  return rep;
}

// ------------------------------------------------------------------ ablation

std::string run_ablation(const std::string& data_root,
                         const std::vector<std::string>& variants,
                         const TrainConfig& cfg, const std::string& report_path,
                         std::ostream* log) {
  for (const auto& tag : variants) parse_variant(tag);  // fail fast
  const std::string train_dir = (fs::path(data_root) / "train").string();
  const std::vector<std::pair<std::string, std::string>> test_dirs = {
      {"heavy", (fs::path(data_root) / "test-heavy").string()},
      {"moderate", (fs::path(data_root) / "test-moderate").string()},
      {"light", (fs::path(data_root) / "test-light").string()}};
  for (const auto& [_, dir] : test_dirs)
    if (!fs::is_directory(dir))
      throw InputError("run_ablation: missing test directory " + dir);

  const std::string work = report_path + ".work";
  std::error_code ec;
  fs::create_directories(work, ec);

  // One shared EstNet serves every attention variant (they all use the
  // dilated backbone).
  std::string est_ckpt;
  const bool any_attention =
      std::any_of(variants.begin(), variants.end(), [](const std::string& t) {
        return parse_variant(t).use_attention;
      });
  if (any_attention) {
    TrainConfig est_cfg = cfg;
    est_cfg.variant = "U+D+ReLU+UG";
    est_ckpt = work + "/estnet.ckpt";
    if (log) *log << "[ablate] training shared EstNet\n";
    train_estnet(train_dir, est_cfg, est_ckpt, log);
  }

  char line[256];
  std::string csv =
      "method,heavy_psnr,heavy_ssim,moderate_psnr,moderate_ssim,light_psnr,"
      "light_ssim\n";
  for (const auto& tag : variants) {
    TrainConfig sub = cfg;
    sub.variant = tag;
    std::string safe = tag;
    for (auto& ch : safe)
      if (ch == '+') ch = '_';
    const std::string ckpt_path = work + "/" + safe + ".ckpt";
    if (log) *log << "[ablate] training variant " << tag << "\n";
    train_gan(train_dir, est_ckpt, sub, ckpt_path, log);

    double vals[6] = {};
    for (size_t t = 0; t < test_dirs.size(); ++t) {
      const EvalReport rep = evaluate(ckpt_path, test_dirs[t].second, "");
      double mp = 0.0, ms = 0.0;
      for (const auto& r : rep.rows)
        if (r.index == -1) {
          mp = r.psnr;
          ms = r.ssim;
        }
      vals[2 * t] = mp;
      vals[2 * t + 1] = ms;
    }
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  tag.c_str(), vals[0], vals[1], vals[2], vals[3], vals[4],
                  vals[5]);
    csv += line;
  }
  if (!report_path.empty()) {
    std::ofstream os(report_path, std::ios::binary);
    if (!os) throw IoError("run_ablation: cannot write report " + report_path);
    os << csv;
  }
  return csv;
}

}  // namespace ufg
