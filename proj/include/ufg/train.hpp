#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ufg/checkpoint.hpp"
#include "ufg/losses.hpp"
#include "ufg/networks.hpp"
#include "ufg/optim.hpp"
#include "ufg/synth.hpp"

namespace ufg {

enum class AdvMode { none, standard, unfair };

struct VariantSpec {
  bool dilated = true;
  bool use_attention = true;
  nn::AttnAct attn_act = nn::AttnAct::daf;
  AdvMode adv = AdvMode::unfair;
};

// Ablation ladder tags: U, U+D, U+D+G, U+D+ReLU+G, U+D+ReLU+UG, UnfairGAN.
VariantSpec parse_variant(const std::string& tag);
const std::vector<std::string>& ablation_ladder();

struct TrainConfig {
  int patch_size = 64;
  int batch_size = 8;
  int est_steps = 300;
  int gan_steps = 200;
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int lookahead_k = 5;
  double lookahead_alpha = 0.5;
  uint64_t seed = 1;
  LossWeights weights;
  std::string variant = "UnfairGAN";
  bool train_critic = true;   // false disables discriminator updates
  bool supervised_only = false;  // true drops the adversarial machinery entirely
  int log_every = 25;
  uint64_t percep_seed = 77;

  int base_channels = 32;
  int depth = 3;
  int growth = 16;
  int drdb_layers = 3;
  std::vector<int> bottom_dilations = {1, 2, 4, 8};
  int attention_width = 16;
  int attn_daf_growth = 8;
  int attn_daf_layers = 2;
  std::vector<int> critic_widths = {64, 128, 256, 512};

  void validate() const;
  nn::GeneratorConfig generator_config() const;
  nn::CriticConfig critic_config() const;

  std::string to_json() const;
  static TrainConfig from_json(const std::string& json_text);
  static TrainConfig from_json_file(const std::string& path);

  // Architecture-identifying subsets; their digests gate checkpoint loads.
  std::string model_json() const;
  std::string est_model_json() const;
  uint64_t model_digest() const;
  uint64_t est_model_digest() const;
};

// In-memory dataset with per-image priors precomputed against a frozen
// EstNet (full-image priors, cropped alongside the patches).
struct TrainItem {
  Tensor rain, clean;
  Tensor m_r, m_e;  // empty unless priors were computed
};

void train_estnet(const std::string& data_dir, const TrainConfig& cfg,
                  const std::string& out_ckpt, std::ostream* log);

// Staged adversarial training; EstNet stays frozen. Writes the inference
// bundle to out_ckpt and the full optimization state to out_ckpt + ".state".
void train_gan(const std::string& data_dir, const std::string& estnet_ckpt,
               const TrainConfig& cfg, const std::string& out_ckpt,
               std::ostream* log);

// Inference-side view of a bundle (generator + EstNet; critic ignored).
struct ModelBundle {
  TrainConfig cfg;
  VariantSpec variant;
  std::shared_ptr<nn::ParamStore> gen_store, est_store;
  std::optional<nn::Generator> gen;
  std::optional<nn::Generator> est;

  static ModelBundle load(const std::string& path);
  // Pads to a multiple of 2^depth, computes priors, runs the generator (or
  // EstNet when the bundle has no generator), crops back.
  Tensor derain(const Tensor& rain) const;
};

struct EvalRow {
  std::string preset;
  int index = 0;  // -1 marks the per-preset mean row
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string csv;
};

EvalReport evaluate(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& report_path);

// Trains and evaluates the requested ladder variants. data_root must hold
// train/, test-heavy/, test-moderate/, test-light/ dataset directories.
std::string run_ablation(const std::string& data_root,
                         const std::vector<std::string>& variants,
                         const TrainConfig& cfg, const std::string& report_path,
                         std::ostream* log);

// helpers shared with tests
Tensor crop(const Tensor& t, int y0, int x0, int h, int w);
Tensor pad_replicate(const Tensor& t, int to_h, int to_w);

}  // namespace ufg
