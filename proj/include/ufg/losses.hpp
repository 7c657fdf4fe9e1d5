#pragma once

#include <memory>
#include <span>
#include <vector>

#include "ufg/autodiff.hpp"
#include "ufg/blocks.hpp"
#include "ufg/rng.hpp"
#include "ufg/tensor.hpp"

namespace ufg {

struct LossWeights {
  double w1 = 0.16;   // L1
  double w2 = 0.84;   // MS-SSIM
  double w3 = 0.001;  // adversarial
  double w4 = 0.01;   // perceptual
  void validate() const;
};

struct UnfairSample {
  Tensor x_f_star;
  double mu = 0.0;
  Tensor eta;
};

// x_f* = x_f + mu * eta . (x_r - x_f); mu ~ U(0,1) per image, eta ~ U(0,1)
// per pixel per channel. The result is a plain tensor: it enters the critic
// as a constant, so no gradient reaches the generator through it.
UnfairSample unfair_fake(const Tensor& x_f, const Tensor& x_r, Rng& rng);
UnfairSample unfair_fake_with(const Tensor& x_f, const Tensor& x_r, double mu,
                              const Tensor& eta);

// Relativistic average least-squares pair. The discriminator form treats its
// first argument as the real batch; the generator form treats its first
// argument as the fake batch (the formulas are mirrors with roles exchanged).
double d_loss(std::span<const double> c_r, std::span<const double> c_f_star);
double g_adv_loss(std::span<const double> c_f, std::span<const double> c_r);
ad::NodePtr d_loss(const std::vector<ad::NodePtr>& c_r,
                   const std::vector<ad::NodePtr>& c_f_star);
ad::NodePtr g_adv_loss(const std::vector<ad::NodePtr>& c_f,
                       const std::vector<ad::NodePtr>& c_r);

// Plain least-squares GAN pair used by the ablation ladder's "standard
// adversarial" variants.
ad::NodePtr lsgan_d_loss(const std::vector<ad::NodePtr>& c_r,
                         const std::vector<ad::NodePtr>& c_f);
ad::NodePtr lsgan_g_loss(const std::vector<ad::NodePtr>& c_f);

// Mean absolute difference, normalized by element count.
ad::NodePtr l1_loss(const ad::NodePtr& a, const ad::NodePtr& b);
double l1_loss_value(const Tensor& a, const Tensor& b);

// Differentiable MS-SSIM (same arithmetic as the metric) and its loss.
ad::NodePtr ms_ssim_graph(const ad::NodePtr& a, const ad::NodePtr& b);
ad::NodePtr ms_ssim_loss(const ad::NodePtr& a, const ad::NodePtr& b);

struct FeatureExtractor {
  virtual ~FeatureExtractor() = default;
  virtual ad::NodePtr features(const ad::NodePtr& x) const = 0;
};

struct IdentityExtractor final : FeatureExtractor {
  ad::NodePtr features(const ad::NodePtr& x) const override { return x; }
};

// Fixed seeded 3-layer conv stack (stride 2, widths 16/32/64, LeakyReLU).
// Parameters are frozen; they live in a non-trainable store so they can be
// saved to and restored from checkpoints.
struct ConvStackExtractor final : FeatureExtractor {
  nn::ParamStore store{false};
  std::vector<nn::Conv2dLayer> convs;

  explicit ConvStackExtractor(uint64_t seed, int in_channels = 3);
  ad::NodePtr features(const ad::NodePtr& x) const override;
};

// Mean squared feature difference (normalized by feature-element count).
ad::NodePtr perceptual_loss(const ad::NodePtr& a, const ad::NodePtr& b,
                            const FeatureExtractor& extractor);

struct GenLossParts {
  ad::NodePtr total;
  double l1 = 0.0, ms_ssim = 0.0, adv = 0.0, perceptual = 0.0;
  double total_value = 0.0;
};

// w1*L1 + w2*(1-MS-SSIM) + w3*g_adv + w4*perceptual, each component averaged
// over the batch; component values are returned for logging. Passing empty
// score batches drops the adversarial term (supervised training).
GenLossParts generator_loss(const std::vector<ad::NodePtr>& x_f,
                            const std::vector<ad::NodePtr>& x_r,
                            const std::vector<ad::NodePtr>& c_f,
                            const std::vector<ad::NodePtr>& c_r,
                            const LossWeights& weights,
                            const FeatureExtractor& extractor);

// Same contract as l1_loss, applied to (ground truth, EstNet output).
ad::NodePtr estnet_loss(const ad::NodePtr& x_dr_est, const ad::NodePtr& x_r);

}  // namespace ufg
