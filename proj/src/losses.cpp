#include "ufg/losses.hpp"

#include <cmath>

#include "ufg/errors.hpp"
#include "ufg/image.hpp"
#include "ufg/metrics.hpp"

namespace ufg {

using ad::NodePtr;

void LossWeights::validate() const {
  for (double w : {w1, w2, w3, w4})
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ConfigError("LossWeights: weights must be finite and >= 0");
}

UnfairSample unfair_fake_with(const Tensor& x_f, const Tensor& x_r, double mu,
                              const Tensor& eta) {
  require_same_shape(x_f, x_r, "unfair_fake");
  require_same_shape(x_f, eta, "unfair_fake(eta)");
  UnfairSample s;
  s.mu = mu;
  s.eta = eta;
  s.x_f_star = Tensor(x_f.shape());
  for (int64_t i = 0; i < x_f.size(); ++i)
    s.x_f_star[i] = x_f[i] + mu * eta[i] * (x_r[i] - x_f[i]);
  return s;
}

UnfairSample unfair_fake(const Tensor& x_f, const Tensor& x_r, Rng& rng) {
  require_same_shape(x_f, x_r, "unfair_fake");
  const double mu = rng.uniform();
  Tensor eta(x_f.shape());
  for (int64_t i = 0; i < eta.size(); ++i) eta[i] = rng.uniform();
  return unfair_fake_with(x_f, x_r, mu, eta);
}

// -------------------------------------------------- relativistic LS losses

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double d_loss(std::span<const double> c_r, std::span<const double> c_f_star) {
  if (c_r.empty() || c_f_star.empty())
    throw InputError("d_loss: empty score batch");
  const double mr = mean_of(c_r), mf = mean_of(c_f_star);
  double t1 = 0.0, t2 = 0.0;
  for (double c : c_r) t1 += (c - mf - 1.0) * (c - mf - 1.0);
  for (double c : c_f_star) t2 += (c - mr + 1.0) * (c - mr + 1.0);
  return t1 / static_cast<double>(c_r.size()) +
         t2 / static_cast<double>(c_f_star.size());
}

double g_adv_loss(std::span<const double> c_f, std::span<const double> c_r) {
  if (c_f.empty() || c_r.empty())
    throw InputError("g_adv_loss: empty score batch");
  const double mf = mean_of(c_f), mr = mean_of(c_r);
  double t1 = 0.0, t2 = 0.0;
  for (double c : c_f) t1 += (c - mr - 1.0) * (c - mr - 1.0);
  for (double c : c_r) t2 += (c - mf + 1.0) * (c - mf + 1.0);
  return t1 / static_cast<double>(c_f.size()) +
         t2 / static_cast<double>(c_r.size());
}

namespace {

// mean((a_i - mean(b) + shift)^2) + mean((b_i - mean(a) - shift)^2) with
// shift = -1 applied to the first term: shared by both graph losses.
NodePtr relativistic_ls(const std::vector<NodePtr>& first,
                        const std::vector<NodePtr>& second, const char* op) {
  if (first.empty() || second.empty())
    throw InputError(std::string(op) + ": empty score batch");
  auto sf = ad::stack_scalars(first);
  auto ss = ad::stack_scalars(second);
  auto mf = ad::mean_all(sf);
  auto ms = ad::mean_all(ss);
  auto t1 = ad::mean_all(ad::square(ad::add_scalar(ad::sub(sf, ms), -1.0)));
  auto t2 = ad::mean_all(ad::square(ad::add_scalar(ad::sub(ss, mf), 1.0)));
  return ad::add(t1, t2);
}

}  // namespace

NodePtr d_loss(const std::vector<NodePtr>& c_r,
               const std::vector<NodePtr>& c_f_star) {
  return relativistic_ls(c_r, c_f_star, "d_loss");
}

NodePtr g_adv_loss(const std::vector<NodePtr>& c_f,
                   const std::vector<NodePtr>& c_r) {
  return relativistic_ls(c_f, c_r, "g_adv_loss");
}

NodePtr lsgan_d_loss(const std::vector<NodePtr>& c_r,
                     const std::vector<NodePtr>& c_f) {
  if (c_r.empty() || c_f.empty()) throw InputError("lsgan_d_loss: empty batch");
  auto sr = ad::stack_scalars(c_r);
  auto sf = ad::stack_scalars(c_f);
  auto t1 = ad::mean_all(ad::square(ad::add_scalar(sr, -1.0)));
  auto t2 = ad::mean_all(ad::square(sf));
  return ad::add(t1, t2);
}

NodePtr lsgan_g_loss(const std::vector<NodePtr>& c_f) {
  if (c_f.empty()) throw InputError("lsgan_g_loss: empty batch");
  auto sf = ad::stack_scalars(c_f);
  return ad::mean_all(ad::square(ad::add_scalar(sf, -1.0)));
}

// ------------------------------------------------------------ pixel losses

NodePtr l1_loss(const NodePtr& a, const NodePtr& b) {
  require_same_shape(a->value, b->value, "l1_loss");
  return ad::mean_all(ad::abs_(ad::sub(a, b)));
}

double l1_loss_value(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_loss");
  double s = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

NodePtr estnet_loss(const NodePtr& x_dr_est, const NodePtr& x_r) {
  return l1_loss(x_r, x_dr_est);
}

// --------------------------------------------------------- MS-SSIM (graph)

namespace {

// valid separable Gaussian filtering as two conv nodes: rows then columns,
// matching metrics.cpp exactly
NodePtr filter_valid_graph(const NodePtr& plane, const NodePtr& row_k,
                           const NodePtr& col_k) {
  auto t = ad::conv2d(plane, row_k, nullptr, 1, 1, 0, 0);
  return ad::conv2d(t, col_k, nullptr, 1, 1, 0, 0);
}

}  // namespace

NodePtr ms_ssim_graph(const NodePtr& a, const NodePtr& b) {
  const Tensor& av = a->value;
  require_same_shape(av, b->value, "ms_ssim");
  require_image(av, "ms_ssim");
  if (av.dim(1) < kMsSsimMinSide || av.dim(2) < kMsSsimMinSide)
    throw TooSmallError("ms_ssim: sides must be >= 32 for 5 fixed scales");

  const double c1 = kSsimK1 * kSsimK1;
  const double c2 = kSsimK2 * kSsimK2;
  NodePtr la = ad::luminance(a);
  NodePtr lb = ad::luminance(b);
  NodePtr score;
  for (int s = 0; s < kMsSsimScales; ++s) {
    const int side = std::min(la->value.dim(1), la->value.dim(2));
    const int win = std::min(kSsimWindow, side);
    const auto kern = gaussian_window(win, kSsimSigma);
    Tensor row_t({1, 1, 1, win}), col_t({1, 1, win, 1});
    for (int i = 0; i < win; ++i) {
      row_t[i] = kern[static_cast<size_t>(i)];
      col_t[i] = kern[static_cast<size_t>(i)];
    }
    auto row_k = ad::constant(std::move(row_t));
    auto col_k = ad::constant(std::move(col_t));

    auto mu_a = filter_valid_graph(la, row_k, col_k);
    auto mu_b = filter_valid_graph(lb, row_k, col_k);
    auto e_aa = filter_valid_graph(ad::mul(la, la), row_k, col_k);
    auto e_bb = filter_valid_graph(ad::mul(lb, lb), row_k, col_k);
    auto e_ab = filter_valid_graph(ad::mul(la, lb), row_k, col_k);

    auto va = ad::sub(e_aa, ad::mul(mu_a, mu_a));
    auto vb = ad::sub(e_bb, ad::mul(mu_b, mu_b));
    auto cov = ad::sub(e_ab, ad::mul(mu_a, mu_b));
    auto cs_map = ad::div(ad::add_scalar(ad::mul_scalar(cov, 2.0), c2),
                          ad::add_scalar(ad::add(va, vb), c2));

    NodePtr term;
    if (s + 1 < kMsSsimScales) {
      term = ad::mean_all(cs_map);
    } else {
      auto lum = ad::div(
          ad::add_scalar(ad::mul_scalar(ad::mul(mu_a, mu_b), 2.0), c1),
          ad::add_scalar(ad::add(ad::mul(mu_a, mu_a), ad::mul(mu_b, mu_b)), c1));
      term = ad::mean_all(ad::mul(lum, cs_map));
    }
    term = ad::pow_const(ad::relu(term), kMsSsimWeights[static_cast<size_t>(s)]);
    score = s == 0 ? term : ad::mul(score, term);
    if (s + 1 < kMsSsimScales) {
      la = ad::avg_pool(la, 2);
      lb = ad::avg_pool(lb, 2);
    }
  }
  return score;
}

NodePtr ms_ssim_loss(const NodePtr& a, const NodePtr& b) {
  return ad::sub(ad::constant_scalar(1.0), ms_ssim_graph(a, b));
}

// ------------------------------------------------------------- perceptual

ConvStackExtractor::ConvStackExtractor(uint64_t seed, int in_channels) {
  Rng rng(seed);
  const int widths[3] = {16, 32, 64};
  int in_ch = in_channels;
  for (int i = 0; i < 3; ++i) {
    convs.push_back(nn::Conv2dLayer::make(store, "percep.conv" + std::to_string(i),
                                          in_ch, widths[i], 3, 3, 2, 1, 1, 1, rng));
    in_ch = widths[i];
  }
}

NodePtr ConvStackExtractor::features(const NodePtr& x) const {
  NodePtr h = x;
  for (const auto& conv : convs) h = ad::leaky_relu(conv.forward(h), 0.2);
  return h;
}

NodePtr perceptual_loss(const NodePtr& a, const NodePtr& b,
                        const FeatureExtractor& extractor) {
  auto fa = extractor.features(a);
  auto fb = extractor.features(b);
  require_same_shape(fa->value, fb->value, "perceptual_loss");
  return ad::mean_all(ad::square(ad::sub(fa, fb)));
}

// --------------------------------------------------------- generator loss

GenLossParts generator_loss(const std::vector<NodePtr>& x_f,
                            const std::vector<NodePtr>& x_r,
                            const std::vector<NodePtr>& c_f,
                            const std::vector<NodePtr>& c_r,
                            const LossWeights& weights,
                            const FeatureExtractor& extractor) {
  weights.validate();
  if (x_f.empty() || x_f.size() != x_r.size())
    throw InputError("generator_loss: bad image batch");
  const double inv_b = 1.0 / static_cast<double>(x_f.size());
  NodePtr l1_sum, ms_sum, per_sum;
  for (size_t i = 0; i < x_f.size(); ++i) {
    auto l1 = l1_loss(x_f[i], x_r[i]);
    auto ms = ms_ssim_loss(x_f[i], x_r[i]);
    auto per = perceptual_loss(x_f[i], x_r[i], extractor);
    l1_sum = i == 0 ? l1 : ad::add(l1_sum, l1);
    ms_sum = i == 0 ? ms : ad::add(ms_sum, ms);
    per_sum = i == 0 ? per : ad::add(per_sum, per);
  }
  auto l1_mean = ad::mul_scalar(l1_sum, inv_b);
  auto ms_mean = ad::mul_scalar(ms_sum, inv_b);
  auto per_mean = ad::mul_scalar(per_sum, inv_b);

  GenLossParts parts;
  parts.l1 = l1_mean->value[0];
  parts.ms_ssim = ms_mean->value[0];
  parts.perceptual = per_mean->value[0];
  // Empty score batches mean "no adversarial term" (supervised variants).
  ad::NodePtr adv = (c_f.empty() && c_r.empty()) ? ad::constant_scalar(0.0)
                                                 : g_adv_loss(c_f, c_r);
  parts.adv = adv->value[0];
  parts.total = ad::add(
      ad::add(ad::mul_scalar(l1_mean, weights.w1), ad::mul_scalar(ms_mean, weights.w2)),
      ad::add(ad::mul_scalar(adv, weights.w3), ad::mul_scalar(per_mean, weights.w4)));
  parts.total_value = parts.total->value[0];
  return parts;
}

}  // namespace ufg
