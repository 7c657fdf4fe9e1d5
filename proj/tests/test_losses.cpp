#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ufg/image.hpp"
#include "ufg/losses.hpp"
#include "ufg/metrics.hpp"

using namespace ufg;
using namespace ufg::test;

namespace {

std::vector<ad::NodePtr> score_nodes(const std::vector<double>& v) {
  std::vector<ad::NodePtr> out;
  for (double s : v) out.push_back(ad::leaf(Tensor::scalar(s)));
  return out;
}

}  // namespace

// ------------------------------------------------------ relativistic pair

TEST_CASE("d_loss: pinned arithmetic examples") {
  CHECK(std::fabs(d_loss(std::vector<double>{1.0}, std::vector<double>{0.0})) <
        1e-12);
  CHECK(std::fabs(d_loss(std::vector<double>{0.7}, std::vector<double>{0.7}) -
                  2.0) < 1e-12);
  CHECK(std::fabs(d_loss(std::vector<double>{0.0, 2.0},
                         std::vector<double>{0.0, 0.0}) -
                  1.0) < 1e-12);
}

TEST_CASE("g_adv_loss: pinned arithmetic examples") {
  CHECK(std::fabs(g_adv_loss(std::vector<double>{1.0}, std::vector<double>{0.0})) <
        1e-12);
  CHECK(std::fabs(g_adv_loss(std::vector<double>{0.3}, std::vector<double>{0.3}) -
                  2.0) < 1e-12);
  CHECK(std::fabs(g_adv_loss(std::vector<double>{2.0, 0.0},
                             std::vector<double>{1.0, 1.0}) -
                  3.0) < 1e-12);
}

TEST_CASE("the two losses are mirrors: same formula with roles exchanged") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a, b;
    const int n = rng.uniform_int(1, 6), m = rng.uniform_int(1, 6);
    for (int i = 0; i < n; ++i) a.push_back(rng.uniform(-3.0, 3.0));
    for (int i = 0; i < m; ++i) b.push_back(rng.uniform(-3.0, 3.0));
    CHECK(d_loss(a, b) == g_adv_loss(a, b));
    // the swapped form agrees when the batch means coincide
    std::vector<double> c = a;
    double mean_a = 0.0;
    for (double v : a) mean_a += v;
    mean_a /= n;
    for (auto& v : c) v = v - v + mean_a;  // constant at mean(a)
    CHECK(std::fabs(d_loss(a, c) - g_adv_loss(c, a)) < 1e-12);
  }
}

TEST_CASE("both losses are nonnegative and finite on random scores") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    for (int i = 0, n = rng.uniform_int(1, 8); i < n; ++i)
      a.push_back(rng.uniform(-10.0, 10.0));
    for (int i = 0, n = rng.uniform_int(1, 8); i < n; ++i)
      b.push_back(rng.uniform(-10.0, 10.0));
    const double d = d_loss(a, b);
    const double g = g_adv_loss(a, b);
    CHECK(d >= 0.0);
    CHECK(g >= 0.0);
    CHECK(std::isfinite(d));
    CHECK(std::isfinite(g));
  }
}

TEST_CASE("graph losses equal the plain forms and are differentiable") {
  Rng rng(3);
  std::vector<double> a = {0.2, -1.3, 0.8}, b = {1.1, 0.4};
  auto na = score_nodes(a);
  auto nb = score_nodes(b);
  auto dl = d_loss(na, nb);
  CHECK(dl->value[0] == doctest::Approx(d_loss(a, b)).epsilon(1e-15));
  auto make = [&] { return d_loss(na, nb); };
  for (auto& n : na) n->zero_grad();
  for (auto& n : nb) n->zero_grad();
  ad::backward(dl);
  std::vector<ad::NodePtr> leaves = na;
  leaves.insert(leaves.end(), nb.begin(), nb.end());
  auto res = finite_diff_check([&] { return make()->value[0]; }, leaves, 1e-3);
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("empty score batch raises an input error") {
  CHECK_THROWS_AS(d_loss(std::vector<double>{}, std::vector<double>{1.0}),
                  InputError);
  CHECK_THROWS_AS(g_adv_loss(std::vector<double>{1.0}, std::vector<double>{}),
                  InputError);
}

// ------------------------------------------------------------ unfair fake

TEST_CASE("unfair_fake: endpoint identities") {
  Rng rng(4);
  Tensor x_f = random_tensor({3, 8, 8}, rng);
  Tensor x_r = random_tensor({3, 8, 8}, rng);
  Tensor eta_ones({3, 8, 8}, 1.0);
  Tensor eta = random_tensor({3, 8, 8}, rng);

  const auto at_zero = unfair_fake_with(x_f, x_r, 0.0, eta);
  for (int64_t i = 0; i < x_f.size(); ++i) CHECK(at_zero.x_f_star[i] == x_f[i]);

  const auto at_one = unfair_fake_with(x_f, x_r, 1.0, eta_ones);
  for (int64_t i = 0; i < x_r.size(); ++i) CHECK(at_one.x_f_star[i] == x_r[i]);
}

TEST_CASE("unfair_fake: pinned interpolation value") {
  Tensor x_f({3, 4, 4}, 0.2);
  Tensor x_r({3, 4, 4}, 0.8);
  Tensor eta({3, 4, 4}, 0.5);
  const auto s = unfair_fake_with(x_f, x_r, 0.5, eta);
  for (int64_t i = 0; i < s.x_f_star.size(); ++i)
    CHECK(s.x_f_star[i] == doctest::Approx(0.35).epsilon(1e-15));
}

TEST_CASE("unfair_fake: betweenness over 1000 randomized trials") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor x_f = random_tensor({3, 4, 4}, rng);
    Tensor x_r = random_tensor({3, 4, 4}, rng);
    const auto s = unfair_fake(x_f, x_r, rng);
    CHECK(s.mu >= 0.0);
    CHECK(s.mu <= 1.0);
    for (int64_t i = 0; i < x_f.size(); ++i) {
      const double lo = std::min(x_f[i], x_r[i]);
      const double hi = std::max(x_f[i], x_r[i]);
      CHECK(s.x_f_star[i] >= lo - 1e-15);
      CHECK(s.x_f_star[i] <= hi + 1e-15);
    }
  }
}

TEST_CASE("unfair_fake rejects shape mismatch") {
  Rng rng(6);
  Tensor a({3, 4, 4}), b({3, 4, 5});
  CHECK_THROWS_AS(unfair_fake(a, b, rng), DimensionError);
}

// ----------------------------------------------------------- pixel losses

TEST_CASE("l1_loss: zero, uniform gap, and loop oracle") {
  Rng rng(7);
  Tensor a = random_tensor({3, 12, 12}, rng);
  CHECK(l1_loss_value(a, a) == 0.0);
  Tensor b({3, 12, 12}, 0.1);
  Tensor c({3, 12, 12}, 0.4);
  CHECK(l1_loss_value(b, c) == doctest::Approx(0.3).epsilon(1e-12));
  Tensor d = random_tensor({3, 12, 12}, rng);
  CHECK(std::fabs(l1_loss_value(a, d) - l1_naive(a, d)) < 1e-9);
  auto graph = l1_loss(ad::constant(a), ad::constant(d));
  CHECK(graph->value[0] == doctest::Approx(l1_loss_value(a, d)).epsilon(1e-15));
  // estnet_loss shares the same contract
  auto est = estnet_loss(ad::constant(d), ad::constant(a));
  CHECK(est->value[0] == doctest::Approx(l1_loss_value(a, d)).epsilon(1e-15));
}

TEST_CASE("l1_loss gradient (inputs kept away from the |.| kink)") {
  Rng rng(8);
  Tensor av = random_tensor({3, 8, 8}, rng, 0.0, 0.4);
  Tensor bv = random_tensor({3, 8, 8}, rng, 0.5, 1.0);
  auto a = ad::leaf(av);
  auto b = ad::leaf(bv);
  auto make = [&] { return l1_loss(a, b); };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {a, b});
  CHECK(res.max_rel_err < 1e-4);
}

// --------------------------------------------------------- MS-SSIM losses

TEST_CASE("ms_ssim_loss: identity gives 0 and matches 1 - metric") {
  Rng rng(9);
  Tensor a = gaussian_blur(random_tensor({3, 48, 48}, rng), 1.2);
  Tensor b = gaussian_blur(random_tensor({3, 48, 48}, rng), 1.2);
  CHECK(ms_ssim_loss(ad::constant(a), ad::constant(a))->value[0] ==
        doctest::Approx(0.0).epsilon(1e-12));
  const double loss = ms_ssim_loss(ad::constant(a), ad::constant(b))->value[0];
  CHECK(loss == doctest::Approx(1.0 - ms_ssim(a, b)).epsilon(1e-9));
  // symmetry
  const double loss_swapped =
      ms_ssim_loss(ad::constant(b), ad::constant(a))->value[0];
  CHECK(std::fabs(loss - loss_swapped) < 1e-12);
}

TEST_CASE("ms_ssim_loss: constant-vs-constant closed form") {
  Tensor a({3, 32, 32}, 0.0);
  Tensor b({3, 32, 32}, 1.0);
  const double c1 = kSsimK1 * kSsimK1;
  const double want = 1.0 - std::pow(c1 / (1.0 + c1), kMsSsimWeights[4]);
  CHECK(ms_ssim_loss(ad::constant(a), ad::constant(b))->value[0] ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("ms_ssim_loss gradient on 32x32 inputs") {
  Rng rng(10);
  auto a = ad::leaf(gaussian_blur(random_tensor({1, 32, 32}, rng, 0.2, 0.8), 1.0));
  auto b = ad::leaf(gaussian_blur(random_tensor({1, 32, 32}, rng, 0.2, 0.8), 1.0));
  auto make = [&] { return ms_ssim_loss(a, b); };
  ad::backward(make());
  Rng probe(11);
  auto res = finite_diff_check([&] { return make()->value[0]; }, {a, b}, 1e-3,
                               96, &probe);
  CHECK(res.max_rel_err < 1e-4);
}

// ------------------------------------------------------------- perceptual

TEST_CASE("perceptual_loss: identity features reduce to mean squared gap") {
  Tensor a({3, 8, 8}, 0.2);
  Tensor b({3, 8, 8}, 0.45);
  IdentityExtractor id;
  const double loss =
      perceptual_loss(ad::constant(a), ad::constant(b), id)->value[0];
  CHECK(loss == doctest::Approx(0.25 * 0.25).epsilon(1e-12));
  CHECK(perceptual_loss(ad::constant(a), ad::constant(a), id)->value[0] == 0.0);
}

TEST_CASE("perceptual_loss: conv-stack features match the loop oracle") {
  Rng rng(12);
  ConvStackExtractor ex(123);
  Tensor a = random_tensor({3, 16, 16}, rng);
  Tensor b = random_tensor({3, 16, 16}, rng);
  auto fa = ex.features(ad::constant(a));
  auto fb = ex.features(ad::constant(b));
  double sum = 0.0;
  for (int64_t i = 0; i < fa->value.size(); ++i) {
    const double d = fa->value[i] - fb->value[i];
    sum += d * d;
  }
  const double want = sum / static_cast<double>(fa->value.size());
  const double got =
      perceptual_loss(ad::constant(a), ad::constant(b), ex)->value[0];
  CHECK(std::fabs(got - want) < 1e-7);
  // seeded determinism of the extractor
  ConvStackExtractor ex2(123);
  const double again =
      perceptual_loss(ad::constant(a), ad::constant(b), ex2)->value[0];
  CHECK(again == got);
}

TEST_CASE("perceptual_loss gradient through the frozen extractor") {
  Rng rng(13);
  ConvStackExtractor ex(321);
  auto a = ad::leaf(random_tensor({3, 8, 8}, rng, 0.2, 0.8));
  auto b = ad::leaf(random_tensor({3, 8, 8}, rng, 0.2, 0.8));
  auto make = [&] { return perceptual_loss(a, b, ex); };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {a, b}, 1e-3);
  CHECK(res.max_rel_err < 1e-4);
}

// --------------------------------------------------------- generator loss

TEST_CASE("generator_loss: identical images with constant critic give 0.002") {
  Rng rng(14);
  Tensor img = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  IdentityExtractor id;
  auto x = ad::constant(img);
  auto cf = score_nodes({0.4});
  auto cr = score_nodes({0.4});
  const auto parts = generator_loss({x}, {x}, cf, cr, LossWeights{}, id);
  CHECK(parts.l1 == 0.0);
  CHECK(parts.ms_ssim == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(parts.perceptual == 0.0);
  CHECK(parts.adv == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(parts.total_value == doctest::Approx(0.002).epsilon(1e-9));
}

TEST_CASE("generator_loss: weights (1,0,0,0) project onto l1") {
  Rng rng(15);
  Tensor a = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  Tensor b = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  IdentityExtractor id;
  const auto parts = generator_loss({ad::constant(a)}, {ad::constant(b)},
                                    score_nodes({0.0}), score_nodes({0.0}),
                                    LossWeights{1.0, 0.0, 0.0, 0.0}, id);
  CHECK(parts.total_value == doctest::Approx(l1_loss_value(a, b)).epsilon(1e-15));
}

TEST_CASE("generator_loss: default weights equal the hand-composed sum") {
  Rng rng(16);
  Tensor a = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  Tensor b = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  ConvStackExtractor ex(55);
  std::vector<double> cf = {0.3, -0.2}, cr = {0.6, 0.1};
  const auto parts = generator_loss({ad::constant(a)}, {ad::constant(b)},
                                    score_nodes(cf), score_nodes(cr),
                                    LossWeights{}, ex);
  const double want =
      0.16 * l1_loss_value(a, b) +
      0.84 * (1.0 - ms_ssim(a, b)) +
      0.001 * g_adv_loss(cf, cr) +
      0.01 * perceptual_loss(ad::constant(a), ad::constant(b), ex)->value[0];
  CHECK(std::fabs(parts.total_value - want) < 1e-12);
}

TEST_CASE("generator_loss is linear in the weights") {
  Rng rng(17);
  Tensor a = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  Tensor b = gaussian_blur(random_tensor({3, 32, 32}, rng), 1.0);
  IdentityExtractor id;
  LossWeights w1{0.16, 0.84, 0.001, 0.01};
  LossWeights w2{0.32, 0.84, 0.001, 0.01};
  const auto p1 = generator_loss({ad::constant(a)}, {ad::constant(b)},
                                 score_nodes({0.2}), score_nodes({0.5}), w1, id);
  const auto p2 = generator_loss({ad::constant(a)}, {ad::constant(b)},
                                 score_nodes({0.2}), score_nodes({0.5}), w2, id);
  CHECK(std::fabs((p2.total_value - p1.total_value) - 0.16 * p1.l1) < 1e-12);
}

TEST_CASE("generator_loss rejects negative or non-finite weights") {
  CHECK_THROWS_AS(LossWeights({-0.1, 0.84, 0.001, 0.01}).validate(), ConfigError);
}
