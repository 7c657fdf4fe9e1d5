#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "ufg/autodiff.hpp"
#include "ufg/rng.hpp"

using namespace ufg;
using namespace ufg::test;

TEST_CASE("elementwise ops: values and broadcast") {
  auto a = ad::leaf(Tensor::from({4}, {1.0, 2.0, 3.0, 4.0}));
  auto b = ad::leaf(Tensor::from({4}, {0.5, 0.5, 2.0, -1.0}));
  CHECK(ad::add(a, b)->value[2] == doctest::Approx(5.0));
  CHECK(ad::sub(a, b)->value[3] == doctest::Approx(5.0));
  CHECK(ad::mul(a, b)->value[1] == doctest::Approx(1.0));
  CHECK(ad::div(a, b)->value[2] == doctest::Approx(1.5));

  auto s = ad::constant_scalar(2.0);
  auto bc = ad::mul(a, s);
  CHECK(bc->value[3] == doctest::Approx(8.0));
  CHECK(ad::mean_all(a)->value[0] == doctest::Approx(2.5));
  CHECK(ad::sum_all(a)->value[0] == doctest::Approx(10.0));
}

TEST_CASE("shape mismatch raises dimension error") {
  auto a = ad::leaf(Tensor({3}));
  auto b = ad::leaf(Tensor({4}));
  CHECK_THROWS_AS(ad::add(a, b), DimensionError);
}

TEST_CASE("backward: product rule through shared node") {
  // f = (x*x) summed; df/dx = 2x
  auto x = ad::leaf(Tensor::from({3}, {1.0, -2.0, 3.0}));
  auto root = ad::sum_all(ad::mul(x, x));
  ad::backward(root);
  CHECK(x->grad[0] == doctest::Approx(2.0));
  CHECK(x->grad[1] == doctest::Approx(-4.0));
  CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("conv2d forward equals the naive loop oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 4; ++trial) {
    const int stride = 1 + trial % 2;
    const int dil = 1 + trial / 2;
    const int pad = dil;
    Tensor x = random_tensor({3, 9, 10}, rng, -1.0, 1.0);
    Tensor w = random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5);
    Tensor b = random_tensor({4}, rng, -0.2, 0.2);
    Tensor got = ad::conv2d_value(x, w, &b, stride, dil, pad, pad);
    Tensor want = conv2d_naive(x, w, &b, stride, dil, pad, pad);
    REQUIRE(got.same_shape(want));
    for (int64_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(5);
  auto x = ad::leaf(random_tensor({2, 6, 6}, rng, -0.8, 0.8));
  auto w = ad::leaf(random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5));
  auto b = ad::leaf(random_tensor({3}, rng, -0.2, 0.2));
  auto make = [&] { return ad::mean_all(ad::square(ad::conv2d(x, w, b, 2, 1, 1, 1))); };
  auto root = make();
  ad::backward(root);
  auto res = finite_diff_check([&] { return make()->value[0]; }, {x, w, b});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("depthwise conv gradients") {
  Rng rng(6);
  auto x = ad::leaf(random_tensor({3, 5, 5}, rng, -0.8, 0.8));
  auto w = ad::leaf(random_tensor({3, 1, 3, 3}, rng, -0.5, 0.5));
  auto b = ad::leaf(random_tensor({3}, rng, -0.2, 0.2));
  auto make = [&] {
    return ad::mean_all(ad::square(ad::conv2d_depthwise(x, w, b, 1)));
  };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {x, w, b});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("pool / upsample / concat / luminance gradients") {
  Rng rng(7);
  auto x = ad::leaf(random_tensor({3, 6, 6}, rng, 0.1, 0.9));
  auto y = ad::leaf(random_tensor({2, 6, 6}, rng, 0.1, 0.9));
  auto make = [&] {
    auto p = ad::avg_pool(x, 2);
    auto u = ad::upsample_nearest(p, 2);
    auto lu = ad::luminance(x);
    auto cat = ad::concat_ch({u, y, lu});
    return ad::mean_all(ad::square(cat));
  };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {x, y});
  CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("avg_pool floor semantics drops trailing rows") {
  Tensor x({1, 5, 5}, 1.0);
  x.at(0, 4, 4) = 100.0;  // trailing row/col must not contribute
  auto p = ad::avg_pool(ad::constant(x), 2);
  CHECK(p->value.dim(1) == 2);
  for (int64_t i = 0; i < p->value.size(); ++i)
    CHECK(p->value[i] == doctest::Approx(1.0));
}

TEST_CASE("nonlinearities: values and gradients") {
  Rng rng(8);
  auto x = ad::leaf(random_tensor({40}, rng, -2.0, 2.0));
  // keep clear of the kinks at 0 and the clamp edges
  for (int64_t i = 0; i < x->value.size(); ++i)
    if (std::fabs(x->value[i]) < 0.05) x->value[i] = 0.25;
  auto make = [&] {
    auto t = ad::leaky_relu(x, 0.2);
    t = ad::exp_(ad::neg(ad::square(ad::mul_scalar(t, 0.3))));
    t = ad::mul(t, ad::abs_(x));
    t = ad::add(t, ad::pow_const(ad::add_scalar(ad::relu(x), 0.1), 1.7));
    return ad::mean_all(t);
  };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {x});
  CHECK(res.max_rel_err < 1e-4);
}

TEST_CASE("clamp01 passes gradient only inside the open interval") {
  auto x = ad::leaf(Tensor::from({3}, {-0.5, 0.5, 1.5}));
  auto root = ad::sum_all(ad::clamp01(x));
  ad::backward(root);
  CHECK(x->grad[0] == 0.0);
  CHECK(x->grad[1] == 1.0);
  CHECK(x->grad[2] == 0.0);
  CHECK(ad::clamp01(x)->value[0] == 0.0);
  CHECK(ad::clamp01(x)->value[2] == 1.0);
}

TEST_CASE("stack_scalars routes gradients to each element") {
  auto a = ad::leaf(Tensor::scalar(2.0));
  auto b = ad::leaf(Tensor::scalar(3.0));
  auto stacked = ad::stack_scalars({a, b});
  auto root = ad::sum_all(ad::mul(stacked, stacked));
  ad::backward(root);
  CHECK(a->grad[0] == doctest::Approx(4.0));
  CHECK(b->grad[0] == doctest::Approx(6.0));
}

TEST_CASE("spectral_scale gradient treats sigma as a function of W") {
  Rng rng(9);
  auto w = ad::leaf(random_tensor({4, 6}, rng, -1.0, 1.0));
  Tensor u = random_tensor({4}, rng, -1.0, 1.0);
  Tensor v = random_tensor({6}, rng, -1.0, 1.0);
  auto make = [&] { return ad::mean_all(ad::square(ad::spectral_scale(w, u, v))); };
  ad::backward(make());
  auto res = finite_diff_check([&] { return make()->value[0]; }, {w}, 1e-4);
  CHECK(res.max_rel_err < 1e-4);
}
