#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "eegsr/adam.hpp"
#include "eegsr/model.hpp"
#include "eegsr/ops.hpp"
#include "eegsr/serialize.hpp"
#include "test_support.hpp"

using namespace eegsr;
using eegsr::testing::finite_difference;
using eegsr::testing::random_tensor;
using eegsr::testing::relative_error;
using V = Var<double>;
using TD = Tensor<double>;

namespace {

// Direct-summation "same" convolution, independent of im2col.
TD naive_conv(const TD& x, const TD& w, std::size_t sh, std::size_t sw) {
  std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  std::size_t oh = (H + sh - 1) / sh, ow = (W + sw - 1) / sw;
  long pt = static_cast<long>(std::max<long>(0, static_cast<long>((oh - 1) * sh + kh) - static_cast<long>(H)) / 2);
  long pl = static_cast<long>(std::max<long>(0, static_cast<long>((ow - 1) * sw + kw) - static_cast<long>(W)) / 2);
  TD out(Shape{N, O, oh, ow});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          double acc = 0;
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                long iy = static_cast<long>(y * sh + i) - pt, ix = static_cast<long>(xx * sw + j) - pl;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W)) continue;
                acc += w[((o * C + c) * kh + i) * kw + j] * x[((n * C + c) * H + iy) * W + ix];
              }
          out[((n * O + o) * oh + y) * ow + xx] = acc;
        }
  return out;
}

double weighted_sum(const TD& y, const TD& r) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

// Checks analytic gradients of sum(r * op(inputs)) against finite differences.
void check_gradients(const std::function<V(const std::vector<V>&)>& op, std::vector<TD> inputs,
                     std::uint64_t seed = 7, double tol = 1e-4) {
  std::mt19937_64 rng(seed);
  std::vector<V> vars;
  for (auto& t : inputs) vars.emplace_back(t, true);
  V y = op(vars);
  TD r = random_tensor(y.shape(), rng);
  V loss = sum_all(mul(y, constant(r)));
  auto grads = grad(loss, vars);
  auto f = [&](const std::vector<TD>& in) {
    NoGradGuard guard;
    std::vector<V> vs;
    for (const auto& t : in) vs.emplace_back(t, false);
    return weighted_sum(op(vs).value(), r);
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto fd = finite_difference(f, inputs, k);
    EXPECT_LT(relative_error(grads[k].value(), fd), tol) << "input " << k;
  }
}

}  // namespace

// ------------------------------------------------------------------ conv2d

TEST(Conv2d, OneByOneIdentityKernel) {
  std::mt19937_64 rng(1);
  TD x = random_tensor({2, 1, 5, 7}, rng);
  TD w(Shape{1, 1, 1, 1}, 1.0);
  V y = conv2d(constant(x), constant(w));
  EXPECT_EQ(y.value().storage(), x.storage());
}

TEST(Conv2d, AscendingThreeByThreeCenterIs45) {
  TD x(Shape{1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  TD w(Shape{1, 1, 3, 3}, 1.0);
  V y = conv2d(constant(x), constant(w));
  TD oracle = naive_conv(x, w, 1, 1);
  EXPECT_DOUBLE_EQ(y.value()[4], 45.0);
  EXPECT_EQ(y.value().storage(), oracle.storage());
}

TEST(Conv2d, StrideFourOnSixteenBySixtyFour) {
  std::mt19937_64 rng(2);
  TD x = random_tensor({1, 2, 16, 64}, rng);
  TD w = random_tensor({3, 2, 5, 3}, rng);
  V y = conv2d(constant(x), constant(w), 4, 4);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 4, 16}));
  EXPECT_LT(eegsr::testing::max_abs_diff(y.value().values(), naive_conv(x, w, 4, 4).values()), 1e-12);
}

TEST(Conv2d, SamePaddingPreservesShapeForTableKernels) {
  std::mt19937_64 rng(3);
  for (auto [kh, kw] : std::vector<std::pair<std::size_t, std::size_t>>{
           {17, 1}, {9, 1}, {9, 3}, {5, 1}, {5, 3}, {1, 3}, {3, 1}, {25, 1}, {13, 1}, {8, 1}, {4, 2}}) {
    for (std::size_t h : {8u, 16u, 24u}) {
      TD x = random_tensor({1, 2, h, 64}, rng);
      TD w = random_tensor({2, 2, kh, kw}, rng);
      V y = conv2d(constant(x), constant(w));
      EXPECT_EQ(y.shape(), (Shape{1, 2, h, 64}));
      EXPECT_LT(eegsr::testing::max_abs_diff(y.value().values(), naive_conv(x, w, 1, 1).values()), 1e-12)
          << kh << "x" << kw << " on height " << h;
    }
  }
}

TEST(Conv2d, LinearInInput) {
  std::mt19937_64 rng(4);
  TD x = random_tensor({2, 3, 8, 16}, rng), z = random_tensor({2, 3, 8, 16}, rng);
  TD w = random_tensor({4, 3, 5, 3}, rng);
  double a = 1.7, b = -0.3;
  TD mix(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * z[i];
  for (std::size_t s : {1u, 4u}) {
    auto fx = conv2d(constant(x), constant(w), s, s).value();
    auto fz = conv2d(constant(z), constant(w), s, s).value();
    auto fm = conv2d(constant(mix), constant(w), s, s).value();
    for (std::size_t i = 0; i < fm.size(); ++i) EXPECT_NEAR(fm[i], a * fx[i] + b * fz[i], 1e-10);
  }
}

TEST(Conv2d, MismatchedMapsNamesShapes) {
  TD x(Shape{1, 2, 4, 4});
  TD w(Shape{1, 3, 1, 1});
  try {
    conv2d(constant(x), constant(w));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(1, 3, 1, 1)"), std::string::npos);
  }
}

// ------------------------------------------------------------- activations

TEST(Activation, EluValues) {
  TD x(Shape{4}, {0.0, 2.0, -1.0, -3.0});
  auto y = elu(constant(x), 1.0).value();
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_NEAR(y[2], std::exp(-1.0) - 1.0, 1e-15);
  EXPECT_NEAR(y[2], -0.63212, 1e-5);
}

TEST(Activation, EluContinuousAtZero) {
  TD x(Shape{2}, {1e-8, -1e-8});
  auto y = elu(constant(x), 1.0).value();
  EXPECT_LT(std::abs(y[0]), 2e-8);
  EXPECT_LT(std::abs(y[1]), 2e-8);
}

TEST(Activation, ReluAndLinear) {
  TD x(Shape{3}, {-1.0, 0.0, 2.5});
  auto y = relu(constant(x)).value();
  EXPECT_EQ(y.storage(), (std::vector<double>{0.0, 0.0, 2.5}));
  EXPECT_EQ(apply_activation(constant(x), Activation::Linear, 1.0).value().storage(), x.storage());
}

TEST(Activation, SoftmaxUniformAndNormalized) {
  auto u = softmax(constant(TD(Shape{1, 3}, 0.0))).value();
  for (double p : u.values()) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  std::mt19937_64 rng(5);
  TD x = random_tensor({20, 7}, rng, -30, 30);
  auto y = softmax(constant(x)).value();
  for (std::size_t i = 0; i < 20; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      double p = y[i * 7 + j];
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      s += p;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

// -------------------------------------------------------------- upsample_nn

TEST(Upsample, FactorOneIsIdentity) {
  std::mt19937_64 rng(6);
  TD x = random_tensor({1, 1, 8, 4}, rng);
  EXPECT_EQ(upsample_nn(constant(x), 1).value().storage(), x.storage());
}

TEST(Upsample, RowRepetitionAndColumnSums) {
  std::mt19937_64 rng(7);
  TD x = random_tensor({1, 2, 8, 5}, rng);
  auto y = upsample_nn(constant(x), 3).value();
  ASSERT_EQ(y.shape(), (Shape{1, 2, 24, 5}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 24; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(y[(c * 24 + i) * 5 + j], x[(c * 8 + i / 3) * 5 + j]);
  for (std::size_t j = 0; j < 5; ++j) {
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < 8; ++i) sx += x[i * 5 + j];
    for (std::size_t i = 0; i < 24; ++i) sy += y[i * 5 + j];
    EXPECT_NEAR(sy, 3 * sx, 1e-12);
  }
}

TEST(Upsample, RejectsZeroFactor) {
  EXPECT_THROW(upsample_nn(constant(TD(Shape{1, 1, 2, 2})), 0), ShapeError);
}

// ------------------------------------------------------------------- concat

TEST(Concat, SingleInputIdentityAndMapCounts) {
  std::mt19937_64 rng(8);
  TD a = random_tensor({2, 128, 3, 4}, rng), b = random_tensor({2, 128, 3, 4}, rng);
  EXPECT_EQ(concat<double>({constant(a)}).value().storage(), a.storage());
  V c = concat<double>({constant(a), constant(b)});
  EXPECT_EQ(c.shape(), (Shape{2, 256, 3, 4}));
  EXPECT_EQ(slice_axis1(c, 0, 128).value().storage(), a.storage());
  EXPECT_EQ(slice_axis1(c, 128, 128).value().storage(), b.storage());
}

TEST(Concat, MismatchedSpatialDims) {
  EXPECT_THROW(concat<double>({constant(TD(Shape{1, 1, 2, 2})), constant(TD(Shape{1, 1, 3, 2}))}), ShapeError);
}

// ------------------------------------------------------------------ dropout

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  std::mt19937_64 rng(9);
  TD x = random_tensor({4, 50}, rng);
  V vx = constant(x);
  EXPECT_EQ(dropout(vx, 0.0, true, rng).value().storage(), x.storage());
  EXPECT_EQ(dropout(vx, 0.25, false, rng).value().storage(), x.storage());
  EXPECT_EQ(dropout(vx, 0.9, false, rng).value().storage(), x.storage());
}

TEST(Dropout, PreservesMeanInExpectation) {
  std::mt19937_64 rng(10);
  TD x = random_tensor({1, 400000}, rng, 0.5, 1.5);
  double mx = 0, my = 0;
  auto y = dropout(constant(x), 0.25, true, rng).value();
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
    zeros += y[i] == 0.0;
  }
  EXPECT_NEAR(my / mx, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / x.size(), 0.25, 0.01);
}

// -------------------------------------------------------------------- dense

TEST(Dense, IdentityAndArithmetic) {
  TD x(Shape{1, 3}, {1, -2, 3});
  TD eye(Shape{3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(dense(constant(x), constant(eye), constant(TD(Shape{3}))).value().storage(), x.storage());
  auto y = dense(constant(TD(Shape{1, 2}, {2, 3})), constant(TD(Shape{1, 2}, {1, 1})), constant(TD(Shape{1}, 1.0)));
  EXPECT_EQ(y.value().storage(), std::vector<double>{6.0});
}

TEST(Dense, MatchesLoopOracle) {
  std::mt19937_64 rng(11);
  TD x = random_tensor({5, 17}, rng), w = random_tensor({9, 17}, rng), b = random_tensor({9}, rng);
  auto y = dense(constant(x), constant(w), constant(b)).value();
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t o = 0; o < 9; ++o) {
      double acc = b[o];
      for (std::size_t f = 0; f < 17; ++f) acc += w[o * 17 + f] * x[n * 17 + f];
      EXPECT_NEAR(y[n * 9 + o], acc, 1e-12);
    }
}

TEST(Dense, DimensionMismatch) {
  EXPECT_THROW(dense(constant(TD(Shape{1, 3})), constant(TD(Shape{2, 4})), constant(TD(Shape{2}))), ShapeError);
}

// ------------------------------------------------------------------- losses

TEST(Loss, MseMae) {
  V p = constant(TD(Shape{2}, {1, 2})), t = constant(TD(Shape{2}, {1, 4}));
  EXPECT_DOUBLE_EQ(loss(LossKind::MSE, p, t).item(), 2.0);
  EXPECT_DOUBLE_EQ(loss(LossKind::MAE, p, t).item(), 1.0);
}

TEST(Loss, CrossEntropyClosedForms) {
  V onehot = constant(TD(Shape{1, 3}, {0, 1, 0}));
  EXPECT_NEAR(loss(LossKind::CrossEntropy, onehot, onehot).item(), 0.0, 1e-11);
  V uniform = constant(TD(Shape{1, 3}, 1.0 / 3.0));
  EXPECT_NEAR(loss(LossKind::CrossEntropy, uniform, onehot).item(), std::log(3.0), 1e-10);
  EXPECT_NEAR(loss(LossKind::CrossEntropy, uniform, onehot).item(), 1.0986, 1e-4);
}

TEST(Loss, ShapeMismatch) {
  EXPECT_THROW(mse_loss(constant(TD(Shape{2})), constant(TD(Shape{3}))), ShapeError);
}

// ----------------------------------------------------------------- backward

TEST(Backward, MseOfScalar) {
  V x(TD(Shape{1}, 3.0), true);
  auto g = backward(mse_loss(x, constant(TD(Shape{1}))), {x});
  EXPECT_DOUBLE_EQ(g[0].value()[0], 6.0);
}

TEST(Backward, BeforeForwardIsAnError) {
  V loss_without_graph;
  EXPECT_THROW(backward(loss_without_graph, {}), Error);
  V x(TD(Shape{1}, 1.0), false);
  EXPECT_THROW(backward(x, {}), Error);
}

TEST(Backward, EluGradientAtZeroIsOne) {
  V x(TD(Shape{1}, 0.0), true);
  auto g = backward(sum_all(elu(x, 1.0)), {x});
  EXPECT_EQ(g[0].value()[0], 1.0);
}

TEST(GradCheck, Conv2dStrideOne) {
  std::mt19937_64 rng(12);
  check_gradients([](const std::vector<V>& v) { return conv2d(v[0], v[1]); },
                  {random_tensor({2, 2, 6, 5}, rng), random_tensor({3, 2, 5, 3}, rng)});
}

TEST(GradCheck, Conv2dStrideFour) {
  std::mt19937_64 rng(13);
  check_gradients([](const std::vector<V>& v) { return conv2d(v[0], v[1], 4, 4); },
                  {random_tensor({2, 2, 9, 10}, rng), random_tensor({2, 2, 3, 3}, rng)});
}

TEST(GradCheck, Conv2dEvenKernel) {
  std::mt19937_64 rng(14);
  check_gradients([](const std::vector<V>& v) { return conv2d(v[0], v[1]); },
                  {random_tensor({1, 2, 8, 4}, rng), random_tensor({2, 2, 4, 2}, rng)});
}

TEST(GradCheck, BiasAdd) {
  std::mt19937_64 rng(15);
  check_gradients([](const std::vector<V>& v) { return bias_add(v[0], v[1]); },
                  {random_tensor({2, 3, 2, 2}, rng), random_tensor({3}, rng)});
}

TEST(GradCheck, Dense) {
  std::mt19937_64 rng(16);
  check_gradients([](const std::vector<V>& v) { return dense(v[0], v[1], v[2]); },
                  {random_tensor({4, 6}, rng), random_tensor({5, 6}, rng), random_tensor({5}, rng)});
}

TEST(GradCheck, Elu) {
  std::mt19937_64 rng(17);
  TD x = random_tensor({3, 20}, rng, -3, 3);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // keep finite differences off the kink
  check_gradients([](const std::vector<V>& v) { return elu(v[0], 1.0); }, {x});
}

TEST(GradCheck, Relu) {
  std::mt19937_64 rng(18);
  TD x = random_tensor({3, 20}, rng, -3, 3);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;
  check_gradients([](const std::vector<V>& v) { return relu(v[0]); }, {x});
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  std::mt19937_64 rng(19);
  TD target(Shape{4, 3});
  for (std::size_t i = 0; i < 4; ++i) target[i * 3 + i % 3] = 1.0;
  check_gradients(
      [target](const std::vector<V>& v) { return cross_entropy_loss(softmax(v[0]), constant(target)); },
      {random_tensor({4, 3}, rng, -2, 2)});
}

TEST(GradCheck, ConcatAndUpsample) {
  std::mt19937_64 rng(20);
  check_gradients([](const std::vector<V>& v) { return concat<double>({v[0], v[1], v[0]}); },
                  {random_tensor({2, 2, 3, 4}, rng), random_tensor({2, 3, 3, 4}, rng)});
  check_gradients([](const std::vector<V>& v) { return upsample_nn(v[0], 3); },
                  {random_tensor({2, 2, 4, 3}, rng)});
}

TEST(GradCheck, MseMaeSqrt) {
  std::mt19937_64 rng(21);
  check_gradients([](const std::vector<V>& v) { return mse_loss(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  check_gradients([](const std::vector<V>& v) { return mae_loss(v[0], v[1]); },
                  {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng, 2, 3)});
  check_gradients([](const std::vector<V>& v) { return sqrt(v[0]); }, {random_tensor({3, 4}, rng, 0.5, 2)});
}

// Gradient of a function of an input gradient: the double backward the
// gradient penalty relies on, checked against finite differences of the
// first-order gradient norm.
TEST(GradCheck, DoubleBackwardThroughConvEluDense) {
  std::mt19937_64 rng(22);
  TD x = random_tensor({2, 1, 5, 6}, rng);
  std::vector<TD> params{random_tensor({3, 1, 3, 1}, rng), random_tensor({3}, rng),
                         random_tensor({2, 6, 2, 3}, rng), random_tensor({1, 2 * 3 * 3}, rng),
                         random_tensor({1}, rng)};
  auto penalty = [&](const std::vector<V>& p, bool create) {
    V xv(x, true);
    V h = elu(bias_add(conv2d(xv, p[0]), p[1]), 1.0);
    h = elu(conv2d(concat<double>({h, h}), p[2], 2, 2), 1.0);
    V out = dense(flatten(h), p[3], p[4]);
    auto gx = grad(sum_all(out), {xv}, create)[0];
    V norms = sqrt(sum_per_sample(mul(gx, gx)));
    V d = sub(norms, constant(TD(norms.shape(), 1.0)));
    return mean(mul(d, d));
  };
  std::vector<V> pv;
  for (auto& t : params) pv.emplace_back(t, true);
  auto analytic = grad(penalty(pv, true), pv);
  auto f = [&](const std::vector<TD>& in) {
    std::vector<V> vs;
    for (const auto& t : in) vs.emplace_back(t, true);
    return penalty(vs, false).item();
  };
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (k == 4) {
      // The output bias does not affect the input gradient.
      EXPECT_EQ(analytic[k].value()[0], 0.0);
      continue;
    }
    auto fd = finite_difference(f, params, k);
    EXPECT_LT(relative_error(analytic[k].value(), fd), 1e-4) << "param " << k;
  }
}

TEST(GradCheck, ThirdOrderThroughEluIsRejected) {
  V x(TD(Shape{1}, -0.5), true);
  auto g1 = grad(sum_all(elu(x, 1.0)), {x}, true)[0];
  auto g2 = grad(sum_all(g1), {x}, true)[0];
  EXPECT_NEAR(g2.item(), std::exp(-0.5), 1e-15);
  EXPECT_THROW(grad(sum_all(g2), {x}), Error);
}

// --------------------------------------------------------------------- adam

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<V> p{V(TD(Shape{3}, {1, 2, 3}), true)};
  Adam<double> opt(AdamConfig{}, p);
  opt.step(p, {V(TD(Shape{3}))});
  EXPECT_EQ(p[0].value().storage(), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  for (double g : {0.37, -5.0, 1e-3}) {
    std::vector<V> p{V(TD(Shape{1}, 0.0), true)};
    Adam<double> opt(AdamConfig{1e-4, 0.5, 0.9, 1e-8}, p);
    opt.step(p, {V(TD(Shape{1}, g))});
    double expected = -1e-4 * (g > 0 ? 1 : -1);
    EXPECT_NEAR(p[0].value()[0], expected, 1e-4 * 1e-8 / std::abs(g) + 1e-18);
  }
}

TEST(Adam, MatchesScalarOracleOver100Steps) {
  std::mt19937_64 rng(23);
  AdamConfig cfg{1e-3, 0.9, 0.99, 1e-8};
  TD init = random_tensor({6}, rng);
  std::vector<V> p{V(init, true)};
  Adam<double> opt(cfg, p);
  std::vector<double> ref(init.storage()), m(6, 0.0), v(6, 0.0);
  for (int t = 1; t <= 100; ++t) {
    TD g = random_tensor({6}, rng);
    opt.step(p, {V(g)});
    for (int i = 0; i < 6; ++i) {
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
      double mh = m[i] / (1 - std::pow(cfg.beta1, t));
      double vh = v[i] / (1 - std::pow(cfg.beta2, t));
      ref[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(p[0].value()[i], ref[i], 1e-10);
}

// ------------------------------------------------------------ serialization

TEST(Serialization, RoundTripIsBitExact) {
  std::vector<LayerSpec> layers{LayerSpec::conv(3, 3, 1, Activation::ELU), LayerSpec::dropout(0.1),
                                LayerSpec::concat({-1, 1}), LayerSpec::dense(2, Activation::Linear)};
  Model<double> m(Shape{1, 4, 5}, layers, 99);
  auto dir = fs::temp_directory_path() / "eegsr_serialize_test";
  fs::remove_all(dir);
  save_model(m, dir, "model");
  auto back = load_model<double>(dir, "model");
  ASSERT_EQ(back.layers(), m.layers());
  for (std::size_t i = 0; i < m.parameters().size(); ++i)
    EXPECT_EQ(back.parameters()[i].value().storage(), m.parameters()[i].value().storage());

  Model<float> mf(Shape{1, 4, 5}, layers, 99);
  save_model(mf, dir, "model_f32");
  EXPECT_EQ(fs::file_size(dir / "model_f32.bin"), mf.parameter_count() * 4);
  auto backf = load_model<float>(dir, "model_f32");
  EXPECT_EQ(backf.parameters()[0].value().storage(), mf.parameters()[0].value().storage());

  io::write_text(dir / "model.json", "{ not json");
  EXPECT_THROW(load_model<double>(dir, "model"), ParseError);
  fs::remove_all(dir);
}

TEST(Model, SeededInitIsDeterministic) {
  std::vector<LayerSpec> layers{LayerSpec::dense(8, Activation::ReLU), LayerSpec::dense(2, Activation::Softmax)};
  Model<double> a(Shape{5}, layers, 3), b(Shape{5}, layers, 3), c(Shape{5}, layers, 4);
  EXPECT_EQ(a.parameters()[0].value().storage(), b.parameters()[0].value().storage());
  EXPECT_NE(a.parameters()[0].value().storage(), c.parameters()[0].value().storage());
  auto clone = a.clone();
  clone.parameters()[0].mutable_value()[0] += 1.0;
  EXPECT_NE(clone.parameters()[0].value()[0], a.parameters()[0].value()[0]);
}
