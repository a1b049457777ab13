#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "tsnet/network.hpp"
#include "tsnet/random.hpp"

using namespace tsnet;

namespace {

double eval1(const NetworkParams& net, double t) { return net(Eigen::VectorXd::Constant(1, t)); }

// Unit-by-unit recomputation with explicit loops, no Eigen products.
double naive_eval(const NetworkParams& net, const Eigen::VectorXd& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& layer = net.layer(l);
    std::vector<double> next(static_cast<std::size_t>(layer.out_dim()));
    for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
      double s = layer.bias(i);
      for (Eigen::Index j = 0; j < layer.in_dim(); ++j) s += layer.weights(i, j) * h[static_cast<std::size_t>(j)];
      next[static_cast<std::size_t>(i)] = (l + 1 < net.layer_count()) ? std::max(s, 0.0) : s;
    }
    h = std::move(next);
  }
  return h[0];
}

}  // namespace

TEST_CASE("bump phi is the unit hat") {
  const auto phi = make_bump_phi();
  CHECK(eval1(phi, 0.0) == doctest::Approx(1.0));
  CHECK(eval1(phi, 1.5) == doctest::Approx(0.0));
  CHECK(eval1(phi, -1.0) == doctest::Approx(0.0));
  CHECK(eval1(phi, 0.5) == doctest::Approx(0.5));
  CHECK(eval1(phi, -0.25) == doctest::Approx(0.75));

  double best = -1.0, arg = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double t = -2.0 + 0.01 * i;
    const double v = eval1(phi, t);
    if (v > best) best = v, arg = t;
  }
  CHECK(best == doctest::Approx(1.0));
  CHECK(arg == doctest::Approx(0.0).epsilon(1e-12));
  // Zero output bias is not stored as a parameter.
  CHECK(phi.size_metrics().nonzero_count == 8);
}

TEST_CASE("psi_j and b_omega") {
  CHECK(eval1(make_psi_j(2, 1), 0.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(eval1(make_psi_j(2, 1), 0.75) == doctest::Approx(0.0));
  CHECK(eval1(make_psi_j(1, 1), 0.0) == doctest::Approx(std::exp(-1.0)));
  CHECK(eval1(make_psi_j(4, 3), 0.5) == doctest::Approx(std::exp(-4.0)));

  const auto zero = make_b_omega(3, {0, 0, 0});
  for (double t : {0.0, 0.2, 0.5, 0.9}) CHECK(eval1(zero, t) == 0.0);

  const auto one = make_b_omega(3, {1, 0, 0});
  CHECK(eval1(one, 0.0) == doctest::Approx(std::exp(-3.0)));

  const auto all = make_b_omega(5, {1, 1, 1, 1, 1});
  double sup = 0.0;
  for (int i = 0; i <= 1000; ++i) sup = std::max(sup, eval1(all, i / 1000.0));
  CHECK(sup <= std::exp(-5.0) * (1 + 1e-12));

  CHECK_THROWS_AS(make_b_omega(3, {1, 0}), ConfigError);
}

TEST_CASE("spike is an L1 pyramid") {
  const auto s2 = make_spike(2);
  CHECK(eval1(s2, 0.0) == doctest::Approx(1.0));
  CHECK(eval1(s2, 0.5) == doctest::Approx(0.5));
  CHECK(eval1(s2, -1.2) == doctest::Approx(0.0));

  const auto s3 = make_spike(3);
  CHECK(s3(Eigen::Vector2d(1.5, 0.0)) == doctest::Approx(0.0));
  CHECK(s3(Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(1.0));
  CHECK(s3(Eigen::Vector2d(0.25, -0.25)) == doctest::Approx(0.5));

  for (int d = 2; d <= 8; ++d) CHECK(make_spike(d).size_metrics().nonzero_count <= 4 * d * d);
}

TEST_CASE("sawtooth endpoints") {
  const auto saw = make_sawtooth(1);
  CHECK(eval1(saw, 0.0) == doctest::Approx(0.0));
  CHECK(eval1(saw, 0.5) == doctest::Approx(1.0));
  CHECK(eval1(saw, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  const auto saw3 = make_sawtooth(3);
  CHECK(eval1(saw3, 0.125) == doctest::Approx(1.0));
  CHECK(eval1(saw3, 0.25) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("identity network") {
  Layer<double> out{Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)};
  NetworkParams net({out});
  for (double t : {-3.0, 0.0, 2.5}) CHECK(eval1(net, t) == t);
}

TEST_CASE("forward pass matches naive recomputation") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = make_random_teacher({3, 5, 4, 6}, 100 + static_cast<std::uint64_t>(trial));
    Eigen::MatrixXd pts(3, 10);
    for (Eigen::Index c = 0; c < pts.cols(); ++c)
      for (int i = 0; i < 3; ++i) pts(i, c) = rng.uniform(-2, 2);
    const Eigen::VectorXd batch = net.evaluate_batch(pts);
    for (Eigen::Index c = 0; c < pts.cols(); ++c) {
      const double want = naive_eval(net, pts.col(c));
      CHECK(net(pts.col(c).eval()) == doctest::Approx(want).epsilon(1e-12));
      CHECK(batch(c) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("size metrics") {
  Layer<double> hidden{Eigen::MatrixXd::Zero(3, 2), Eigen::Vector3d(0.5, 0.0, -1.0)};
  Layer<double> out{Eigen::MatrixXd::Zero(1, 3), Eigen::VectorXd::Zero(1)};
  const auto m = NetworkParams({hidden, out}).size_metrics();
  CHECK(m.nonzero_count == 2);
  CHECK(m.depth == 1);
  CHECK(m.max_width == 3);

  Layer<double> single{Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Constant(1, -3.0)};
  CHECK(NetworkParams({single}).size_metrics().max_abs_param == 3.0);

  NetworkClassSpec spec{1, 3, 10, 3.0, 1.0};
  CHECK(satisfies_size_limits(spec, NetworkParams({single})));
  spec.max_abs_weight = 2.5;
  CHECK_FALSE(satisfies_size_limits(spec, NetworkParams({single})));
}

TEST_CASE("construction rejects bad shapes") {
  Layer<double> a{Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3)};
  Layer<double> b{Eigen::MatrixXd::Zero(1, 2), Eigen::VectorXd::Zero(1)};
  CHECK_THROWS_AS(NetworkParams({a, b}), DimensionError);
  Layer<double> c{Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2)};
  CHECK_THROWS_AS(NetworkParams({a, c}), DimensionError);
  Layer<double> nan{Eigen::MatrixXd::Constant(1, 2, std::nan("")), Eigen::VectorXd::Zero(1)};
  CHECK_THROWS_AS(NetworkParams({nan}), NumericalError);
  const auto net = make_random_teacher({2, 3}, 1);
  CHECK_THROWS_AS(net(Eigen::Vector3d::Zero()), DimensionError);
}

TEST_CASE("random teachers") {
  CHECK(make_random_teacher({2, 4, 3}, 5) == make_random_teacher({2, 4, 3}, 5));
  CHECK_FALSE(make_random_teacher({2, 4, 3}, 5) == make_random_teacher({2, 4, 3}, 6));

  // widths [d, 1]: one hidden unit; with d = 1 and no hidden layer, affine.
  const auto affine = make_random_teacher({2}, 3);
  CHECK(affine.layer_count() == 1);
  const Eigen::Vector2d x(0.3, 0.7), y(0.1, -0.4);
  CHECK(affine(0.5 * (x + y).eval()) == doctest::Approx(0.5 * (affine(x) + affine(y))));
}

TEST_CASE("teacher weights follow the requested distribution (KS)") {
  // Kolmogorov-Smirnov against N(0,1) and U(-1,1) on 10^4 first-layer weights.
  auto ks_pvalue = [](std::vector<double> v, auto cdf) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double dmax = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double f = cdf(v[i]);
      dmax = std::max({dmax, (i + 1) / n - f, f - i / n});
    }
    // Asymptotic Kolmogorov tail.
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * dmax;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
  };

  std::vector<double> gauss, unif;
  const auto gnet = make_random_teacher({1, 10000}, 42, WeightDistribution::Normal);
  const auto unet = make_random_teacher({1, 10000}, 42, WeightDistribution::Uniform);
  for (Eigen::Index i = 0; i < 10000; ++i) {
    gauss.push_back(gnet.layer(0).weights(i, 0));
    unif.push_back(unet.layer(0).weights(i, 0));
  }
  boost::math::normal_distribution<> nd;
  CHECK(ks_pvalue(gauss, [&](double t) { return boost::math::cdf(nd, t); }) > 0.01);
  CHECK(ks_pvalue(unif, [](double t) { return std::clamp((t + 1) / 2, 0.0, 1.0); }) > 0.01);
  // The same sample is far from the wrong target.
  CHECK(ks_pvalue(unif, [&](double t) { return boost::math::cdf(nd, t); }) < 0.01);
}

TEST_CASE("network documents") {
  const auto net = make_random_teacher({3, 4, 2}, 9);
  CHECK(deserialize(serialize(net)) == net);

  const std::string doc = serialize(net);
  CHECK_THROWS_AS(deserialize(doc.substr(0, doc.size() / 2)), ParseError);
  CHECK_THROWS_AS(deserialize(R"({"layers":[{"w":[[NaN]],"b":[0]}]})"), ParseError);
  CHECK_THROWS_AS(deserialize(R"({"layers":[{"w":[["x"]],"b":[0]}]})"), ParseError);
  CHECK_THROWS_AS(deserialize(R"({"layers":[]})"), Error);
  CHECK_THROWS_AS(deserialize(R"({"layers":[{"w":[[1,2]],"b":[0,1]}]})"), Error);
  CHECK_THROWS_AS(deserialize(R"({"nets":[]})"), ParseError);
  CHECK_THROWS_AS(load_network("/nonexistent/net.json"), Error);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.uniform() == b.uniform());
}
