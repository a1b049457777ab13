#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "tsnet/distribution.hpp"
#include "tsnet/lower_bound.hpp"
#include "tsnet/random.hpp"
#include "test_support.hpp"

using namespace tsnet;

namespace {

// The raw net taken as the teacher without any normalization.
TeacherDistribution as_is(const NetworkParams& g, Mode mode = Mode::Overlap, double tau = 0.0) {
  return TeacherDistribution(g, Box::unit(g.input_dim()), mode, tau, NormalizationReport{});
}

double exact_mean(const TeacherDistribution& dist) {
  double total = 0.0;
  for (const auto& r : dist.regions().regions) total += r.cell.integrate_affine(r.gradient, r.offset);
  return total / dist.box().volume();
}

}  // namespace

TEST_CASE("normalizing g(x) = x") {
  const auto dist = normalize_teacher(test::affine_1d(1.0, 0.0), Box::unit(1));
  for (double x : {0.0, 0.3, 0.5, 1.0}) {
    CHECK(dist.g(Eigen::VectorXd::Constant(1, x)) == doctest::Approx(1.9 * (2 * x - 1)).epsilon(1e-9));
  }
  CHECK(dist.normalization().raw_mean == doctest::Approx(0.5));
  CHECK(dist.normalization().scale == doctest::Approx(3.8));
  CHECK(std::abs(exact_mean(dist)) <= 1e-9);
}

TEST_CASE("normalization is idempotent and centres the teacher") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto raw = make_random_teacher({2, 6, 3}, seed);
    const auto once = normalize_teacher(raw, Box::unit(2));
    CHECK(std::abs(exact_mean(once)) <= 1e-6);
    CHECK(sup_norm(once.regions()) == doctest::Approx(1.9).epsilon(1e-9));
    const auto twice = normalize_teacher(once.teacher(), Box::unit(2));
    Rng rng(seed);
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector2d x(rng.uniform(), rng.uniform());
      CHECK(twice.g(x) == doctest::Approx(once.g(x)).epsilon(1e-9));
    }
    // Densities are valid and differ by g.
    const Eigen::Vector2d x(0.3, 0.6);
    CHECK(once.p(x) >= 0.0);
    CHECK(once.q(x) >= 0.0);
    CHECK(once.p(x) - once.q(x) == doctest::Approx(once.g(x)));
    CHECK(once.eta(x) >= 0.1 / 4);
    CHECK(once.eta(x) <= 1 - 0.1 / 4);
  }
  CHECK_THROWS_AS(normalize_teacher(test::affine_1d(0.0, 2.0), Box::unit(1)), ConfigError);
}

TEST_CASE("sampling") {
  const auto dist = normalize_teacher(make_random_teacher({2, 4}, 7), Box::unit(2));
  const auto a = sample(dist, 1000, 5);
  const auto b = sample(dist, 1000, 5);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK_FALSE(sample(dist, 1000, 6).x == a.x);

  // E[y] = E[g]/2 = 0 for a centred teacher.
  const auto big = sample(dist, 100000, 1);
  const double positives = (big.y.array() > 0).count();
  CHECK(std::abs(positives / 1e5 - 0.5) <= 3 * std::sqrt(0.25 / 1e5));

  // The labels follow eta: average of y g over the sample is E[g^2]/2 > 0.
  double yg = 0.0;
  for (Eigen::Index i = 0; i < 100000; ++i) yg += big.y(i) * dist.g(big.x.col(i));
  CHECK(yg > 0.0);

  const auto sep = dist.with_mode(Mode::Separable);
  CHECK(sep.tau() == doctest::Approx(0.19));
  const auto s = sample(sep, 5000, 2);
  for (Eigen::Index i = 0; i < 5000; ++i) {
    const double g = sep.g(s.x.col(i));
    CHECK(std::abs(g) > sep.tau());
    CHECK(s.y(i) == (g > 0 ? 1.0 : -1.0));
  }
  CHECK_THROWS_AS(sample(dist.with_mode(Mode::Separable, 1.899), 100, 1), Error);
}

TEST_CASE("dataset csv round trip") {
  const auto dist = normalize_teacher(make_random_teacher({2, 4}, 7), Box::unit(2));
  const auto data = sample(dist, 50, 3);
  const std::string path = "tsnet_test_dataset.csv";
  write_dataset_csv(data, path);
  const auto back = read_dataset_csv(path);
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
  {
    std::FILE* f = std::fopen(path.c_str(), "w");
    std::fputs("x_1,x_2,y\n0.1,0.2,3\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(read_dataset_csv(path), ParseError);
  std::remove(path.c_str());
}

TEST_CASE("noise profile of simple teachers") {
  const auto line = as_is(test::affine_1d(1.0, -0.5));
  const std::vector<double> grid{0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  const auto prof = noise_profile(line, grid, 0.5);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(prof.measured[i].value == doctest::Approx(2 * grid[i]));
  CHECK(prof.c == doctest::Approx(2.0));
  const auto a3 = a3_constants_analytic(line);
  CHECK(a3.c == doctest::Approx(2.0));
  CHECK(a3.T == doctest::Approx(0.5));
  CHECK(a3.k_min == doctest::Approx(1.0));
  CHECK(a3.active_pieces == 1);
  CHECK(prof.satisfies(a3.c, a3.T));

  // Slopes -2 and +2 with crossings at 1/4 and 3/4.
  const auto vee = as_is(test::hidden_layer_1d({-1.0, 0.5}, {-2.0, 4.0}, 2.5));
  const auto v3 = a3_constants_analytic(vee);
  CHECK(v3.active_pieces == 2);
  CHECK(v3.c == doctest::Approx(2.0));
  CHECK(v3.T == doctest::Approx(0.5));
  CHECK(noise_profile(vee, grid, v3.T).satisfies(v3.c, v3.T));

  const auto flat = as_is(test::affine_1d(0.0, 1.0));
  const auto fp = noise_profile(flat, {0.25, 0.5, 0.99});
  for (const auto& m : fp.measured) CHECK(m.value == 0.0);
  const auto f3 = a3_constants_analytic(flat);
  CHECK_FALSE(f3.has_active);
  CHECK(f3.c == 0.0);

  CHECK_THROWS_AS(noise_profile(line, {0.2, 0.1}), ConfigError);
}

TEST_CASE("noise profile is monotone and Monte Carlo agrees in d = 3") {
  const auto dist = normalize_teacher(make_random_teacher({2, 8}, 4), Box::unit(2));
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(0.1 * i);
  const auto prof = noise_profile(dist, grid);
  for (std::size_t i = 1; i < grid.size(); ++i) CHECK(prof.measured[i].value >= prof.measured[i - 1].value - 1e-12);

  const auto d3 = normalize_teacher(make_random_teacher({3, 4}, 4), Box::unit(3));
  const auto p3 = noise_profile(d3, {0.5, 1.0, 2.0});
  CHECK(p3.measured.back().value == doctest::Approx(1.0));
  CHECK(p3.measured[0].standard_error > 0.0);
}

TEST_CASE("excess risk") {
  const auto line = as_is(test::affine_1d(1.0, -0.5));
  CHECK(excess_risk(line, test::affine_1d(2.0, -1.0)).value == doctest::Approx(0.0).epsilon(1e-12));
  // Flipped student: (1/2) int |x - 1/2| = 1/8.
  CHECK(excess_risk(line, test::affine_1d(-1.0, 0.5)).value == doctest::Approx(0.125));
  // Threshold at 0.7: (1/2) int_{0.5}^{0.7} (x - 1/2) dx = 0.01.
  CHECK(excess_risk(line, test::affine_1d(1.0, -0.7)).value == doctest::Approx(0.01));

  const auto dist = normalize_teacher(make_random_teacher({2, 4}, 7), Box::unit(2));
  CHECK(excess_risk(dist, dist.teacher()).value == doctest::Approx(0.0).epsilon(1e-12));
  for (std::uint64_t seed : {31, 32, 33}) {
    const auto student = make_random_teacher({2, 5}, seed);
    const double exact = excess_risk(dist, student).value;
    CHECK(exact >= 0.0);
    const auto rs = population_risk_monte_carlo(dist, student, 200000);
    const auto rb = population_risk_monte_carlo(dist, dist.teacher(), 200000);
    CHECK(std::abs(exact - (rs.value - rb.value)) <= 3 * (rs.standard_error + rb.standard_error) + 1e-3);
    const auto mc = excess_risk(dist, student, {VolumeMode::MonteCarlo, 200000});
    CHECK(std::abs(mc.value - exact) <= 3 * mc.standard_error + 1e-3);
  }
  CHECK_THROWS_AS(excess_risk(dist, test::affine_1d(1.0, 0.0)), DimensionError);
}

TEST_CASE("separable excess risk") {
  const auto line = as_is(test::affine_1d(1.0, -0.5), Mode::Separable, 0.1);
  // Support [0, 0.4) and (0.6, 1]; a threshold at 0.7 mislabels (0.6, 0.7].
  CHECK(excess_risk(line, test::affine_1d(1.0, -0.7)).value == doctest::Approx(0.1 / 0.8));
  CHECK(excess_risk(line, test::affine_1d(1.0, -0.55)).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("d_pq sandwich on random interval unions") {
  const auto dist = normalize_teacher(make_random_teacher({1, 8}, 12), Box::unit(1));
  const auto a3 = a3_constants_analytic(dist);
  REQUIRE(a3.has_active);
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto A = test::random_union(rng), B = test::random_union(rng);
    const double dd = symmetric_difference_volume(A, B, dist.box()).value;
    const double dpq = d_pq(dist, A, B).value;
    CHECK(dpq <= 4 * dd + 1e-12);
    CHECK(dpq >= 0.25 * std::min(a3.T, 1 / a3.c) * dd * dd - 1e-12);
  }
  const auto A = test::random_union(rng);
  CHECK(d_pq(dist, A, A).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("lower-bound family normalizes") {
  for (int M : {2, 4}) {
    LowerBoundConfig cfg;
    cfg.M = M;
    cfg.omega.assign(static_cast<std::size_t>(M), 1);
    const LowerBoundFamily fam(cfg);
    const auto [dq, dp] = fam.normalization_defects();
    CHECK(dq <= 1e-6);
    CHECK(dp <= 1e-6);
    CHECK(fam.b1() == doctest::Approx(std::exp(-M)));
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) CHECK(fam.p(Eigen::Vector2d(i / 20.0, j / 20.0)) <= fam.c1() + 1e-12);
  }

  LowerBoundConfig cfg3;
  cfg3.d = 3;
  cfg3.M = 2;
  cfg3.omega = {1, 0, 0, 1};
  const LowerBoundFamily fam3(cfg3);
  const auto [dq3, dp3] = fam3.normalization_defects();
  CHECK(dq3 <= 1e-6);
  CHECK(dp3 <= 1e-6);
}

TEST_CASE("lower-bound Bayes set") {
  LowerBoundConfig zero;
  zero.M = 3;
  const LowerBoundFamily flat(zero);
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    CHECK(flat.in_bayes_set(x) == (x(1) <= 0.5));
  }

  LowerBoundConfig cfg;
  cfg.M = 3;
  cfg.omega = {0, 1, 1};
  const LowerBoundFamily fam(cfg);
  const auto clf = fam.bayes_classifier();
  for (int k = 0; k < 2000; ++k) {
    const Eigen::Vector2d x(rng.uniform(), rng.uniform());
    const double b = fam.b_omega(x.head(1));
    CHECK(fam.in_bayes_set(x) == (x(1) <= 0.5 + b));
    if (std::abs(x(1) - 0.5 - b) > 1e-12) CHECK((clf(x) >= 0) == fam.in_bayes_set(x));
    if (fam.in_bayes_set(x)) CHECK(fam.p(x) >= fam.q0(x));
    else CHECK(fam.p(x) <= fam.q0(x));
  }

  const auto data = fam.sample(2000, 9);
  CHECK(std::abs(static_cast<double>((data.y.array() > 0).count()) - 1000.0) <= 3 * std::sqrt(500.0));
  CHECK((data.x.array() >= 0).all());
  CHECK((data.x.array() <= 1).all());
}

TEST_CASE("b3 scales like exp(-M (1 + 1/kappa))") {
  std::vector<double> ratios;
  for (int M : {2, 4, 6}) {
    LowerBoundConfig cfg;
    cfg.M = M;
    cfg.omega.assign(static_cast<std::size_t>(M), 1);
    const LowerBoundFamily fam(cfg);
    CHECK(fam.b3() > 0.0);
    CHECK(fam.b3() <= fam.b3_bound() * (1 + 1e-9));
    ratios.push_back(fam.b3() / std::exp(-2.0 * M));
  }
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  CHECK(hi / lo <= 4.0);
}

TEST_CASE("lower-bound config errors") {
  LowerBoundConfig bad;
  bad.M = 1;
  CHECK_THROWS_AS(LowerBoundFamily{bad}, ConfigError);
  LowerBoundConfig wrong;
  wrong.omega = {1, 0, 1};
  CHECK_THROWS_AS(LowerBoundFamily{wrong}, ConfigError);
}
