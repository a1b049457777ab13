#include <doctest.h>

#include <cmath>
#include <set>
#include <string>

#include "tsnet/geometry.hpp"
#include "tsnet/random.hpp"
#include "test_support.hpp"

using namespace tsnet;

TEST_CASE("polytope basics") {
  const auto sq = Polytope::from_box(Box::unit(2));
  CHECK(sq.vertices().size() == 4);
  CHECK(sq.volume() == doctest::Approx(1.0));
  CHECK(sq.is_consistent());

  const auto split = sq.split(Eigen::Vector2d(1.0, 1.0), 1.0);
  REQUIRE(split.below);
  REQUIRE(split.above);
  CHECK(split.below->volume() == doctest::Approx(0.5));
  CHECK(split.above->vertices().size() == 3);
  CHECK(split.below->centroid().isApprox(Eigen::Vector2d(1.0 / 3, 1.0 / 3)));
  CHECK(split.below->integrate_affine(Eigen::Vector2d(1.0, 0.0), 0.0) == doctest::Approx(1.0 / 6));

  // A cut through a vertex only.
  const auto corner = sq.split(Eigen::Vector2d(1.0, 1.0), 0.0);
  CHECK_FALSE(corner.below);
  REQUIRE(corner.above);
  CHECK(corner.above->volume() == doctest::Approx(1.0));

  const auto flat = sq.split(Eigen::Vector2d::Zero(), 0.0);
  CHECK(flat.on_hyperplane);

  const auto cube = Polytope::from_box(Box::unit(3));
  const auto tet = cube.clip(Eigen::Vector3d(1, 1, 1), 1.0);
  REQUIRE(tet);
  CHECK(tet->vertices().size() == 4);
  CHECK(tet->is_consistent());
  CHECK(volume_monte_carlo(*tet, 200000).value == doctest::Approx(1.0 / 6).epsilon(0.02));
  CHECK_THROWS_AS(tet->volume(), ConfigError);
}

TEST_CASE("random cuts keep the cells consistent and volume-preserving") {
  Rng rng(3);
  std::vector<Polytope> cells{Polytope::from_box(Box::cube(2, -1, 1))};
  for (int cut = 0; cut < 12; ++cut) {
    const Eigen::Vector2d n(rng.normal(), rng.normal());
    const double o = rng.uniform(-0.8, 0.8);
    std::vector<Polytope> next;
    for (const auto& c : cells) {
      auto s = c.split(n, o);
      if (s.below) next.push_back(*s.below);
      if (s.above) next.push_back(*s.above);
    }
    cells = std::move(next);
  }
  double total = 0.0;
  for (const auto& c : cells) {
    CHECK(c.is_consistent());
    total += c.volume();
  }
  CHECK(total == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("one hidden layer d=1 with three breakpoints has four regions") {
  const auto net = test::hidden_layer_1d({0.2, 0.5, 0.8}, {1.0, -2.0, 1.5}, 0.1);
  const auto decomp = enumerate_regions(net, Box::unit(1));
  CHECK(decomp.size() == 4);
  CHECK(test::grid_pattern_count(net, Box::unit(1), 100000) == 4);
  CHECK(piece_vertices(decomp).size() == 5);
}

TEST_CASE("zero-weight network is one region") {
  Layer<double> h{Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::Zero(4)};
  Layer<double> o{Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::Constant(1, 0.3)};
  const auto decomp = enumerate_regions(NetworkParams({h, o}), Box::unit(2));
  REQUIRE(decomp.size() == 1);
  CHECK(decomp.regions[0].cell.volume() == doctest::Approx(1.0));
  CHECK(piece_vertices(decomp).size() == 4);
  CHECK(count_active_pieces(decomp) == 0);
}

TEST_CASE("sawtooth pieces") {
  CHECK(enumerate_regions(make_sawtooth(1), Box::unit(1)).size() == 2);
  for (int depth = 1; depth <= 6; ++depth) {
    const auto net = make_sawtooth(depth);
    const auto decomp = enumerate_regions(net, Box::unit(1));
    CHECK(decomp.size() >= (1u << (depth - 1)));
    if (depth <= 4) CHECK(decomp.size() == static_cast<std::size_t>(test::grid_pattern_count(net, Box::unit(1), 100000)));
  }
}

TEST_CASE("regions agree with pointwise evaluation") {
  Rng rng(8);
  for (int trial = 0; trial < 8; ++trial) {
    const auto net = make_random_teacher({2, 5, 4}, 500 + static_cast<std::uint64_t>(trial));
    const Box box = Box::cube(2, -1, 1);
    const auto decomp = enumerate_regions(net, box);
    double vol = 0.0;
    for (const auto& r : decomp.regions) vol += r.cell.volume();
    CHECK(vol == doctest::Approx(4.0).epsilon(1e-9));
    for (int k = 0; k < 300; ++k) {
      const Eigen::Vector2d x(rng.uniform(-1, 1), rng.uniform(-1, 1));
      int hits = 0;
      for (const auto& r : decomp.regions) {
        if (r.cell.contains(x, 1e-12)) {
          ++hits;
          CHECK(r.value_at(x) == doctest::Approx(net(x)).epsilon(1e-9));
        }
      }
      CHECK(hits >= 1);
    }
  }
}

TEST_CASE("active pieces") {
  CHECK(count_active_pieces(enumerate_regions(test::fig1_net(), Box::unit(1))) == 3);
  CHECK(test::grid_active_count(test::fig1_net(), 100000) == 3);
  CHECK(count_active_pieces(enumerate_regions(test::affine_1d(1.0, -0.5), Box::unit(1))) == 1);
  CHECK(count_active_pieces(enumerate_regions(test::affine_1d(0.0, 1.0), Box::unit(1))) == 0);
  // Touching zero at an endpoint does not count.
  CHECK(count_active_pieces(enumerate_regions(test::affine_1d(1.0, 0.0), Box::unit(1))) == 0);
}

TEST_CASE("shared vertices are deduplicated") {
  const auto net = test::hidden_layer_1d({0.3}, {1.0}, 0.0);
  CHECK(piece_vertices(enumerate_regions(net, Box::unit(1))).size() == 3);

  // Two units cutting the square once each: 4 cells, 9 distinct vertices.
  Layer<double> h{Eigen::Matrix2d::Identity(), Eigen::Vector2d(-0.5, -0.5)};
  Layer<double> o{Eigen::RowVector2d(1.0, 1.0), Eigen::VectorXd::Zero(1)};
  const auto decomp = enumerate_regions(NetworkParams({h, o}), Box::unit(2));
  CHECK(decomp.size() == 4);
  CHECK(piece_vertices(decomp).size() == 9);
}

TEST_CASE("decision region") {
  const auto up = decision_region(enumerate_regions(test::affine_1d(1.0, -0.5), Box::unit(1)));
  REQUIRE(up.size() == 1);
  const auto bb = up[0].bounding_box();
  CHECK(bb.lower(0) == doctest::Approx(0.5));
  CHECK(bb.upper(0) == doctest::Approx(1.0));

  CHECK(decision_region(enumerate_regions(test::affine_1d(0.0, -1.0), Box::unit(1))).empty());

  Rng rng(21);
  for (int trial = 0; trial < 3; ++trial) {
    const auto net = make_random_teacher({2, 6}, 70 + static_cast<std::uint64_t>(trial));
    const auto pieces = decision_region(enumerate_regions(net, Box::unit(2)));
    int disagreements = 0;
    for (int k = 0; k < 10000; ++k) {
      const Eigen::Vector2d x(rng.uniform(), rng.uniform());
      const double f = net(x);
      if (std::abs(f) < 1e-9) continue;
      bool inside = false;
      for (const auto& p : pieces) inside = inside || p.contains(x, 1e-12);
      disagreements += inside != (f >= 0);
    }
    CHECK(disagreements == 0);
  }
}

TEST_CASE("sup norm and class membership") {
  const auto net = test::affine_1d(3.0, -1.0);
  const auto decomp = enumerate_regions(net, Box::unit(1));
  CHECK(sup_norm(decomp) == doctest::Approx(2.0));
  CHECK(is_member({1, 1, 10, 5.0, 2.0}, net, Box::unit(1)));
  CHECK_FALSE(is_member({1, 1, 10, 5.0, 1.9}, net, Box::unit(1)));
}

TEST_CASE("symmetric difference volumes") {
  auto interval = [](double a, double b) {
    return *Polytope::from_box(Box::unit(1)).clip(Eigen::VectorXd::Constant(1, 1.0), b)->clip(
        Eigen::VectorXd::Constant(1, -1.0), -a);
  };
  const Box b1 = Box::unit(1);
  CHECK(symmetric_difference_volume({interval(0, 0.5)}, {interval(0, 0.5)}, b1).value == doctest::Approx(0.0));
  CHECK(symmetric_difference_volume({interval(0, 0.5)}, {interval(0.25, 1)}, b1).value == doctest::Approx(0.75));

  const auto sq = Polytope::from_box(Box::unit(2));
  const auto left = *sq.clip(Eigen::Vector2d(1, 0), 0.5);
  CHECK(symmetric_difference_volume({sq}, {left}, Box::unit(2)).value == doctest::Approx(0.5));
  const auto mc = symmetric_difference_volume({sq}, {left}, Box::unit(2), VolumeMode::MonteCarlo, 100000);
  CHECK(std::abs(mc.value - 0.5) <= 3 * mc.standard_error + 1e-4);
  CHECK(union_volume({left, *sq.clip(Eigen::Vector2d(-1, 0), -0.5)}).value == doctest::Approx(1.0));
}

TEST_CASE("bracket cover") {
  CHECK(bracket_grid_size(0.5) == 2);
  CHECK(bracket_cover_1d(0.5).size() <= 3);

  for (double delta : {0.5, 0.2, 0.1, 0.03}) {
    const auto cover = bracket_cover_1d(delta);
    const auto whole = find_bracket(cover, 0.0, 1.0);
    CHECK(whole.outer.contains({0.0, 1.0}));
    CHECK(whole.defect() <= 2 * delta + 1e-12);

    Rng rng(static_cast<std::uint64_t>(delta * 1000));
    for (int k = 0; k < 200; ++k) {
      double a = rng.uniform(), b = rng.uniform();
      if (a > b) std::swap(a, b);
      const auto br = find_bracket(cover, a, b);
      CHECK(br.inner.length() <= b - a + 1e-12);
      CHECK(Interval{a, b}.contains(br.inner));
      CHECK(br.outer.contains({a, b}));
      CHECK(br.defect() <= 2 * delta + 1e-12);
    }
  }

  // log(#pairs) grows like 2 log(1/delta).
  for (int k = 1; k <= 10; ++k) {
    const double delta = std::ldexp(1.0, -k);
    CHECK(std::log(static_cast<double>(bracket_cover_1d(delta).size())) <= 2 * std::log(1 / delta) + 1.0);
  }
  CHECK_THROWS_AS(bracket_cover_1d(0.0), ConfigError);
}
