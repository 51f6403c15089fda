#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "qedlab/cost.hpp"
#include "qedlab/error.hpp"

using namespace qedlab;

namespace {

std::vector<CostSpec> catalog() {
  const Vec theta{0.5, 2.0};
  return {power_queue_cost({1.0, 1.0}, {2.0, 2.0}),
          power_queue_cost({0.5, 2.0}, {3.0, 1.5}),
          linear_queue_cost({1.0, 3.0}),
          abandonment_cost({1.0, 1.0}, theta),
          idling_cost(2),
          weighted_sum_cost({linear_queue_cost({1.0, 1.0}), idling_cost(2)})};
}

}  // namespace

TEST_CASE("eval_Ltilde examples") {
  const Vec psi{0.0, 0.0};
  CHECK(eval_Ltilde(linear_queue_cost({1.0, 1.0}), Vec{2.0, 3.0}, psi) == doctest::Approx(5.0));
  CHECK(eval_Ltilde(abandonment_cost({1.0, 1.0}, {0.5, 2.0}), Vec{2.0, 1.0}, psi) == doctest::Approx(3.0));
  CHECK(eval_Ltilde(power_queue_cost({1.0}, {2.0}), Vec{0.0}, Vec{0.0}) == 0.0);
  CHECK(eval_Ltilde(customers_in_system_cost({1.0, 2.0}), Vec{1.0, 0.0}, Vec{-2.0, 1.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(eval_Ltilde(linear_queue_cost({1.0, 1.0}), Vec{-1e-6, 0.0}, psi), Error);
  CHECK_NOTHROW(eval_Ltilde(linear_queue_cost({1.0, 1.0}), Vec{-1e-10, 0.0}, psi));
}

TEST_CASE("eval_L examples") {
  const auto lin = linear_queue_cost({1.0, 1.0});
  CHECK(eval_L(lin, Vec{-1.0, 0.5}, Vec{0.3, 0.7}) == 0.0);
  CHECK(eval_L(lin, Vec{1.0, 1.0}, Vec{0.5, 0.5}) == doctest::Approx(2.0));
  CHECK(eval_L(idling_cost(2), Vec{-1.0, -1.0}, Vec{0.5, 0.5}) == doctest::Approx(2.0));
  CHECK(eval_L(idling_cost(2), Vec{1.0, 1.0}, Vec{0.5, 0.5}) == 0.0);
  try {
    eval_L(lin, Vec{1.0, 1.0}, Vec{0.5, 0.6});
    FAIL("expected SimplexViolation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SimplexViolation);
  }
}

TEST_CASE("local_holder_bound") {
  auto b = local_holder_bound(linear_queue_cost({1.0, 1.0}), 2, 5.0);
  CHECK(b.constant == doctest::Approx(2.0));
  CHECK(b.exponent == 1.0);
  b = local_holder_bound(idling_cost(2), 2, 5.0);
  CHECK(b.constant == doctest::Approx(2.0));
  const double R = 3.0;
  b = local_holder_bound(power_queue_cost({1.0, 1.0}, {2.0, 2.0}), 2, R);
  CHECK(b.constant == doctest::Approx(2.0 * (2.0 * R) * 2.0));

  CostSpec custom;
  custom.kind = CostKind::Custom;
  custom.custom = [](std::span<const double>, std::span<const double>) { return 0.0; };
  CHECK_THROWS_AS(local_holder_bound(custom, 2, 1.0), Error);
  CHECK_THROWS_AS(local_holder_bound(weighted_sum_cost({linear_queue_cost({1.0, 1.0}), custom}), 2, 1.0), Error);

  // sampled validity on the box
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> box(-R, R);
  for (const auto& spec : catalog()) {
    const auto hb = local_holder_bound(spec, 2, R);
    for (int t = 0; t < 2000; ++t) {
      const Vec x{box(rng), box(rng)}, y{box(rng), box(rng)};
      const Vec u = fixtures::random_simplex(rng, 2);
      const double lhs = std::abs(eval_L(spec, x, u) - eval_L(spec, y, u));
      CHECK(lhs <= hb.constant * std::pow(std::hypot(x[0] - y[0], x[1] - y[1]), hb.exponent) + 1e-9);
    }
  }
}

TEST_CASE("L is independent of u when 1.x <= 0") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> box(-4.0, 4.0);
  for (const auto& spec : catalog()) {
    for (int t = 0; t < 50; ++t) {
      Vec x{box(rng), box(rng)};
      if (x[0] + x[1] > 0.0) x[1] = -x[0] - std::abs(x[1]);
      const double ref = eval_L(spec, x, fixtures::random_simplex(rng, 2));
      for (int j = 0; j < 100; ++j) CHECK(eval_L(spec, x, fixtures::random_simplex(rng, 2)) == ref);
    }
  }
}

TEST_CASE("L is convex in u, nonnegative and within its growth envelope") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> box(-6.0, 6.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& spec : catalog()) {
    for (int t = 0; t < 2000; ++t) {
      const Vec x{box(rng), box(rng)};
      const Vec u = fixtures::random_simplex(rng, 2), v = fixtures::random_simplex(rng, 2);
      const double a = unit(rng);
      const Vec w{a * u[0] + (1 - a) * v[0], a * u[1] + (1 - a) * v[1]};
      const double lw = eval_L(spec, x, w);
      CHECK(lw <= a * eval_L(spec, x, u) + (1 - a) * eval_L(spec, x, v) + 1e-12);
      CHECK(lw >= 0.0);
    }
    std::uniform_real_distribution<double> radius(0.0, 1000.0);
    for (int t = 0; t < 2000; ++t) {
      const double r = radius(rng), ang = unit(rng) * 2.0 * M_PI;
      const Vec x{r * std::cos(ang), r * std::sin(ang)};
      const double l = eval_L(spec, x, fixtures::random_simplex(rng, 2));
      CHECK(l <= spec.growth_constant * (1.0 + std::pow(r, spec.growth_degree)) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("cost metadata") {
  CHECK(power_queue_cost({1.0, 1.0}, {2.0, 2.0}).smooth_policy_expected());
  CHECK_FALSE(power_queue_cost({1.0, 1.0}, {2.0, 1.5}).smooth_policy_expected());
  CHECK_FALSE(linear_queue_cost({1.0, 1.0}).smooth_policy_expected());
  CHECK(power_queue_cost({1.0, 1.0}, {2.0, 2.0}).hash() != power_queue_cost({1.0, 2.0}, {2.0, 2.0}).hash());
  auto shifted = linear_queue_cost({1.0, 1.0});
  shifted.offset = 0.5;
  CHECK(shifted.hash() != linear_queue_cost({1.0, 1.0}).hash());
  CHECK(eval_L(shifted, Vec{-1.0, 0.0}, Vec{1.0, 0.0}) == doctest::Approx(0.5));
  CHECK(zero_cost(3).growth_degree >= 1);
}
