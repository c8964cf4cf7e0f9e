#include <doctest.h>

#include <cmath>
#include <random>

#include "charflow/flow_engine.hpp"
#include "charflow/scenario.hpp"

using namespace charflow;

namespace {
const FlowParams kPrm{1e-3, 10.0, 1e-12};
}

TEST_CASE("flow map: constant field translates") {
  const auto cfg = preset("slab1d");
  CHECK(integrate_flow({0.3, 0.0}, 0.5, cfg.field, kPrm)[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(integrate_flow({0.3, 0.0}, 0.0, cfg.field, kPrm)[0] == 0.3);
}

TEST_CASE("flow map: rotation closed form and integrator agree") {
  auto cfg = preset("rotation2d");
  const Point q = integrate_flow({1.5, 0.0}, M_PI_2, cfg.field, kPrm);
  CHECK(q[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(q[1] == doctest::Approx(1.5).epsilon(1e-12));

  // numerical integration (closed form removed) matches to integrator accuracy
  VectorFieldSpec numeric = cfg.field;
  numeric.closed_form_flow = nullptr;
  const Point qn = integrate_flow({1.5, 0.0}, M_PI_2, numeric, kPrm);
  CHECK(std::abs(qn[0] - q[0]) < 1e-10);
  CHECK(std::abs(qn[1] - q[1]) < 1e-10);
}

TEST_CASE("flow map: nonfinite field reports last valid state") {
  VectorFieldSpec bad;
  bad.eval = [](const Point& x) {
    return x[0] > 0.5 ? Point{std::numeric_limits<double>::quiet_NaN(), 0.0} : Point{1.0, 0.0};
  };
  bad.lipschitz_bound = 1.0;
  CHECK_THROWS_AS(integrate_flow({0.0, 0.0}, 2.0, bad, kPrm), FlowError);
  try {
    integrate_flow({0.0, 0.0}, 2.0, bad, kPrm);
  } catch (const FlowError& e) {
    CHECK(e.last_state[0] <= 0.5 + 1e-6);
  }
}

TEST_CASE("group law holds on random samples") {
  auto cfg = preset("rotation2d");
  VectorFieldSpec numeric = cfg.field;
  numeric.closed_form_flow = nullptr;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Point x{1.2 + 0.3 * U(rng), 0.3 * U(rng)};
    const double s = U(rng), t = U(rng);
    const Point a = integrate_flow(integrate_flow(x, s, numeric, kPrm), t, numeric, kPrm);
    const Point b = integrate_flow(x, s + t, numeric, kPrm);
    CHECK(norm2(a - b) < 1e-11);  // 10x integrator tolerance
  }
}

TEST_CASE("exit times on the slab") {
  const auto cfg = preset("slab1d");
  const ExitTimes et = exit_times({0.3, 0.0}, cfg.domain, cfg.field, kPrm);
  CHECK(et.minus.value == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(et.plus.value == doctest::Approx(0.7).epsilon(1e-9));
  CHECK_FALSE(et.minus.capped);
  CHECK_FALSE(et.plus.capped);
  CHECK(et.plus.footpoint[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exit times: circular orbit never exits") {
  const auto cfg = preset("rotation2d");
  const ExitTimes et = exit_times({1.5, 0.0}, cfg.domain, cfg.field, kPrm);
  CHECK(et.minus.capped);
  CHECK(et.plus.capped);
  CHECK(et.minus.value == kPrm.horizon);
}

TEST_CASE("exit times: unit-disk chord through the center") {
  const auto cfg = preset("disk2d");
  const ExitTimes et = exit_times({0.0, 0.0}, cfg.domain, cfg.field, kPrm);
  CHECK(et.minus.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(et.plus.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exit time requires an interior point") {
  const auto cfg = preset("slab1d");
  CHECK_THROWS_AS(exit_time({1.5, 0.0}, Direction::forward, cfg.domain, cfg.field, kPrm),
                  DomainError);
}

TEST_CASE("exit-time consistency: membership flips across the footpoint") {
  const auto cfg = preset("disk2d");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-0.6, 0.6);
  for (int trial = 0; trial < 10; ++trial) {
    const Point x{U(rng), U(rng)};
    const ExitTime tm = exit_time(x, Direction::backward, cfg.domain, cfg.field, kPrm);
    const double eps = 2.0 * kPrm.bisect_tol_rel * cfg.domain.bounding_box.diameter();
    CHECK(cfg.domain.membership(integrate_flow(x, -(tm.value - eps), cfg.field, kPrm)));
    CHECK_FALSE(cfg.domain.membership(integrate_flow(x, -(tm.value + eps), cfg.field, kPrm)));
  }
}

TEST_CASE("flow shift of the forward stay time") {
  const auto cfg = preset("disk2d");
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-0.8, 0.8);
  for (int trial = 0; trial < 10; ++trial) {
    const double y = U(rng);
    const Point inlet{-std::sqrt(1.0 - y * y) + 1e-9, y};
    if (!cfg.domain.membership(inlet)) continue;
    const double tau = exit_time(inlet, Direction::forward, cfg.domain, cfg.field, kPrm).value;
    const double s = 0.4 * tau;
    const Point mid = integrate_flow(inlet, s, cfg.field, kPrm);
    const double tau_mid = exit_time(mid, Direction::forward, cfg.domain, cfg.field, kPrm).value;
    CHECK(tau_mid == doctest::Approx(tau - s).epsilon(1e-7));
  }
}

TEST_CASE("measure invariance: translation and rotation preserve, linear field does not") {
  const Box cell1{{0.25, 0.0}, {0.75, 0.0}, 1};
  CHECK(check_measure_invariance(preset("slab1d").field, cell1, 1.0, 8, kPrm) < 1e-14);

  const Box cell2{{1.05, 0.05}, {1.55, 0.45}, 2};
  CHECK(check_measure_invariance(preset("rotation2d").field, cell2, 1.0, 16, kPrm) < 1e-6);

  // div F = 1: the volume grows by e^t, residual e - 1 at t = 1
  const double res = check_measure_invariance(preset("linear1d").field, cell1, 1.0, 8, kPrm);
  CHECK(res == doctest::Approx(std::exp(1.0) - 1.0).epsilon(2e-2));
}

TEST_CASE("measure invariance rejects degenerate cells") {
  const Box degenerate{{0.5, 0.0}, {0.5, 0.0}, 1};
  CHECK_THROWS_AS(check_measure_invariance(preset("slab1d").field, degenerate, 1.0, 8, kPrm),
                  ArgumentError);
}
