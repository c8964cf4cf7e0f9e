#include <doctest.h>

#include <cmath>
#include <random>

#include "charflow/char_grid.hpp"
#include "charflow/scenario.hpp"
#include "oracles.hpp"

using namespace charflow;

namespace {

GridPtr slab_grid(double ds = 1e-3) {
  auto cfg = preset("slab1d");
  return build_grid(cfg, 1, ds, 10.0);
}

GridPtr disk_grid(int n = 64, double ds = 1e-3) {
  auto cfg = preset("disk2d");
  return build_grid(cfg, n, ds, 10.0);
}

GridPtr rotation_grid(int n = 8, double ds = 1e-3) {
  auto cfg = preset("rotation2d");
  return build_grid(cfg, n, ds, 10.0);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

TEST_CASE("grid construction: slab is a single unit characteristic") {
  const auto g = slab_grid(0.01);
  REQUIRE(g->n_characteristics() == 1);
  const auto& c = g->ch(0);
  CHECK(c.n_nodes == 101);
  CHECK(c.weight == 1.0);
  CHECK(c.length == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(c.end_gap == 0.0);
  CHECK_FALSE(c.horizon_capped);
  CHECK(g->node(0, 50)[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("grid construction: disk chords have length 2 sqrt(1-y^2)") {
  const auto g = disk_grid(64, 1e-3);
  REQUIRE(g->n_characteristics() == 64);
  for (std::size_t i = 0; i < 64; ++i) {
    const double y = g->ch(i).inlet[1];
    CHECK(g->ch(i).length == doctest::Approx(2.0 * std::sqrt(1.0 - y * y)).epsilon(1e-6));
  }
}

TEST_CASE("grid construction: rotation orbits are closed interior loops") {
  const auto g = rotation_grid(32, 1e-3);
  REQUIRE(g->n_characteristics() == 32);
  for (const auto& c : g->characteristics()) {
    CHECK(c.interior_loop);
    CHECK(c.length == doctest::Approx(2.0 * kPi).epsilon(1e-12));
    CHECK(c.ds * static_cast<double>(c.n_nodes) == doctest::Approx(c.length).epsilon(1e-12));
  }
  CHECK(g->outgoing_chars().empty());
  CHECK(g->incoming_chars().empty());
}

TEST_CASE("grid construction rejects bad arguments") {
  auto cfg = preset("slab1d");
  CHECK_THROWS_AS(build_grid(cfg, 1, -1e-3, 10.0), ArgumentError);
  CHECK_THROWS_AS(build_grid(cfg, 1, 1e-3, 1e-4), ArgumentError);
  CHECK_THROWS_AS(build_grid(cfg, 0, 1e-3, 10.0), ArgumentError);
}

TEST_CASE("lp_norm: unit function, coordinate, zero") {
  const auto g = slab_grid();
  const auto one = GridFunction::from_function(g, 2.0, [](const Point&) { return 1.0; });
  CHECK(lp_norm(one) == doctest::Approx(1.0).epsilon(1e-12));

  const auto coord = GridFunction::from_function(g, 2.0, [](const Point& x) { return x[0]; });
  CHECK(lp_norm(coord) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));

  const GridFunction zero(g, 2.0);
  CHECK(lp_norm(zero) == 0.0);
}

TEST_CASE("lp_norm matches direct quadrature on the disk (disintegration)") {
  const auto g = disk_grid(256, 1e-3);
  const auto f = GridFunction::from_function(
      g, 2.0, [](const Point& x) { return std::cos(x[0]) * (1.0 + 0.5 * x[1]); });
  // direct 2-d quadrature in polar coordinates
  const double ref = oracles::simpson(0.0, 1.0, 800, [&](double r) {
    double acc = 0.0;
    const int nth = 720;
    for (int k = 0; k < nth; ++k) {
      const double th = 2.0 * kPi * k / nth;
      const double v = std::cos(r * std::cos(th)) * (1.0 + 0.5 * r * std::sin(th));
      acc += v * v;
    }
    return r * acc * (2.0 * kPi / nth);
  });
  CHECK(std::pow(lp_norm(f), 2.0) == doctest::Approx(ref).epsilon(1e-2));
}

TEST_CASE("generator: coordinate, constants, sine") {
  const auto g = slab_grid();
  const auto coord = GridFunction::from_function(g, 2.0, [](const Point& x) { return x[0]; });
  const auto d1 = apply_generator(coord);
  for (std::size_t j = 0; j < g->ch(0).n_nodes; j += 97)
    CHECK(d1(0, j) == doctest::Approx(-1.0).epsilon(1e-9));

  const auto c = GridFunction::from_function(g, 2.0, [](const Point&) { return 4.2; });
  CHECK(lp_norm(apply_generator(c)) < 1e-11);

  const auto s = GridFunction::from_function(g, 2.0,
                                             [](const Point& x) { return std::sin(kPi * x[0]); });
  const auto ds1 = apply_generator(s);
  double worst = 0.0;
  for (std::size_t j = 0; j < g->ch(0).n_nodes; ++j) {
    const double x = g->node(0, j)[0];
    worst = std::max(worst, std::abs(ds1(0, j) + kPi * std::cos(kPi * x)));
  }
  CHECK(worst < 2e-5);  // second order in ds (one-sided ends carry the pi^3 ds^2 / 3 constant)
}

TEST_CASE("mild formulation: node differences integrate the generator") {
  const auto g = disk_grid(16, 1e-3);
  const auto f = GridFunction::from_function(
      g, 2.0, [](const Point& x) { return std::sin(x[0]) + 0.3 * x[1]; });
  const auto tf = apply_generator(f);
  for (std::size_t i = 0; i < g->n_characteristics(); i += 3) {
    const auto& c = g->ch(i);
    if (c.n_nodes < 10) continue;
    const std::size_t j1 = c.n_nodes / 4, j2 = (3 * c.n_nodes) / 4;
    double q = 0.5 * (tf(i, j1) + tf(i, j2));
    for (std::size_t j = j1 + 1; j < j2; ++j) q += tf(i, j);
    q *= c.ds;
    CHECK(std::abs(f(i, j1) - f(i, j2) - q) < 1e-6);
  }
}

TEST_CASE("traces: endpoint evaluation on the slab") {
  const auto g = slab_grid();
  const auto coord = GridFunction::from_function(g, 2.0, [](const Point& x) { return x[0]; });
  const TraceVector bm = trace(coord, Side::incoming);
  const TraceVector bp = trace(coord, Side::outgoing);
  REQUIRE(bm.size() == 1);
  REQUIRE(bp.size() == 1);
  CHECK(bm.values[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bp.values[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(bm.stay_times[0] == doctest::Approx(1.0).epsilon(1e-9));  // tau_plus at inlet
  CHECK(bp.stay_times[0] == doctest::Approx(1.0).epsilon(1e-9));  // tau_minus at exit
  const TraceVector z = trace(GridFunction(g, 2.0), Side::outgoing);
  CHECK(z.values[0] == 0.0);
}

TEST_CASE("traces: interior loops have none") {
  const auto g = rotation_grid();
  const GridFunction f(g, 2.0);
  CHECK_THROWS_AS(trace(f, Side::incoming), GridError);
  CHECK_THROWS_AS(trace(f, Side::outgoing), GridError);
}

TEST_CASE("trace norms: slab atom with unit stay time coincide; weights by min(tau,1)") {
  const auto g = slab_grid();
  const auto one = GridFunction::from_function(g, 2.0, [](const Point&) { return 1.0; });
  const TraceVector bp = trace(one, Side::outgoing);
  const double lp = trace_norm(bp, TraceSpace::Lp);
  CHECK(trace_norm(bp, TraceSpace::Y) == doctest::Approx(lp).epsilon(1e-12));
  CHECK(trace_norm(bp, TraceSpace::Ytilde) == doctest::Approx(lp).epsilon(1e-12));

  // synthetic single node with stay time 0.5, weight w, value 1, p = 2:
  // Y contribution 0.5 w, Ytilde contribution 2 w
  TraceVector t = bp;
  t.stay_times[0] = 0.5;
  t.weights[0] = 0.7;
  t.values[0] = 1.0;
  CHECK(std::pow(trace_norm(t, TraceSpace::Y), 2.0) == doctest::Approx(0.5 * 0.7).epsilon(1e-12));
  CHECK(std::pow(trace_norm(t, TraceSpace::Ytilde), 2.0) ==
        doctest::Approx(2.0 * 0.7).epsilon(1e-12));

  // capped stay times enter as infinity: min(inf, 1) = 1 in both weights
  t.stay_times[0] = std::numeric_limits<double>::infinity();
  CHECK(trace_norm(t, TraceSpace::Y) == doctest::Approx(trace_norm(t, TraceSpace::Lp)));
  CHECK(trace_norm(t, TraceSpace::Ytilde) == doctest::Approx(trace_norm(t, TraceSpace::Lp)));
}

TEST_CASE("mollifier: unit mass, truncation at the inlet, first-moment shift") {
  const double mass = oracles::unit_bump_mass();
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  const double m1 = oracles::unit_bump_first_moment();  // = 1/2 for this bump

  const auto g = slab_grid();
  const auto one = GridFunction::from_function(g, 2.0, [](const Point&) { return 1.0; });
  const auto mo = mollify(one, 100);
  CHECK(mo(0, 500) == doctest::Approx(1.0).epsilon(1e-12));  // tau_minus = 0.5 >= 1/100
  CHECK(mo(0, 0) == 0.0);                                    // inlet: empty integral

  const auto coord = GridFunction::from_function(g, 2.0, [](const Point& x) { return x[0]; });
  const auto mc = mollify(coord, 100);
  CHECK(mc(0, 500) == doctest::Approx(0.5 - m1 / 100.0).epsilon(1e-10));
}

TEST_CASE("mollifier: resolution guard") {
  const auto g = slab_grid(1e-3);
  const auto one = GridFunction::from_function(g, 2.0, [](const Point&) { return 1.0; });
  CHECK_THROWS_AS(mollify(one, 2000), GridError);
  CHECK_NOTHROW(mollify(one, 1000));
}

TEST_CASE("mollifier: contraction and convergence") {
  const auto g = slab_grid();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double a1 = U(rng), a2 = U(rng), a3 = U(rng);
  const auto f = GridFunction::from_function(g, 2.0, [&](const Point& x) {
    return a1 * std::sin(kPi * x[0]) + a2 * std::sin(2 * kPi * x[0]) +
           a3 * std::sin(3 * kPi * x[0]);
  });
  const double base = lp_norm(f);
  double prev_err = 1e9;
  for (int n : {16, 64, 256}) {
    const auto m = mollify(f, n);
    CHECK(lp_norm(m) <= base + 1e-10);
    const double err = lp_norm(m - f);
    CHECK(err < prev_err);
    prev_err = err;
  }
  // Lipschitz profile: error below 1e-3 by n = 256
  const auto lip = GridFunction::from_function(
      g, 2.0, [](const Point& x) { return 0.4 * std::min(x[0], 1.0 - x[0]); });
  CHECK(lp_norm(mollify(lip, 256) - lip) < 1e-3);
}

TEST_CASE("mollifier commutes with the generator up to discretization") {
  const auto g = slab_grid();
  const auto f = GridFunction::from_function(g, 2.0, [](const Point& x) {
    const double w = (x[0] - 0.25) * (0.75 - x[0]);
    return w > 0.0 ? std::pow(16.0 * w, 4.0) : 0.0;
  });
  const auto lhs = apply_generator(mollify(f, 64));
  const auto rhs = mollify(apply_generator(f), 64);
  CHECK(lp_norm(lhs - rhs) < 1e-3);
}

TEST_CASE("lift: slab closed form and trace contract") {
  const auto g = slab_grid();
  TraceVector h = zero_trace(g, Side::outgoing, 2.0);
  h.values[0] = 1.0;
  const GridFunction f = lift_outgoing_trace(h);
  // finite-sum branch: f(x) = x e^{-(1-x)} on the unit slab
  for (std::size_t j = 0; j < g->ch(0).n_nodes; j += 211) {
    const double x = g->node(0, j)[0];
    CHECK(f(0, j) == doctest::Approx(x * std::exp(-(1.0 - x))).epsilon(1e-9));
  }
  CHECK(trace(f, Side::incoming).values[0] == 0.0);
  CHECK(trace(f, Side::outgoing).values[0] == doctest::Approx(1.0).epsilon(1e-9));

  // graph-norm bound ||f|| + ||Tf|| <= 3 ||h||_Ytilde plus discretization slack
  const double nf = lp_norm(f) + lp_norm(apply_generator(f));
  CHECK(nf <= 3.0 * trace_norm(h, TraceSpace::Ytilde) + 1e-6);

  // zero trace lifts to zero
  TraceVector hz = zero_trace(g, Side::outgoing, 2.0);
  CHECK(lp_norm(lift_outgoing_trace(hz)) == 0.0);
}

TEST_CASE("lift: capped forward stay time takes the zero branch") {
  // half line: interval scenario with far right end, horizon-capped
  auto cfg = preset("slab1d");
  cfg.domain.membership = [](const Point& x) { return x[0] > 0.0 && x[0] < 1e9; };
  cfg.domain.bounding_box = Box{{0.0, 0.0}, {1e9, 0.0}, 1};
  const auto g = build_grid(cfg, 1, 1e-3, 2.0);
  REQUIRE(g->ch(0).horizon_capped);
  CHECK(g->outgoing_chars().empty());
  TraceVector h = zero_trace(g, Side::outgoing, 2.0);  // empty layout
  CHECK(h.size() == 0);
  CHECK(lp_norm(lift_outgoing_trace(h)) == 0.0);
}

TEST_CASE("compatibility defect on the slab") {
  const auto g = slab_grid();
  TraceVector psi_m = zero_trace(g, Side::incoming, 2.0);
  TraceVector psi_p = zero_trace(g, Side::outgoing, 2.0);
  psi_m.values[0] = 1.0;
  psi_p.values[0] = std::exp(-1.0);
  CHECK(compatibility_defect(psi_p, psi_m, 1.0) == doctest::Approx(0.0).epsilon(1e-9));

  psi_p.values[0] = 0.0;
  CHECK(compatibility_defect(psi_p, psi_m, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-9));

  // psi_minus = 0: defect equals the Ytilde norm of psi_plus
  TraceVector z = zero_trace(g, Side::incoming, 2.0);
  psi_p.values[0] = 0.7;
  CHECK(compatibility_defect(psi_p, z, 2.0) ==
        doctest::Approx(trace_norm(psi_p, TraceSpace::Ytilde)).epsilon(1e-12));

  CHECK(pair_space_norm(psi_p, psi_m) > 0.0);
  CHECK_THROWS_AS(compatibility_defect(psi_p, psi_m, -1.0), ArgumentError);
}

TEST_CASE("pair-space norm of a compatible slab pair") {
  const auto g = slab_grid();
  TraceVector psi_m = zero_trace(g, Side::incoming, 2.0);
  TraceVector psi_p = zero_trace(g, Side::outgoing, 2.0);
  psi_m.values[0] = 1.0;
  psi_p.values[0] = std::exp(-1.0);  // exactly the propagated datum at lambda = 1
  const double want = std::sqrt(1.0 + std::exp(-2.0));  // defect term vanishes
  CHECK(pair_space_norm(psi_p, psi_m) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("lp_norm at exponents other than two") {
  const auto g = slab_grid();
  const auto one = GridFunction::from_function(g, 3.0, [](const Point&) { return 1.0; });
  CHECK(lp_norm(one) == doctest::Approx(1.0).epsilon(1e-12));
  const auto coord = GridFunction::from_function(g, 3.0, [](const Point& x) { return x[0]; });
  CHECK(lp_norm(coord) == doctest::Approx(std::pow(0.25, 1.0 / 3.0)).epsilon(1e-6));
}

TEST_CASE("trace inequality with stay-time weights") {
  const auto g = disk_grid(32, 1e-3);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double a = U(rng), b = U(rng);
    const auto f = GridFunction::from_function(
        g, 2.0, [&](const Point& x) { return a * std::cos(x[0]) + b * x[1] + 0.2; });
    const auto tf = apply_generator(f);
    const double rhs = 2.0 * (std::pow(lp_norm(f), 2.0) + std::pow(lp_norm(tf), 2.0));
    for (Side side : {Side::incoming, Side::outgoing}) {
      const double lhs = std::pow(trace_norm(trace(f, side), TraceSpace::Y), 2.0);
      CHECK(lhs <= rhs + 1e-6);
    }
  }
}

TEST_CASE("green formula on slab: f(x) = x gives both sides -1") {
  const auto g = slab_grid();
  const auto f = GridFunction::from_function(g, 2.0, [](const Point& x) { return x[0]; });
  const auto tf = apply_generator(f);
  GridFunction integrand(g, 2.0);
  for (std::size_t j = 0; j < g->ch(0).n_nodes; ++j)
    integrand.at(0, j) =
        (f(0, j) > 0 ? 1.0 : (f(0, j) < 0 ? -1.0 : 0.0)) * std::abs(f(0, j)) * tf(0, j);
  const double rhs = 2.0 * integral(integrand);
  const double lhs = std::pow(trace_norm(trace(f, Side::incoming), TraceSpace::Lp), 2.0) -
                     std::pow(trace_norm(trace(f, Side::outgoing), TraceSpace::Lp), 2.0);
  CHECK(lhs == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(rhs == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(std::abs(lhs - rhs) < 1e-4);
}

TEST_CASE("exponent validation") {
  const auto g = slab_grid(0.01);
  CHECK_THROWS_AS(GridFunction(g, 1.0), ArgumentError);
  CHECK_THROWS_AS(GridFunction(g, 0.5), ArgumentError);
  CHECK_NOTHROW(GridFunction(g, 1.5));
}
