// Characteristic-coordinate discretization of (Omega, mu): weighted
// characteristics seeded on the incoming boundary (or on a transversal
// section for closed orbits), with function representation, L^p norms,
// the transport generator, traces, trace-space norms, mollification and
// trace lifting on top of it.
#pragma once

#include <memory>
#include <span>
#include <vector>

#include "charflow/flow_engine.hpp"

namespace charflow {

struct Characteristic {
  Point inlet{0.0, 0.0};   // seed: on the incoming boundary, or on a section for loops
  double weight = 1.0;     // incoming-measure quadrature weight, > 0
  double ds = 0.0;         // arc-time step (grid ds; loops may adjust to close the orbit)
  double length = 0.0;     // forward stay time from the seed, capped at the horizon
  std::size_t n_nodes = 0; // nodes at arc times j*ds, j = 0..n_nodes-1
  double end_gap = 0.0;    // length - (n_nodes-1)*ds in [0, ds); loops: 0 by construction
  bool interior_loop = false;
  bool horizon_capped = false;  // forward stay time hit the horizon (no exit node)
  Point exit_point{0.0, 0.0};   // valid when a genuine exit exists
  std::size_t offset = 0;       // first node index in flat per-grid arrays
};

// Seed description handed over by a scenario.
struct Seed {
  Point at{0.0, 0.0};
  double weight = 1.0;
  bool interior = false;
  double loop_period = 0.0;  // > 0 when the orbit period is known
};

class CharacteristicGrid {
 public:
  CharacteristicGrid(std::vector<Characteristic> chars, std::vector<Point> nodes, double ds,
                     double horizon)
      : chars_(std::move(chars)), nodes_(std::move(nodes)), ds_(ds), horizon_(horizon) {
    incoming_.reserve(chars_.size());
    outgoing_.reserve(chars_.size());
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      if (!chars_[i].interior_loop) incoming_.push_back(i);
      if (!chars_[i].interior_loop && !chars_[i].horizon_capped) outgoing_.push_back(i);
    }
  }

  const std::vector<Characteristic>& characteristics() const { return chars_; }
  const Characteristic& ch(std::size_t i) const { return chars_[i]; }
  std::size_t n_characteristics() const { return chars_.size(); }
  std::size_t n_nodes() const { return nodes_.size(); }
  double ds() const { return ds_; }
  double horizon() const { return horizon_; }
  const Point& node(std::size_t i, std::size_t j) const { return nodes_[chars_[i].offset + j]; }

  // Characteristic indices owning an incoming / outgoing boundary node.
  const std::vector<std::size_t>& incoming_chars() const { return incoming_; }
  const std::vector<std::size_t>& outgoing_chars() const { return outgoing_; }

  // Stay times at node (i, j). tau_minus is the backward stay time (arc
  // position for boundary-seeded characteristics, infinity on loops);
  // tau_plus is the remaining forward time (infinity when capped).
  double tau_minus(std::size_t i, std::size_t j) const {
    return chars_[i].interior_loop ? kInf : static_cast<double>(j) * chars_[i].ds;
  }
  double tau_plus(std::size_t i, std::size_t j) const {
    const auto& c = chars_[i];
    if (c.interior_loop || c.horizon_capped) return kInf;
    return c.length - static_cast<double>(j) * c.ds;
  }

 private:
  std::vector<Characteristic> chars_;
  std::vector<Point> nodes_;
  double ds_;
  double horizon_;
  std::vector<std::size_t> incoming_;
  std::vector<std::size_t> outgoing_;
};

using GridPtr = std::shared_ptr<const CharacteristicGrid>;

// A function on Omega represented by its node values; carries the exponent p.
class GridFunction {
 public:
  GridFunction(GridPtr grid, double p);
  GridFunction(GridPtr grid, double p, std::vector<double> values);
  static GridFunction from_function(GridPtr grid, double p,
                                    const std::function<double(const Point&)>& fn);

  const GridPtr& grid() const { return grid_; }
  double p() const { return p_; }
  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }
  std::span<const double> char_values(std::size_t i) const {
    return std::span<const double>(v_).subspan(grid_->ch(i).offset, grid_->ch(i).n_nodes);
  }
  std::span<double> char_values(std::size_t i) {
    return std::span<double>(v_).subspan(grid_->ch(i).offset, grid_->ch(i).n_nodes);
  }
  double operator()(std::size_t i, std::size_t j) const { return v_[grid_->ch(i).offset + j]; }
  double& at(std::size_t i, std::size_t j) { return v_[grid_->ch(i).offset + j]; }

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

 private:
  GridPtr grid_;
  double p_;
  std::vector<double> v_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);

enum class Side { incoming, outgoing };
enum class TraceSpace { Lp, Y, Ytilde };

// A function on one side of the boundary at the grid's boundary nodes, with
// quadrature weights and the opposite-side stay time used by weighted norms.
struct TraceVector {
  Side side = Side::incoming;
  std::vector<double> values;
  std::vector<double> weights;
  std::vector<double> stay_times;        // stay time of the opposite side; +inf when capped
  std::vector<std::size_t> char_index;   // owning characteristic per node
  GridPtr grid;
  double p = 2.0;

  std::size_t size() const { return values.size(); }
};

// Zero trace of the requested side with the grid's boundary layout.
TraceVector zero_trace(const GridPtr& grid, Side side, double p);

// --- operations ---------------------------------------------------------

// Traces every seed with the flow engine. Boundary seeds run forward until
// the exit (or the horizon); interior seeds with a known orbit period get a
// closed loop whose step is adjusted so the window tiles the orbit exactly.
struct GridBuildInput {
  DomainSpec domain;
  VectorFieldSpec field;
  std::vector<Seed> seeds;
};
GridPtr build_grid(const GridBuildInput& in, double ds, double horizon);

// (sum_i w_i int_0^{L_i} |f|^p ds)^{1/p}, trapezoid along each characteristic
// with the partial end cell included; closed loops use the periodic rule.
double lp_norm(const GridFunction& f);

// int_Omega u dmu with the same quadrature (signed).
double integral(const GridFunction& u);

// Transport generator: minus the derivative of node values along arc time.
// Centered in the interior, one-sided second order at the ends, cyclic on
// loops. Characteristics that cannot support a difference stencil raise
// GridError.
GridFunction apply_generator(const GridFunction& f);

// Boundary traces. Incoming trace reads node 0; outgoing extrapolates the
// last cell to the exact exit point (first order).
TraceVector trace(const GridFunction& f, Side side);

double trace_norm(const TraceVector& t, TraceSpace space);

// Mollification along characteristics against the polynomial bump
// rho_n(s) = 30 n (ns)^2 (1-ns)^2 on [0, 1/n], truncated at the backward
// stay time. Requires 1/n >= ds.
GridFunction mollify(const GridFunction& f, int n);

// Explicit lift of an outgoing trace h to a grid function f with zero
// incoming trace and outgoing trace h.
GridFunction lift_outgoing_trace(const TraceVector& h);

// || psi_plus - M_lambda psi_minus || in the (1-p)-weighted outgoing space.
double compatibility_defect(const TraceVector& psi_plus, const TraceVector& psi_minus,
                            double lambda);

// Norm of the compatible-pair space: p-th root of
// ||psi+||_Y^p + ||psi-||_Y^p + ||psi+ - M_1 psi-||_Ytilde^p.
double pair_space_norm(const TraceVector& psi_plus, const TraceVector& psi_minus);

}  // namespace charflow
