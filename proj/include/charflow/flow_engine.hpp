// Characteristic flow evaluation: the flow map of a Lipschitz field, stay
// times to the domain boundary, and a measure-invariance diagnostic.
#pragma once

#include <functional>
#include <optional>

#include "charflow/common.hpp"

namespace charflow {

enum class DomainKind { interval, box, disk, annulus, graph_edge_set };

struct DomainSpec {
  DomainKind kind = DomainKind::interval;
  std::function<bool(const Point&)> membership;
  Box bounding_box;
};

struct VectorFieldSpec {
  std::function<Point(const Point&)> eval;
  double lipschitz_bound = 0.0;
  // When present, overrides numerical integration and must agree with it.
  std::function<Point(const Point&, double)> closed_form_flow;
  bool divergence_free = true;
};

struct FlowParams {
  double step = 1e-3;          // base integrator step
  double horizon = 10.0;       // stay times are capped here
  double bisect_tol_rel = 1e-12;  // boundary bisection, relative to domain diameter
};

enum class Direction { backward, forward };  // backward = tau_minus, forward = tau_plus

// One-sided stay time. `capped` means no boundary crossing was found within
// the horizon; `value` then holds the horizon and `footpoint` the state there.
struct ExitTime {
  double value = 0.0;
  bool capped = false;
  Point footpoint{0.0, 0.0};
};

struct ExitTimes {
  ExitTime minus;  // time to leave the domain running the flow backward
  ExitTime plus;   // forward
};

// Flow map Phi(x, t); t may be negative. Fixed-step classical fourth-order
// scheme unless the field carries a closed form.
Point integrate_flow(const Point& x, double t, const VectorFieldSpec& field, const FlowParams& prm);

// Stay time from x in the given direction, located by bisection on the
// membership predicate. Requires membership(x).
ExitTime exit_time(const Point& x, Direction dir, const DomainSpec& domain,
                   const VectorFieldSpec& field, const FlowParams& prm);
ExitTimes exit_times(const Point& x, const DomainSpec& domain, const VectorFieldSpec& field,
                     const FlowParams& prm);

// Relative volume distortion |mu(T_t A) - mu(A)| / mu(A) of a cell under the
// flow, estimated from the determinant of the propagated variational equation
// averaged over sample points. Zero (to integrator tolerance) exactly when the
// flow preserves the Lebesgue measure on the cell.
double check_measure_invariance(const VectorFieldSpec& field, const Box& cell, double t,
                                int n_samples, const FlowParams& prm);

}  // namespace charflow
