// Resolvent machinery: the backward exponential integral C_lambda, its
// outgoing trace G_lambda, the boundary propagators M_lambda / Xi_lambda,
// the boundary-value solver, and the resolvent of the full transport
// operator through the geometric series in M_lambda H.
#pragma once

#include "charflow/boundary_ops.hpp"

namespace charflow {

// [C_lambda f](x) = int_0^{tau_minus(x)} f(Phi(x,-s)) exp(-lambda s) ds.
// Piecewise-linear values are integrated against the exponential exactly
// cell by cell; closed loops sum the geometric tail of repeated circuits.
GridFunction c_lambda(const GridFunction& f, double lambda);

// G_lambda f = outgoing trace of C_lambda f.
TraceVector g_lambda(const GridFunction& f, double lambda);

// M_lambda u (outgoing trace) and Xi_lambda u (grid function):
// the incoming datum u propagated along characteristics with exp(-lambda s).
std::pair<TraceVector, GridFunction> m_xi_lambda(const TraceVector& u, double lambda);

// Unique solution of (lambda - T) f = g, incoming trace u:
// f = C_lambda g + Xi_lambda u.
GridFunction solve_bvp(const GridFunction& g, const TraceVector& u, double lambda);

struct ResolventReport {
  double lambda = 0.0;
  int series_terms_used = 0;
  double residual = 0.0;  // ||(lambda - T) f - g||_p / ||g||_p, finite-difference generator
  double rho = 0.0;       // measured per-term contraction factor
  TraceVector b_plus;
  TraceVector b_minus;
};

// (lambda - T_H)^{-1} g through f = C_lambda g + Xi_lambda H sum_n (M_lambda H)^n G_lambda g.
// Requires a contraction certificate C_delta + |||H||| exp(-lambda delta) < 1
// on the scanned delta grid; throws CriterionError (with the measured rho)
// otherwise.
std::pair<GridFunction, ResolventReport> resolvent_apply(const GridFunction& g, double lambda,
                                                         const BoundaryOperator& H, double tol);

}  // namespace charflow
