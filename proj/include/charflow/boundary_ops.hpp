// Boundary operators H mapping outgoing traces to incoming traces: zero,
// multiplicative (gain + node pairing), dense kernel, and superpositions,
// together with operator norms, the short-return truncation H o chi_delta,
// and the growth-bound parameters (M, omega).
#pragma once

#include <vector>

#include "charflow/char_grid.hpp"

namespace charflow {

class BoundaryOperator {
 public:
  enum class Kind { zero, multiplicative, kernel, sum };

  static BoundaryOperator zero();
  // Incoming node i receives alpha[i] * psi(pairing[i]).
  static BoundaryOperator multiplicative(std::vector<double> alpha, std::vector<std::size_t> pairing);
  // Incoming node i receives sum_j K[i][j] w_out[j] psi(j).
  static BoundaryOperator kernel(std::vector<std::vector<double>> K);
  static BoundaryOperator sum(std::vector<BoundaryOperator> parts);

  Kind kind() const { return kind_; }
  double delta() const { return delta_; }

  // Applies chi_delta (zero out exits whose backward stay time exceeds the
  // truncation threshold) and then the operator.
  TraceVector apply(const TraceVector& outgoing) const;

  const std::vector<double>& alpha() const { return alpha_; }
  const std::vector<std::size_t>& pairing() const { return pairing_; }
  const std::vector<std::vector<double>>& matrix() const { return K_; }
  const std::vector<BoundaryOperator>& parts() const { return parts_; }

  friend BoundaryOperator truncate(const BoundaryOperator& H, double delta);

 private:
  Kind kind_ = Kind::zero;
  std::vector<double> alpha_;
  std::vector<std::size_t> pairing_;
  std::vector<std::vector<double>> K_;
  std::vector<BoundaryOperator> parts_;
  double delta_ = kInf;  // chi_delta threshold; infinity = no truncation
};

inline TraceVector apply_boundary(const BoundaryOperator& H, const TraceVector& outgoing) {
  return H.apply(outgoing);
}

// H o chi_delta: keeps only exits with backward stay time <= delta.
BoundaryOperator truncate(const BoundaryOperator& H, double delta);

struct NormEstimate {
  double value = 0.0;
  bool lower_bound_only = false;  // ascent did not converge within the cap
  int iterations = 0;
};

// Operator norm between the weighted trace spaces. Multiplicative operators
// with a pairing admit a closed form; kernels use nonlinear power iteration
// on |K| over the unit sphere (tolerance 1e-8, at most 10^4 sweeps).
NormEstimate operator_norm(const BoundaryOperator& H, const CharacteristicGrid& grid, double p);

struct GrowthParams {
  double A = 0.0;      // |||H|||
  double C = 0.0;      // estimated limsup of the truncated norms
  double delta = 1.0;
  double M = 1.0;
  double omega = 0.0;
};

// Case split for the series growth bound; requires C < 1.
GrowthParams growth_bound(double A, double C, double delta);

struct TruncationScan {
  std::vector<std::pair<double, double>> delta_norms;  // (delta, |||H chi_delta|||)
  double c_estimate = 0.0;  // max over the smallest scanned deltas
};

// ||| H chi_delta ||| over the geometric grid {delta0 / 2^k, k = 0..levels}.
TruncationScan truncation_limit(const BoundaryOperator& H, const CharacteristicGrid& grid,
                                double p, double delta0, int levels);

// Kernel matrix from a whitespace/comma-delimited text file, rows = incoming.
std::vector<std::vector<double>> load_kernel(const std::string& path);

}  // namespace charflow
