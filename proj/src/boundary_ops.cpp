#include "charflow/boundary_ops.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace charflow {

BoundaryOperator BoundaryOperator::zero() { return BoundaryOperator{}; }

BoundaryOperator BoundaryOperator::multiplicative(std::vector<double> alpha,
                                                  std::vector<std::size_t> pairing) {
  if (alpha.size() != pairing.size())
    throw ArgumentError("multiplicative operator needs one gain per incoming node");
  BoundaryOperator H;
  H.kind_ = Kind::multiplicative;
  H.alpha_ = std::move(alpha);
  H.pairing_ = std::move(pairing);
  return H;
}

BoundaryOperator BoundaryOperator::kernel(std::vector<std::vector<double>> K) {
  BoundaryOperator H;
  H.kind_ = Kind::kernel;
  H.K_ = std::move(K);
  return H;
}

BoundaryOperator BoundaryOperator::sum(std::vector<BoundaryOperator> parts) {
  BoundaryOperator H;
  H.kind_ = Kind::sum;
  H.parts_ = std::move(parts);
  return H;
}

BoundaryOperator truncate(const BoundaryOperator& H, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("truncation threshold must be positive");
  BoundaryOperator out = H;
  out.delta_ = std::min(out.delta_, delta);
  return out;
}

TraceVector BoundaryOperator::apply(const TraceVector& outgoing) const {
  if (outgoing.side != Side::outgoing)
    throw ArgumentError("boundary operator expects an outgoing trace");
  std::vector<double> psi = outgoing.values;
  if (std::isfinite(delta_)) {
    for (std::size_t j = 0; j < psi.size(); ++j)
      if (outgoing.stay_times[j] > delta_) psi[j] = 0.0;
  }

  TraceVector in = zero_trace(outgoing.grid, Side::incoming, outgoing.p);
  switch (kind_) {
    case Kind::zero:
      break;
    case Kind::multiplicative: {
      if (alpha_.size() != in.size())
        throw ArgumentError("multiplicative operator size does not match incoming nodes");
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (pairing_[i] >= psi.size())
          throw ArgumentError("pairing refers to a nonexistent outgoing node");
        in.values[i] = alpha_[i] * psi[pairing_[i]];
      }
      break;
    }
    case Kind::kernel: {
      if (K_.size() != in.size() || (in.size() > 0 && K_[0].size() != psi.size()))
        throw ArgumentError("kernel dimensions do not match grid boundary nodes");
      for (std::size_t i = 0; i < in.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < psi.size(); ++j)
          acc += K_[i][j] * outgoing.weights[j] * psi[j];
        in.values[i] = acc;
      }
      break;
    }
    case Kind::sum: {
      for (const auto& part : parts_) {
        // inner parts see the already truncated trace
        TraceVector masked = outgoing;
        masked.values = psi;
        TraceVector partial = part.apply(masked);
        for (std::size_t i = 0; i < in.size(); ++i) in.values[i] += partial.values[i];
      }
      break;
    }
  }
  return in;
}

namespace {

struct BoundaryLayout {
  std::vector<double> in_w, in_stay;   // incoming weights, tau_plus at inlet
  std::vector<double> out_w, out_stay; // outgoing weights, tau_minus at exit
};

BoundaryLayout layout_of(const CharacteristicGrid& grid) {
  BoundaryLayout L;
  for (std::size_t i : grid.incoming_chars()) {
    const auto& c = grid.ch(i);
    L.in_w.push_back(c.weight);
    L.in_stay.push_back(c.horizon_capped ? kInf : c.length);
  }
  for (std::size_t i : grid.outgoing_chars()) {
    const auto& c = grid.ch(i);
    L.out_w.push_back(c.weight);
    L.out_stay.push_back(c.length);
  }
  return L;
}

// chi_delta composed over nested truncations: a node survives when its
// backward stay time is within every threshold on the path.
void mask_values(const BoundaryOperator& op, const BoundaryLayout& L, std::vector<double>& psi) {
  if (!std::isfinite(op.delta())) return;
  for (std::size_t j = 0; j < psi.size(); ++j)
    if (L.out_stay[j] > op.delta()) psi[j] = 0.0;
}

// Forward action of the entrywise-modulus operator.
void modulus_apply(const BoundaryOperator& op, const BoundaryLayout& L, std::vector<double> psi,
                   std::vector<double>& res) {
  mask_values(op, L, psi);
  switch (op.kind()) {
    case BoundaryOperator::Kind::zero:
      break;
    case BoundaryOperator::Kind::multiplicative:
      for (std::size_t i = 0; i < res.size(); ++i)
        res[i] += std::abs(op.alpha()[i]) * psi[op.pairing()[i]];
      break;
    case BoundaryOperator::Kind::kernel:
      for (std::size_t i = 0; i < res.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < psi.size(); ++j)
          acc += std::abs(op.matrix()[i][j]) * L.out_w[j] * psi[j];
        res[i] += acc;
      }
      break;
    case BoundaryOperator::Kind::sum:
      for (const auto& part : op.parts()) modulus_apply(part, L, psi, res);
      break;
  }
}

// Transpose action of the entrywise-modulus operator (mask lands on output).
void modulus_apply_t(const BoundaryOperator& op, const BoundaryLayout& L,
                     const std::vector<double>& eta, std::vector<double>& zeta) {
  std::vector<double> local(zeta.size(), 0.0);
  switch (op.kind()) {
    case BoundaryOperator::Kind::zero:
      break;
    case BoundaryOperator::Kind::multiplicative:
      for (std::size_t i = 0; i < eta.size(); ++i)
        local[op.pairing()[i]] += std::abs(op.alpha()[i]) * eta[i];
      break;
    case BoundaryOperator::Kind::kernel:
      for (std::size_t i = 0; i < eta.size(); ++i)
        for (std::size_t j = 0; j < local.size(); ++j)
          local[j] += std::abs(op.matrix()[i][j]) * L.out_w[j] * eta[i];
      break;
    case BoundaryOperator::Kind::sum:
      for (const auto& part : op.parts()) modulus_apply_t(part, L, eta, local);
      break;
  }
  if (std::isfinite(op.delta()))
    for (std::size_t j = 0; j < local.size(); ++j)
      if (L.out_stay[j] > op.delta()) local[j] = 0.0;
  for (std::size_t j = 0; j < zeta.size(); ++j) zeta[j] += local[j];
}

// Closed form for multiplicative operators:
//   |||H|||^p = max_j ( sum_{i: pairing(i)=j} w_in_i |alpha_i|^p ) / w_out_j
// over admissible outgoing nodes j.
double multiplicative_norm(const BoundaryOperator& H, const BoundaryLayout& L, double p) {
  std::vector<double> mass(L.out_w.size(), 0.0);
  for (std::size_t i = 0; i < L.in_w.size(); ++i) {
    const std::size_t j = H.pairing()[i];
    mass[j] += L.in_w[i] * std::pow(std::abs(H.alpha()[i]), p);
  }
  double best = 0.0;
  for (std::size_t j = 0; j < L.out_w.size(); ++j) {
    if (L.out_stay[j] > H.delta()) continue;
    best = std::max(best, mass[j] / L.out_w[j]);
  }
  return std::pow(best, 1.0 / p);
}

}  // namespace

NormEstimate operator_norm(const BoundaryOperator& H, const CharacteristicGrid& grid, double p) {
  const BoundaryLayout L = layout_of(grid);
  if (L.in_w.empty() || L.out_w.empty())
    throw GridError("operator norm needs boundary nodes on both sides");

  if (H.kind() == BoundaryOperator::Kind::zero) return {0.0, false, 0};
  if (H.kind() == BoundaryOperator::Kind::multiplicative) {
    if (H.alpha().size() != L.in_w.size())
      throw ArgumentError("multiplicative operator size does not match incoming nodes");
    return {multiplicative_norm(H, L, p), false, 0};
  }

  // Nonlinear power iteration on the entrywise modulus over the unit L^p
  // sphere; for nonnegative kernels the ascent is monotone and the limit is
  // the norm, otherwise it is an upper envelope reported the same way.
  const double q = p / (p - 1.0);
  std::vector<double> psi(L.out_w.size(), 0.0);
  for (std::size_t j = 0; j < psi.size(); ++j) psi[j] = L.out_stay[j] <= H.delta() ? 1.0 : 0.0;

  const auto normalize = [&](std::vector<double>& v, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += w[j] * std::pow(std::abs(v[j]), p);
    const double nrm = std::pow(s, 1.0 / p);
    if (nrm > 0.0)
      for (double& x : v) x /= nrm;
    return nrm;
  };
  if (normalize(psi, L.out_w) == 0.0) return {0.0, false, 0};

  const int cap = 10000;
  const double tol = 1e-8;
  double nu_prev = 0.0;
  int it = 0;
  for (; it < cap; ++it) {
    std::vector<double> phi(L.in_w.size(), 0.0);
    modulus_apply(H, L, psi, phi);
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i)
      s += L.in_w[i] * std::pow(std::abs(phi[i]), p);
    const double nu = std::pow(s, 1.0 / p);
    if (nu == 0.0) return {0.0, false, it};

    std::vector<double> eta(phi.size());
    for (std::size_t i = 0; i < eta.size(); ++i)
      eta[i] = L.in_w[i] * std::pow(phi[i] / nu, p - 1.0);
    std::vector<double> zeta(psi.size(), 0.0);
    modulus_apply_t(H, L, eta, zeta);
    for (std::size_t j = 0; j < zeta.size(); ++j)
      psi[j] = std::pow(std::max(0.0, zeta[j]) / L.out_w[j], q - 1.0);
    if (normalize(psi, L.out_w) == 0.0) return {nu, false, it + 1};

    if (std::abs(nu - nu_prev) <= tol * std::max(1.0, nu)) return {nu, false, it + 1};
    nu_prev = nu;
  }
  return {nu_prev, true, it};
}

GrowthParams growth_bound(double A, double C, double delta) {
  if (!(C >= 0.0) || C >= 1.0)
    throw CriterionError("growth bound requires a truncated-norm limit C < 1", C);
  if (!(A >= 0.0) || !(delta > 0.0)) throw ArgumentError("growth bound needs A >= 0 and delta > 0");
  GrowthParams g;
  g.A = A;
  g.C = C;
  g.delta = delta;
  const double one_mc = 1.0 - C;
  const double rel = std::abs(A - one_mc);
  if (rel <= 1e-14 * std::max(1.0, A)) {
    g.M = 2.0 / one_mc;
    g.omega = 1.0 / delta;
  } else if (A > one_mc) {
    g.M = A * A / (one_mc * one_mc * (A + C - 1.0));
    g.omega = std::log(A / one_mc) / delta;
  } else {
    g.M = 1.0 / (1.0 - A - C);
    g.omega = 0.0;
  }
  return g;
}

TruncationScan truncation_limit(const BoundaryOperator& H, const CharacteristicGrid& grid,
                                double p, double delta0, int levels) {
  if (!(delta0 > 0.0) || levels < 1) throw ArgumentError("truncation scan needs delta0 > 0, levels >= 1");
  TruncationScan scan;
  double delta = delta0;
  for (int k = 0; k <= levels; ++k, delta *= 0.5) {
    const NormEstimate est = operator_norm(truncate(H, delta), grid, p);
    scan.delta_norms.emplace_back(delta, est.value);
  }
  // limsup estimate from the tail of the scan (smallest deltas)
  const std::size_t tail = std::min<std::size_t>(4, scan.delta_norms.size());
  double c = 0.0;
  for (std::size_t k = scan.delta_norms.size() - tail; k < scan.delta_norms.size(); ++k)
    c = std::max(c, scan.delta_norms[k].second);
  scan.c_estimate = c;
  return scan;
}

std::vector<std::vector<double>> load_kernel(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open kernel file: " + path);
  std::vector<std::vector<double>> K;
  std::string line;
  while (std::getline(is, line)) {
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) K.push_back(std::move(row));
  }
  if (K.empty()) throw ConfigError("kernel file is empty: " + path);
  for (const auto& row : K)
    if (row.size() != K[0].size()) throw ConfigError("ragged kernel matrix in " + path);
  return K;
}

}  // namespace charflow
