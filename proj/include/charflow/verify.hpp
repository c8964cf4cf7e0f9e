// Identity-check harness: every checkable identity of the transport theory
// runs as a named, tolerance-tagged check against independently computed
// references, producing a machine-readable report.
#pragma once

#include <iosfwd>

#include "charflow/resolvent.hpp"
#include "charflow/scenario.hpp"
#include "charflow/semigroup.hpp"

namespace charflow {

struct CheckResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool passed = true;       // |residual| <= tolerance
  std::string context;      // scenario + resolution; skip reason when not run
};

// Green's formula defect:
// (||B-f||^p - ||B+f||^p) - p int sign(f) |f|^{p-1} (Tf) dmu.
CheckResult green_residual(const GridFunction& f);

// Defect of T|f|^p = p sign(f) |f|^{p-1} Tf, integrated in L^1 away from the
// zero set of f.
CheckResult chain_rule_residual(const GridFunction& f);

// Runs the full identity suite for one scenario. Individual failures are
// recorded in the report, not thrown. Deterministic for a fixed config.
std::vector<CheckResult> run_suite(const ScenarioConfig& cfg);

void write_report_csv(std::ostream& os, const std::vector<CheckResult>& results);
void write_report_text(std::ostream& os, const std::vector<CheckResult>& results);

}  // namespace charflow
