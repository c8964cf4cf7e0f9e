// Scenario definitions and configuration: built-in domains/fields, the
// key-value config format, and construction of grids and boundary operators
// from a parsed configuration.
#pragma once

#include <optional>
#include <string>

#include "charflow/boundary_ops.hpp"
#include "charflow/char_grid.hpp"

namespace charflow {

enum class EvolveMode { exact_shift, interpolating };

struct GridConfig {
  int n_chars = 1;
  double ds = 1e-3;
  double horizon = 10.0;
};

struct BoundaryConfig {
  std::string kind = "multiplicative";  // zero | multiplicative | permutation | kernel
  std::vector<double> alphas = {0.5};   // per incoming node (broadcast when size 1)
  std::vector<long> pairing;            // incoming -> outgoing node map; empty = same index
  std::string kernel_file;              // delimited matrix, rows = incoming nodes
};

struct RunConfig {
  double p = 2.0;
  std::vector<double> times = {0.5, 1.5, 2.5};
  std::vector<double> lambdas = {1.0, 2.0, 5.0};
  std::optional<int> series_k;
  EvolveMode mode = EvolveMode::exact_shift;
  unsigned long seed = 1234;
};

enum class MeasureKind { lebesgue, graph_atoms };

struct ScenarioConfig {
  std::string name = "slab1d";
  DomainSpec domain;
  VectorFieldSpec field;
  MeasureKind measure = MeasureKind::lebesgue;
  GridConfig grid;
  BoundaryConfig boundary;
  RunConfig run;

  // Quadrature of the incoming boundary measure, plus interior seeds for
  // components without boundary contact.
  std::vector<Seed> seeds(int n_chars) const;
};

// Built-in scenarios: slab1d, disk2d, rotation2d, triangle_graph, linear1d.
ScenarioConfig preset(const std::string& name);

ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");
std::string serialize_config(const ScenarioConfig& cfg);

// Scalar payload equality (everything the config file round-trips).
bool same_config(const ScenarioConfig& a, const ScenarioConfig& b);

GridPtr build_grid(const ScenarioConfig& cfg, int n_chars, double ds, double horizon);
inline GridPtr build_grid(const ScenarioConfig& cfg) {
  return build_grid(cfg, cfg.grid.n_chars, cfg.grid.ds, cfg.grid.horizon);
}

BoundaryOperator make_boundary(const BoundaryConfig& bc, const CharacteristicGrid& grid);

}  // namespace charflow
