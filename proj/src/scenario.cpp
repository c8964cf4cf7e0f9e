#include "charflow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace charflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

ScenarioConfig base_slab() {
  ScenarioConfig cfg;
  cfg.name = "slab1d";
  cfg.domain.kind = DomainKind::interval;
  cfg.domain.membership = [](const Point& x) { return x[0] > 0.0 && x[0] < 1.0; };
  cfg.domain.bounding_box = Box{{0.0, 0.0}, {1.0, 0.0}, 1};
  cfg.field.eval = [](const Point&) { return Point{1.0, 0.0}; };
  cfg.field.lipschitz_bound = 0.0;
  cfg.field.closed_form_flow = [](const Point& x, double t) { return Point{x[0] + t, x[1]}; };
  cfg.field.divergence_free = true;
  cfg.grid = {1, 1e-3, 10.0};
  cfg.boundary.kind = "multiplicative";
  cfg.boundary.alphas = {0.5};
  return cfg;
}

ScenarioConfig base_disk() {
  ScenarioConfig cfg;
  cfg.name = "disk2d";
  cfg.domain.kind = DomainKind::disk;
  cfg.domain.membership = [](const Point& x) { return x[0] * x[0] + x[1] * x[1] < 1.0; };
  cfg.domain.bounding_box = Box{{-1.0, -1.0}, {1.0, 1.0}, 2};
  cfg.field.eval = [](const Point&) { return Point{1.0, 0.0}; };
  cfg.field.lipschitz_bound = 0.0;
  cfg.field.closed_form_flow = [](const Point& x, double t) { return Point{x[0] + t, x[1]}; };
  cfg.field.divergence_free = true;
  cfg.grid = {64, 1e-3, 10.0};
  cfg.boundary.kind = "zero";
  cfg.boundary.alphas = {0.5};
  return cfg;
}

ScenarioConfig base_rotation() {
  ScenarioConfig cfg;
  cfg.name = "rotation2d";
  cfg.domain.kind = DomainKind::annulus;
  cfg.domain.membership = [](const Point& x) {
    const double r2 = x[0] * x[0] + x[1] * x[1];
    return r2 > 1.0 && r2 < 4.0;
  };
  cfg.domain.bounding_box = Box{{-2.0, -2.0}, {2.0, 2.0}, 2};
  cfg.field.eval = [](const Point& x) { return Point{-x[1], x[0]}; };
  cfg.field.lipschitz_bound = 1.0;
  cfg.field.closed_form_flow = [](const Point& x, double t) {
    const double c = std::cos(t), s = std::sin(t);
    return Point{c * x[0] - s * x[1], s * x[0] + c * x[1]};
  };
  cfg.field.divergence_free = true;
  cfg.grid = {32, 1e-3, 10.0};
  cfg.boundary.kind = "zero";
  return cfg;
}

ScenarioConfig base_triangle() {
  ScenarioConfig cfg;
  cfg.name = "triangle_graph";
  cfg.domain.kind = DomainKind::graph_edge_set;
  // points are (arc position, edge index); three unit edges
  cfg.domain.membership = [](const Point& x) {
    return x[0] > 0.0 && x[0] < 1.0 && x[1] >= -0.5 && x[1] < 2.5;
  };
  cfg.domain.bounding_box = Box{{0.0, 0.0}, {1.0, 2.0}, 2};
  cfg.field.eval = [](const Point&) { return Point{1.0, 0.0}; };
  cfg.field.lipschitz_bound = 0.0;
  cfg.field.closed_form_flow = [](const Point& x, double t) { return Point{x[0] + t, x[1]}; };
  cfg.field.divergence_free = true;
  cfg.measure = MeasureKind::graph_atoms;
  cfg.grid = {3, 1e-3, 10.0};
  cfg.boundary.kind = "permutation";
  cfg.boundary.alphas = {1.0};
  return cfg;
}

ScenarioConfig base_linear() {
  ScenarioConfig cfg;
  cfg.name = "linear1d";
  cfg.domain.kind = DomainKind::interval;
  cfg.domain.membership = [](const Point& x) { return x[0] > 0.0 && x[0] < 1.0; };
  cfg.domain.bounding_box = Box{{0.0, 0.0}, {1.0, 0.0}, 1};
  cfg.field.eval = [](const Point& x) { return Point{x[0], 0.0}; };
  cfg.field.lipschitz_bound = 1.0;
  cfg.field.closed_form_flow = [](const Point& x, double t) {
    return Point{x[0] * std::exp(t), x[1]};
  };
  cfg.field.divergence_free = false;  // div F = 1: designed negative control
  cfg.grid = {1, 1e-3, 2.0};
  cfg.boundary.kind = "zero";
  return cfg;
}

}  // namespace

std::vector<Seed> ScenarioConfig::seeds(int n_chars) const {
  if (n_chars < 1) throw ArgumentError("n_chars must be at least 1");
  std::vector<Seed> out;
  switch (domain.kind) {
    case DomainKind::interval: {
      if (name == "linear1d") {
        // no incoming boundary: one interior (non-periodic) characteristic
        out.push_back(Seed{{0.5, 0.0}, 1.0, true, 0.0});
      } else {
        out.push_back(Seed{{0.0, 0.0}, 1.0, false, 0.0});  // atom inlet at x=0
      }
      break;
    }
    case DomainKind::disk: {
      // seeds at chord heights; |F.n| dsigma on the circle is exactly dy
      const double dy = 2.0 / n_chars;
      for (int i = 0; i < n_chars; ++i) {
        const double y = -1.0 + (i + 0.5) * dy;
        out.push_back(Seed{{-std::sqrt(std::max(0.0, 1.0 - y * y)), y}, dy, false, 0.0});
      }
      break;
    }
    case DomainKind::annulus: {
      // circular orbits seeded on the section theta = 0 with the invariant
      // weights r dr; the orbit period in arc time is 2*pi for every radius
      const double dr = 1.0 / n_chars;
      for (int i = 0; i < n_chars; ++i) {
        const double r = 1.0 + (i + 0.5) * dr;
        out.push_back(Seed{{r, 0.0}, r * dr, true, 2.0 * kPi});
      }
      break;
    }
    case DomainKind::graph_edge_set: {
      for (int e = 0; e < 3; ++e)
        out.push_back(Seed{{0.0, static_cast<double>(e)}, 1.0, false, 0.0});
      break;
    }
    case DomainKind::box:
      throw ConfigError("box domains have no built-in seeding");
  }
  return out;
}

ScenarioConfig preset(const std::string& name) {
  if (name == "slab1d") return base_slab();
  if (name == "disk2d") return base_disk();
  if (name == "rotation2d") return base_rotation();
  if (name == "triangle_graph") return base_triangle();
  if (name == "linear1d") return base_linear();
  throw ConfigError("unknown scenario preset: " + name);
}

GridPtr build_grid(const ScenarioConfig& cfg, int n_chars, double ds, double horizon) {
  GridBuildInput in;
  in.domain = cfg.domain;
  in.field = cfg.field;
  in.seeds = cfg.seeds(n_chars);
  return build_grid(in, ds, horizon);
}

BoundaryOperator make_boundary(const BoundaryConfig& bc, const CharacteristicGrid& grid) {
  const std::size_t n_in = grid.incoming_chars().size();
  const std::size_t n_out = grid.outgoing_chars().size();
  if (bc.kind == "zero") return BoundaryOperator::zero();

  if (bc.kind == "kernel") {
    if (bc.kernel_file.empty()) throw ConfigError("kernel boundary needs boundary.kernel_file");
    auto K = load_kernel(bc.kernel_file);
    if (K.size() != n_in || K[0].size() != n_out)
      throw ConfigError("kernel dimensions do not match grid boundary nodes");
    return BoundaryOperator::kernel(std::move(K));
  }

  std::vector<double> alphas = bc.alphas;
  if (alphas.size() == 1) alphas.assign(n_in, bc.alphas[0]);
  if (alphas.size() != n_in)
    throw ConfigError("boundary.alpha must broadcast to one gain per incoming node");

  std::vector<std::size_t> pairing(n_in);
  if (bc.kind == "permutation") {
    if (n_in != n_out) throw ConfigError("permutation routing needs matching boundary sides");
    for (std::size_t i = 0; i < n_in; ++i) pairing[i] = (i + n_in - 1) % n_in;  // cyclic routing
  } else if (bc.kind == "multiplicative") {
    if (!bc.pairing.empty()) {
      if (bc.pairing.size() != n_in)
        throw ConfigError("boundary.pairing must list one outgoing node per incoming node");
      for (std::size_t i = 0; i < n_in; ++i) {
        if (bc.pairing[i] < 0 || static_cast<std::size_t>(bc.pairing[i]) >= n_out)
          throw ConfigError("boundary.pairing refers to a nonexistent outgoing node");
        pairing[i] = static_cast<std::size_t>(bc.pairing[i]);
      }
    } else {
      if (n_in != n_out)
        throw ConfigError("default pairing needs matching boundary sides; set boundary.pairing");
      for (std::size_t i = 0; i < n_in; ++i) pairing[i] = i;
    }
  } else {
    throw ConfigError("unknown boundary.kind: " + bc.kind);
  }
  return BoundaryOperator::multiplicative(std::move(alphas), std::move(pairing));
}

// --- configuration text format -------------------------------------------

namespace {

struct RawConfig {
  // section -> key -> (value text, line)
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> kv;
};

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

RawConfig tokenize(const std::string& text, const std::string& origin) {
  RawConfig raw;
  std::istringstream is(text);
  std::string line, section;
  int ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(ln) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(ln) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty())
      throw ConfigError(origin + ":" + std::to_string(ln) + ": expected key = value");
    if (!raw.kv[section].emplace(key, std::make_pair(val, ln)).second)
      throw ConfigError(origin + ":" + std::to_string(ln) + ": duplicate key " + key);
  }
  return raw;
}

double parse_number(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(where + ": not a number: " + v);
  }
}

std::vector<double> parse_array(const std::string& v, const std::string& where) {
  if (v.size() < 2 || v.front() != '[' || v.back() != ']')
    throw ConfigError(where + ": expected [a, b, ...]");
  std::vector<double> out;
  std::string inner = v.substr(1, v.size() - 2);
  std::istringstream is(inner);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_number(item, where));
  }
  return out;
}

std::string parse_string(const std::string& v, const std::string& where) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  throw ConfigError(where + ": expected a quoted string");
}

void validate(const ScenarioConfig& cfg) {
  if (!(cfg.run.p > 1.0) || !std::isfinite(cfg.run.p))
    throw ConfigError("run.p must lie in the open interval (1, inf)");
  if (!(cfg.grid.ds > 0.0)) throw ConfigError("grid.ds must be positive");
  if (cfg.grid.n_chars < 1) throw ConfigError("grid.n_chars must be at least 1");
  if (cfg.grid.horizon < cfg.grid.ds) throw ConfigError("grid.horizon must be at least grid.ds");
  for (double t : cfg.run.times) {
    if (t < 0.0) throw ConfigError("run.times must be nonnegative");
    if (cfg.run.mode == EvolveMode::exact_shift) {
      const double k = t / cfg.grid.ds;
      if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k))
        throw ConfigError("run.times must be multiples of grid.ds in exact-shift mode");
    }
  }
  for (double l : cfg.run.lambdas)
    if (!(l > 0.0)) throw ConfigError("run.lambdas must be positive");
}

}  // namespace

ScenarioConfig parse_config_text(const std::string& text, const std::string& origin) {
  RawConfig raw = tokenize(text, origin);

  const auto top = raw.kv.find("");
  std::string preset_name = "slab1d";
  if (top != raw.kv.end()) {
    for (const auto& [key, vl] : top->second) {
      const std::string where = origin + ":" + std::to_string(vl.second);
      if (key == "scenario")
        preset_name = parse_string(vl.first, where);
      else
        throw ConfigError(where + ": unknown key " + key);
    }
  }
  ScenarioConfig cfg = preset(preset_name);

  for (const auto& [section, entries] : raw.kv) {
    if (section.empty()) continue;
    for (const auto& [key, vl] : entries) {
      const std::string where = origin + ":" + std::to_string(vl.second);
      const std::string& v = vl.first;
      if (section == "grid") {
        if (key == "n_chars")
          cfg.grid.n_chars = static_cast<int>(parse_number(v, where));
        else if (key == "ds")
          cfg.grid.ds = parse_number(v, where);
        else if (key == "horizon")
          cfg.grid.horizon = parse_number(v, where);
        else
          throw ConfigError(where + ": unknown key grid." + key);
      } else if (section == "boundary") {
        if (key == "kind")
          cfg.boundary.kind = parse_string(v, where);
        else if (key == "alpha")
          cfg.boundary.alphas = {parse_number(v, where)};
        else if (key == "alphas")
          cfg.boundary.alphas = parse_array(v, where);
        else if (key == "pairing") {
          cfg.boundary.pairing.clear();
          for (double x : parse_array(v, where))
            cfg.boundary.pairing.push_back(static_cast<long>(x));
        } else if (key == "kernel_file")
          cfg.boundary.kernel_file = parse_string(v, where);
        else
          throw ConfigError(where + ": unknown key boundary." + key);
      } else if (section == "run") {
        if (key == "p")
          cfg.run.p = parse_number(v, where);
        else if (key == "times")
          cfg.run.times = parse_array(v, where);
        else if (key == "lambdas")
          cfg.run.lambdas = parse_array(v, where);
        else if (key == "series_k")
          cfg.run.series_k = static_cast<int>(parse_number(v, where));
        else if (key == "seed")
          cfg.run.seed = static_cast<unsigned long>(parse_number(v, where));
        else if (key == "mode") {
          const std::string m = parse_string(v, where);
          if (m == "exact-shift")
            cfg.run.mode = EvolveMode::exact_shift;
          else if (m == "interpolating")
            cfg.run.mode = EvolveMode::interpolating;
          else
            throw ConfigError(where + ": run.mode must be exact-shift or interpolating");
        } else
          throw ConfigError(where + ": unknown key run." + key);
      } else {
        throw ConfigError(where + ": unknown section [" + section + "]");
      }
    }
  }
  validate(cfg);
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path);
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_array(const std::vector<double>& xs) {
  std::string s = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ", ";
    s += fmt(xs[i]);
  }
  return s + "]";
}

}  // namespace

std::string serialize_config(const ScenarioConfig& cfg) {
  std::ostringstream os;
  os << "scenario = \"" << cfg.name << "\"\n\n";
  os << "[grid]\n";
  os << "n_chars = " << cfg.grid.n_chars << "\n";
  os << "ds = " << fmt(cfg.grid.ds) << "\n";
  os << "horizon = " << fmt(cfg.grid.horizon) << "\n\n";
  os << "[boundary]\n";
  os << "kind = \"" << cfg.boundary.kind << "\"\n";
  os << "alphas = " << fmt_array(cfg.boundary.alphas) << "\n";
  if (!cfg.boundary.pairing.empty()) {
    std::vector<double> p(cfg.boundary.pairing.begin(), cfg.boundary.pairing.end());
    os << "pairing = " << fmt_array(p) << "\n";
  }
  if (!cfg.boundary.kernel_file.empty())
    os << "kernel_file = \"" << cfg.boundary.kernel_file << "\"\n";
  os << "\n[run]\n";
  os << "p = " << fmt(cfg.run.p) << "\n";
  os << "times = " << fmt_array(cfg.run.times) << "\n";
  os << "lambdas = " << fmt_array(cfg.run.lambdas) << "\n";
  if (cfg.run.series_k) os << "series_k = " << *cfg.run.series_k << "\n";
  os << "mode = \"" << (cfg.run.mode == EvolveMode::exact_shift ? "exact-shift" : "interpolating")
     << "\"\n";
  os << "seed = " << cfg.run.seed << "\n";
  return os.str();
}

bool same_config(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.name == b.name && a.measure == b.measure && a.grid.n_chars == b.grid.n_chars &&
         a.grid.ds == b.grid.ds && a.grid.horizon == b.grid.horizon &&
         a.boundary.kind == b.boundary.kind && a.boundary.alphas == b.boundary.alphas &&
         a.boundary.pairing == b.boundary.pairing &&
         a.boundary.kernel_file == b.boundary.kernel_file && a.run.p == b.run.p &&
         a.run.times == b.run.times && a.run.lambdas == b.run.lambdas &&
         a.run.series_k == b.run.series_k && a.run.mode == b.run.mode && a.run.seed == b.run.seed;
}

}  // namespace charflow
