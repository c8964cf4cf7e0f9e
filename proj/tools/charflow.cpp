// charflow command-line driver: evolve | resolvent | verify | growth-bound | norms
//
// Artifacts are CSV tables (17-significant-digit decimals, fixed column
// order) plus an optional SVG line plot for evolve; plot failures never
// affect the exit status.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "charflow/verify.hpp"

namespace fs = std::filesystem;
using namespace charflow;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_plot_svg(const fs::path& path, const std::vector<double>& xs,
                    const std::vector<double>& ys) {
  if (xs.size() < 2) return;
  const double x0 = xs.front(), x1 = xs.back();
  double y0 = ys[0], y1 = ys[0];
  for (double y : ys) {
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  if (y1 - y0 < 1e-12) y1 = y0 + 1.0;
  const double W = 640, Hgt = 400, m = 40;
  std::ofstream os(path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << Hgt << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n<polyline fill='none' stroke='steelblue' "
        "stroke-width='1.5' points='";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double px = m + (xs[i] - x0) / (x1 - x0) * (W - 2 * m);
    const double py = Hgt - m - (ys[i] - y0) / (y1 - y0) * (Hgt - 2 * m);
    os << px << ',' << py << ' ';
  }
  os << "'/>\n</svg>\n";
}

int cmd_evolve(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const GridPtr grid = build_grid(cfg);
  const BoundaryOperator H = make_boundary(cfg.boundary, *grid);
  const auto f0 = GridFunction::from_function(grid, cfg.run.p, [](const Point& x) {
    return std::sin(3.14159265358979323846 * x[0]);
  });

  std::ofstream csv(out_dir / "evolve.csv");
  csv << "time,norm_p,trace_in_lp,trace_out_lp,green_residual\n";
  std::vector<double> ts, ns;
  const bool has_traces = !grid->incoming_chars().empty() && !grid->outgoing_chars().empty();
  for (double t : cfg.run.times) {
    GridFunction ft = cfg.run.mode == EvolveMode::interpolating &&
                              H.kind() == BoundaryOperator::Kind::zero
                          ? evolve_free_interp(f0, t)
                          : evolve_full(f0, t, H);
    const double nrm = lp_norm(ft);
    double tin = 0.0, tout = 0.0, green = 0.0;
    if (has_traces) {
      tin = trace_norm(trace(ft, Side::incoming), TraceSpace::Lp);
      tout = trace_norm(trace(ft, Side::outgoing), TraceSpace::Lp);
      green = green_residual(ft).residual;
    }
    csv << num(t) << ',' << num(nrm) << ',' << num(tin) << ',' << num(tout) << ',' << num(green)
        << '\n';
    ts.push_back(t);
    ns.push_back(nrm);
  }
  try {
    write_plot_svg(out_dir / "evolve_norm.svg", ts, ns);
  } catch (...) {
    // plots are best-effort artifacts
  }
  return 0;
}

int cmd_resolvent(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const GridPtr grid = build_grid(cfg);
  const BoundaryOperator H = make_boundary(cfg.boundary, *grid);
  const auto g = GridFunction::from_function(grid, cfg.run.p, [](const Point&) { return 1.0; });
  std::ofstream csv(out_dir / "resolvent.csv");
  csv << "lambda,terms,residual,rho\n";
  for (double lambda : cfg.run.lambdas) {
    const auto [f, rep] = resolvent_apply(g, lambda, H, 1e-12);
    (void)f;
    csv << num(lambda) << ',' << rep.series_terms_used << ',' << num(rep.residual) << ','
        << num(rep.rho) << '\n';
  }
  return 0;
}

int cmd_verify(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const auto results = run_suite(cfg);
  {
    std::ofstream csv(out_dir / "verify.csv");
    write_report_csv(csv, results);
  }
  {
    std::ofstream txt(out_dir / "verify.txt");
    write_report_text(txt, results);
  }
  write_report_text(std::cout, results);
  for (const auto& r : results)
    if (!r.passed) return 1;
  return 0;
}

int cmd_growth_bound(const ScenarioConfig& cfg, const fs::path& out_dir, double delta_opt) {
  const GridPtr grid = build_grid(cfg);
  const BoundaryOperator H = make_boundary(cfg.boundary, *grid);
  const double A = operator_norm(H, *grid, cfg.run.p).value;
  double delta0 = 0.0;
  for (std::size_t i : grid->outgoing_chars())
    delta0 = std::max(delta0, grid->ch(i).length);
  const TruncationScan scan = truncation_limit(H, *grid, cfg.run.p, 0.99 * delta0, 10);

  double delta = delta_opt;
  double c_used = 0.0;
  if (delta > 0.0) {
    c_used = operator_norm(truncate(H, delta), *grid, cfg.run.p).value;
  } else {
    // largest scanned delta whose truncated norm still allows the bound
    for (const auto& [d, c] : scan.delta_norms)
      if (c < 1.0) {
        delta = d;
        c_used = c;
        break;
      }
    if (!(delta > 0.0)) throw CriterionError("no scanned delta has truncated norm below one");
  }
  const GrowthParams gp = growth_bound(A, c_used, delta);

  std::ofstream csv(out_dir / "growth_bound.csv");
  csv << "A,C,delta,M,omega\n";
  csv << num(gp.A) << ',' << num(gp.C) << ',' << num(gp.delta) << ',' << num(gp.M) << ','
      << num(gp.omega) << '\n';
  std::ofstream scan_csv(out_dir / "truncation_scan.csv");
  scan_csv << "delta,norm\n";
  for (const auto& [d, c] : scan.delta_norms) scan_csv << num(d) << ',' << num(c) << '\n';
  std::printf("A=%.12g C=%.12g delta=%.12g M=%.12g omega=%.12g\n", gp.A, gp.C, gp.delta, gp.M,
              gp.omega);
  return 0;
}

int cmd_norms(const ScenarioConfig& cfg, const fs::path& out_dir) {
  const GridPtr grid = build_grid(cfg);
  const double p = cfg.run.p;
  std::ofstream csv(out_dir / "norms.csv");
  csv << "function,side,lp,y,ytilde\n";
  const std::pair<const char*, std::function<double(const Point&)>> fns[] = {
      {"one", [](const Point&) { return 1.0; }},
      {"coordinate", [](const Point& x) { return x[0]; }},
      {"sine", [](const Point& x) { return std::sin(3.14159265358979323846 * x[0]); }}};
  for (const auto& [name, fn] : fns) {
    const auto f = GridFunction::from_function(grid, p, fn);
    for (Side side : {Side::incoming, Side::outgoing}) {
      try {
        const TraceVector t = trace(f, side);
        csv << name << ',' << (side == Side::incoming ? "incoming" : "outgoing") << ','
            << num(trace_norm(t, TraceSpace::Lp)) << ',' << num(trace_norm(t, TraceSpace::Y))
            << ',' << num(trace_norm(t, TraceSpace::Ytilde)) << '\n';
      } catch (const GridError&) {
        csv << name << ',' << (side == Side::incoming ? "incoming" : "outgoing")
            << ",nan,nan,nan\n";
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transport on characteristics: semigroups, boundary series, resolvents"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  int threads = 0;
  long seed = -1;
  double delta = 0.0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "scenario config file (omit for slab1d defaults)");
    sub->add_option("--out", out_dir, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads (env CHARFLOW_THREADS as fallback)");
    sub->add_option("--seed", seed, "override run seed");
  };
  CLI::App* evolve = app.add_subcommand("evolve", "march the semigroup over run.times");
  CLI::App* resolv = app.add_subcommand("resolvent", "apply the resolvent over run.lambdas");
  CLI::App* verify = app.add_subcommand("verify", "run the identity-check suite");
  CLI::App* growth = app.add_subcommand("growth-bound", "boundary norms and (M, omega)");
  CLI::App* norms = app.add_subcommand("norms", "trace-space norm table");
  for (CLI::App* sub : {evolve, resolv, verify, growth, norms}) add_common(sub);
  growth->add_option("--delta", delta, "truncation time for the growth bound");

  CLI11_PARSE(app, argc, argv);

  try {
    ScenarioConfig cfg = config_path.empty() ? preset("slab1d") : parse_config(config_path);
    if (seed >= 0) cfg.run.seed = static_cast<unsigned long>(seed);
    if (threads <= 0) {
      if (const char* env = std::getenv("CHARFLOW_THREADS")) threads = std::atoi(env);
    }
    set_worker_count(threads > 0 ? threads : 1);

    fs::create_directories(out_dir);
    if (*evolve) return cmd_evolve(cfg, out_dir);
    if (*resolv) return cmd_resolvent(cfg, out_dir);
    if (*verify) return cmd_verify(cfg, out_dir);
    if (*growth) return cmd_growth_bound(cfg, out_dir, delta);
    if (*norms) return cmd_norms(cfg, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
