// Shared primitives: points, boxes, error types, deterministic parallel loops.
#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace charflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Points live in at most two ambient coordinates. One-dimensional domains use
// x[0]; metric-graph domains use (arc position, edge index).
using Point = std::array<double, 2>;

inline Point operator+(const Point& a, const Point& b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Point operator-(const Point& a, const Point& b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Point operator*(double s, const Point& a) { return {s * a[0], s * a[1]}; }
inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm2(const Point& a) { return std::sqrt(dot(a, a)); }
inline bool finite(const Point& a) { return std::isfinite(a[0]) && std::isfinite(a[1]); }

struct Box {
  Point lo{0.0, 0.0};
  Point hi{0.0, 0.0};
  int dim = 1;

  double diameter() const {
    double d2 = 0.0;
    for (int i = 0; i < dim; ++i) d2 += (hi[i] - lo[i]) * (hi[i] - lo[i]);
    return std::sqrt(d2);
  }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim; ++i) v *= hi[i] - lo[i];
    return v;
  }
  bool contains(const Point& x) const {
    for (int i = 0; i < dim; ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
};

// Error hierarchy. Tests and the CLI distinguish these by type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ArgumentError : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct GridError : Error {
  using Error::Error;
};
// Raised when the flow integrator meets a nonfinite field value; carries the
// last valid state reached.
struct FlowError : Error {
  Point last_state;
  double last_time;
  FlowError(const std::string& what, Point state, double time)
      : Error(what), last_state(state), last_time(time) {}
};
// Raised when a series/growth criterion cannot be certified; carries the
// measured contraction factor when one was observed.
struct CriterionError : Error {
  double measured_rho;
  explicit CriterionError(const std::string& what, double rho = std::numeric_limits<double>::quiet_NaN())
      : Error(what), measured_rho(rho) {}
};

// Process-wide worker count, set once by the CLI (default serial).
int worker_count();
void set_worker_count(int n);

// Splits [0, n) into contiguous chunks, one thread per chunk. Results must be
// written to per-index slots; callers reduce serially afterwards so output is
// independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);

}  // namespace charflow
