#pragma once

#include "ascpg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ascpg {

namespace detail {
inline std::string config_format(double v) {
  char buf[64];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}
}  // namespace detail

enum class Field {
  dist,
  dist_sq,
  grad_norm_sq,
  grad_norm_sq_avg,  // running mean of grad_norm_sq over recorded iterates
  tracking_err_sq,
  step_len,
  objective,
};

enum class Axis { iters, queries };

inline constexpr std::string_view to_string(Field f) {
  switch (f) {
    case Field::dist: return "dist";
    case Field::dist_sq: return "dist_sq";
    case Field::grad_norm_sq: return "grad_norm_sq";
    case Field::grad_norm_sq_avg: return "grad_norm_sq_avg";
    case Field::tracking_err_sq: return "tracking_err_sq";
    case Field::step_len: return "step_len";
    case Field::objective: return "objective";
  }
  return "?";
}

inline std::optional<Field> parse_field(std::string_view name) {
  for (Field f : {Field::dist, Field::dist_sq, Field::grad_norm_sq, Field::grad_norm_sq_avg,
                  Field::tracking_err_sq, Field::step_len, Field::objective}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

inline constexpr std::string_view to_string(Axis a) {
  return a == Axis::iters ? "iters" : "queries";
}

inline std::optional<Axis> parse_axis(std::string_view name) {
  if (name == "iters") return Axis::iters;
  if (name == "queries") return Axis::queries;
  return std::nullopt;
}

/// Pointwise mean and standard error of one traced quantity across seeds.
struct AggregateSeries {
  std::vector<double> ks;
  std::vector<double> mean;
  std::vector<double> std_error;
  std::size_t n_seeds = 0;
  Field field = Field::dist_sq;
  Axis axis = Axis::queries;
};

/// A value that cannot be log-transformed appeared inside the fit window.
class nonpositive_value_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double k_lo = 0.0;
  double k_hi = 0.0;
  std::size_t points = 0;
};

/// Values of `field` along one trace; nullopt entries where the quantity was
/// not available.
inline std::vector<std::optional<double>> field_values(const RunTrace& t, Field field) {
  std::vector<std::optional<double>> out;
  out.reserve(t.records.size());
  double running = 0.0;
  std::size_t count = 0;
  for (const auto& r : t.records) {
    switch (field) {
      case Field::dist: out.push_back(r.dist); break;
      case Field::dist_sq:
        out.push_back(r.dist ? std::optional<double>(*r.dist * *r.dist) : std::nullopt);
        break;
      case Field::grad_norm_sq: out.push_back(r.grad_norm_sq); break;
      case Field::grad_norm_sq_avg:
        if (r.grad_norm_sq) {
          running += *r.grad_norm_sq;
          ++count;
          out.push_back(running / double(count));
        } else {
          out.push_back(std::nullopt);
        }
        break;
      case Field::tracking_err_sq: out.push_back(r.tracking_err_sq); break;
      case Field::step_len: out.push_back(r.step_len); break;
      case Field::objective: out.push_back(r.objective); break;
    }
  }
  return out;
}

inline std::vector<double> axis_values(const RunTrace& t, Axis axis) {
  std::vector<double> out;
  out.reserve(t.records.size());
  for (const auto& r : t.records) {
    out.push_back(axis == Axis::iters ? double(r.k) : double(r.queries));
  }
  return out;
}

/// Mean and standard error (sample std / sqrt(n)) of `field` across traces.
/// All traces must share the same recorded grid.
inline AggregateSeries aggregate(std::span<const RunTrace> traces, Field field,
                                 Axis axis = Axis::queries) {
  if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
  AggregateSeries out;
  out.field = field;
  out.axis = axis;
  out.n_seeds = traces.size();
  out.ks = axis_values(traces[0], axis);
  const std::size_t len = out.ks.size();
  for (const auto& t : traces) {
    if (t.records.size() != len || axis_values(t, axis) != out.ks) {
      throw std::invalid_argument("aggregate: traces recorded on different grids");
    }
  }
  std::vector<std::vector<std::optional<double>>> values;
  values.reserve(traces.size());
  for (const auto& t : traces) values.push_back(field_values(t, field));

  out.mean.resize(len);
  out.std_error.resize(len);
  const double n = double(traces.size());
  for (std::size_t i = 0; i < len; ++i) {
    double sum = 0.0;
    for (const auto& v : values) {
      if (!v[i]) {
        throw std::invalid_argument("aggregate: field '" + std::string(to_string(field)) +
                                    "' not available in trace");
      }
      sum += *v[i];
    }
    const double mu = sum / n;
    double ss = 0.0;
    for (const auto& v : values) ss += (*v[i] - mu) * (*v[i] - mu);
    out.mean[i] = mu;
    out.std_error[i] = traces.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return out;
}

inline AggregateSeries aggregate(const std::vector<RunTrace>& traces, Field field,
                                 Axis axis = Axis::queries) {
  return aggregate(std::span<const RunTrace>(traces), field, axis);
}

/// Geometric upper half of the recorded axis: [sqrt(k_min * k_max), k_max].
inline std::pair<double, double> default_window(const AggregateSeries& s) {
  if (s.ks.empty()) throw std::invalid_argument("default_window: empty series");
  const double lo = s.ks.front();
  const double hi = s.ks.back();
  return {std::sqrt(std::max(lo, 1.0) * hi), hi};
}

/// Ordinary least squares of log10(mean) on log10(k) over points with
/// k in [k_lo, k_hi].
inline SlopeFit fit_slope(std::span<const double> ks, std::span<const double> values,
                          double k_lo, double k_hi) {
  if (ks.size() != values.size()) throw std::invalid_argument("fit_slope: size mismatch");
  if (!(k_lo < k_hi)) throw std::invalid_argument("fit_slope: window must satisfy lo < hi");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < k_lo || ks[i] > k_hi) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw nonpositive_value_error("fit_slope: nonpositive value " +
                                    detail::config_format(values[i]) + " at k = " +
                                    detail::config_format(ks[i]));
    }
    if (!(ks[i] > 0.0)) throw std::invalid_argument("fit_slope: nonpositive k in window");
    lx.push_back(std::log10(ks[i]));
    ly.push_back(std::log10(values[i]));
  }
  if (lx.size() < 2) throw std::invalid_argument("fit_slope: fewer than 2 points in window");
  const double n = double(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_slope: degenerate window");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  fit.k_lo = k_lo;
  fit.k_hi = k_hi;
  fit.points = lx.size();
  return fit;
}

inline SlopeFit fit_slope(const AggregateSeries& s, std::pair<double, double> window) {
  return fit_slope(s.ks, s.mean, window.first, window.second);
}

inline SlopeFit fit_slope(const AggregateSeries& s) {
  return fit_slope(s, default_window(s));
}

}  // namespace ascpg
