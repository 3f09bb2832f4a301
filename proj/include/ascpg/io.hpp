#pragma once

#include "ascpg/config.hpp"
#include "ascpg/metrics.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace ascpg {

inline constexpr const char* kTraceHeader =
    "k,queries,dist,dist_sq,grad_norm_sq,tracking_err_sq,step_len,objective";

namespace detail {

inline void put_cell(std::ostream& os, const std::optional<double>& v) {
  if (v) os << config::format_double(*v);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(std::string(config::trim(cell)));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_cell(const std::string& cell, int line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw std::runtime_error("csv line " + std::to_string(line) + ": bad number '" + cell + "'");
  }
  return v;
}

}  // namespace detail

/// One row per record; cells for unavailable quantities are left empty.
inline void write_trace_csv(std::ostream& os, const RunTrace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    os << r.k << ',' << r.queries << ',';
    detail::put_cell(os, r.dist);
    os << ',';
    detail::put_cell(os, r.dist ? std::optional<double>(*r.dist * *r.dist) : std::nullopt);
    os << ',';
    detail::put_cell(os, r.grad_norm_sq);
    os << ',';
    detail::put_cell(os, r.tracking_err_sq);
    os << ',' << config::format_double(r.step_len) << ',';
    detail::put_cell(os, r.objective);
    os << '\n';
  }
}

inline RunTrace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || config::trim(line) != kTraceHeader) {
    throw std::runtime_error("trace csv: unexpected header");
  }
  RunTrace trace;
  int lineno = 1;
  auto opt = [&](const std::string& c) -> std::optional<double> {
    if (c.empty()) return std::nullopt;
    return detail::parse_cell(c, lineno);
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (config::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 8) {
      throw std::runtime_error("trace csv line " + std::to_string(lineno) + ": expected 8 cells");
    }
    TraceRecord r;
    r.k = static_cast<std::uint64_t>(detail::parse_cell(cells[0], lineno));
    r.queries = static_cast<std::uint64_t>(detail::parse_cell(cells[1], lineno));
    r.dist = opt(cells[2]);
    r.grad_norm_sq = opt(cells[4]);
    r.tracking_err_sq = opt(cells[5]);
    r.step_len = detail::parse_cell(cells[6], lineno);
    r.objective = opt(cells[7]);
    trace.records.push_back(r);
  }
  if (!trace.records.empty()) {
    trace.iterations = trace.records.back().k;
    trace.oracle_queries = trace.records.back().queries;
  }
  return trace;
}

/// Columns: <axis name>, mean, stderr.
inline void write_aggregate_csv(std::ostream& os, const AggregateSeries& s) {
  os << to_string(s.axis) << ",mean,stderr\n";
  for (std::size_t i = 0; i < s.ks.size(); ++i) {
    os << config::format_double(s.ks[i]) << ',' << config::format_double(s.mean[i]) << ','
       << config::format_double(s.std_error[i]) << '\n';
  }
}

/// Reads an aggregate CSV; the axis is taken from the first header cell.
inline AggregateSeries read_aggregate_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("aggregate csv: empty file");
  const auto header = detail::split_csv_line(line);
  if (header.size() != 3 || header[1] != "mean" || header[2] != "stderr") {
    throw std::runtime_error("aggregate csv: expected header '<axis>,mean,stderr'");
  }
  const auto axis = parse_axis(header[0]);
  if (!axis) throw std::runtime_error("aggregate csv: unknown axis '" + header[0] + "'");
  AggregateSeries s;
  s.axis = *axis;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (config::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3) {
      throw std::runtime_error("aggregate csv line " + std::to_string(lineno) +
                               ": expected 3 cells");
    }
    s.ks.push_back(detail::parse_cell(cells[0], lineno));
    s.mean.push_back(detail::parse_cell(cells[1], lineno));
    s.std_error.push_back(detail::parse_cell(cells[2], lineno));
  }
  return s;
}

inline void save_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_trace_csv(out, trace);
}

inline void save_aggregate_csv(const std::string& path, const AggregateSeries& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_aggregate_csv(out, s);
}

}  // namespace ascpg
