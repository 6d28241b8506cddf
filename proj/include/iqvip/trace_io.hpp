#pragma once

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "iqvip/dynamics.hpp"
#include "iqvip/solvers.hpp"
#include "iqvip/types.hpp"

namespace iqvip {

// CSV trace files: one header line, full-precision decimal floats so that
// regression tests can diff runs byte-for-byte.

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace detail

/// Header: n,x1..xd,residual[,error]; the error column is present exactly
/// when the trace carries distance-to-solution data.
inline void write_iter_trace_csv(std::ostream& out,
                                 const IterTrace<double>& trace) {
  if (trace.iterates.empty()) return;
  const auto dim = trace.iterates.front().x.size();
  const bool with_error = trace.iterates.front().v.has_value();
  out << "n";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << (i + 1);
  out << ",residual";
  if (with_error) out << ",error";
  out << "\n";
  for (const auto& rec : trace.iterates) {
    out << rec.n;
    for (Eigen::Index i = 0; i < dim; ++i)
      out << "," << detail::format_number(rec.x[i]);
    out << "," << detail::format_number(rec.residual);
    if (with_error) out << "," << detail::format_number(std::sqrt(*rec.v));
    out << "\n";
  }
}

inline IterTrace<double> read_iter_trace_csv(std::istream& in) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)),
                  "read_iter_trace_csv: missing header");
  const auto header = detail::split_csv_line(line);
  detail::require(header.size() >= 3 && header[0] == "n",
                  "read_iter_trace_csv: unexpected header");
  const bool with_error = header.back() == "error";
  const auto dim =
      static_cast<Eigen::Index>(header.size() - 2 - (with_error ? 1 : 0));
  IterTrace<double> trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    detail::require(fields.size() == header.size(),
                    "read_iter_trace_csv: ragged row");
    IterRecord<double> rec;
    rec.n = std::stoi(fields[0]);
    rec.x.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) rec.x[i] = std::stod(fields[1 + i]);
    rec.residual = std::stod(fields[1 + dim]);
    if (with_error) {
      const double e = std::stod(fields[2 + dim]);
      rec.v = e * e;
    }
    trace.iterates.push_back(std::move(rec));
  }
  trace.steps_used = trace.iterates.empty() ? 0 : trace.iterates.back().n;
  return trace;
}

/// Header: t,x1..xd,residual[,dist]. The residual column is filled by the
/// caller (it is not part of TrajectoryTrace) via `residuals`.
inline void write_trajectory_csv(std::ostream& out,
                                 const TrajectoryTrace<double>& trace,
                                 const std::vector<double>& residuals) {
  if (trace.samples.empty()) return;
  detail::require(residuals.size() == trace.samples.size(),
                  "write_trajectory_csv: residual column size mismatch");
  const auto dim = trace.samples.front().x.size();
  const bool with_dist = !trace.dist.empty();
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << (i + 1);
  out << ",residual";
  if (with_dist) out << ",dist";
  out << "\n";
  for (std::size_t k = 0; k < trace.samples.size(); ++k) {
    const auto& s = trace.samples[k];
    out << detail::format_number(s.t);
    for (Eigen::Index i = 0; i < dim; ++i)
      out << "," << detail::format_number(s.x[i]);
    out << "," << detail::format_number(residuals[k]);
    if (with_dist) out << "," << detail::format_number(trace.dist[k]);
    out << "\n";
  }
}

struct TrajectoryCsv {
  TrajectoryTrace<double> trace;
  std::vector<double> residuals;
};

inline TrajectoryCsv read_trajectory_csv(std::istream& in) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)),
                  "read_trajectory_csv: missing header");
  const auto header = detail::split_csv_line(line);
  detail::require(header.size() >= 3 && header[0] == "t",
                  "read_trajectory_csv: unexpected header");
  const bool with_dist = header.back() == "dist";
  const auto dim =
      static_cast<Eigen::Index>(header.size() - 2 - (with_dist ? 1 : 0));
  TrajectoryCsv out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    detail::require(fields.size() == header.size(),
                    "read_trajectory_csv: ragged row");
    TrajectorySample<double> s;
    s.t = std::stod(fields[0]);
    s.x.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) s.x[i] = std::stod(fields[1 + i]);
    s.v = VectorXd::Zero(dim);  // velocities are not serialized
    out.trace.samples.push_back(std::move(s));
    out.residuals.push_back(std::stod(fields[1 + dim]));
    if (with_dist) {
      const double d = std::stod(fields[2 + dim]);
      out.trace.dist.push_back(d);
      out.trace.half_sq.push_back(0.5 * d * d);
    }
  }
  return out;
}

struct TrafficCsv {
  IterTrace<double> trace;
  std::vector<VectorXd> flows;
};

/// Traffic trace header: n,x1..xk,V1..Vk,residual (k = controlled links).
inline void write_traffic_trace_csv(std::ostream& out,
                                    const IterTrace<double>& trace,
                                    const std::vector<VectorXd>& flows) {
  if (trace.iterates.empty()) return;
  detail::require(flows.size() == trace.iterates.size(),
                  "write_traffic_trace_csv: flow column size mismatch");
  const auto dim = trace.iterates.front().x.size();
  out << "n";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << (i + 1);
  for (Eigen::Index i = 0; i < dim; ++i) out << ",V" << (i + 1);
  out << ",residual\n";
  for (std::size_t k = 0; k < trace.iterates.size(); ++k) {
    const auto& rec = trace.iterates[k];
    out << rec.n;
    for (Eigen::Index i = 0; i < dim; ++i)
      out << "," << detail::format_number(rec.x[i]);
    for (Eigen::Index i = 0; i < dim; ++i)
      out << "," << detail::format_number(flows[k][i]);
    out << "," << detail::format_number(rec.residual) << "\n";
  }
}

inline TrafficCsv read_traffic_trace_csv(std::istream& in) {
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)),
                  "read_traffic_trace_csv: missing header");
  const auto header = detail::split_csv_line(line);
  detail::require(header.size() >= 4 && header[0] == "n" &&
                      header.back() == "residual" && header.size() % 2 == 0,
                  "read_traffic_trace_csv: unexpected header");
  const auto dim = static_cast<Eigen::Index>((header.size() - 2) / 2);
  TrafficCsv out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    detail::require(fields.size() == header.size(),
                    "read_traffic_trace_csv: ragged row");
    IterRecord<double> rec;
    rec.n = std::stoi(fields[0]);
    rec.x.resize(dim);
    VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      rec.x[i] = std::stod(fields[1 + i]);
      v[i] = std::stod(fields[1 + dim + i]);
    }
    rec.residual = std::stod(fields[1 + 2 * dim]);
    out.trace.iterates.push_back(std::move(rec));
    out.flows.push_back(std::move(v));
  }
  out.trace.steps_used =
      out.trace.iterates.empty() ? 0 : out.trace.iterates.back().n;
  return out;
}

}  // namespace iqvip
