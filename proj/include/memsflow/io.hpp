#pragma once

// Trace CSV, JSON snapshots and report rendering.

#include <iosfwd>
#include <string>
#include <vector>

#include "memsflow/diagnostics.hpp"

namespace memsflow {

/// Header plus one row per state, 17 significant digits.
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);
void write_trace_csv(const std::string& path, const SimulationTrace& trace);

struct Snapshot {
  int step = 0;
  double t = 0.0;
  BeamState state;
  std::vector<double> multiplier;
  // Optional potential on the layer grid and the mapped gap grid.
  int n_z_layer = 0;
  int n_eta_gap = 0;
  std::vector<double> psi1;
  std::vector<double> phi2;
};

/// Numbers are written with 17 significant digits, so reading a snapshot
/// back reproduces every value bit for bit.
std::string snapshot_json(const Snapshot& snap);
void write_snapshot(const std::string& path, const Snapshot& snap);
Snapshot read_snapshot(const std::string& path);
Snapshot parse_snapshot(const std::string& text);

/// "%.17g".
std::string format_number(double v);

/// Fixed-width table of check reports.
void print_checks(std::ostream& out, const std::vector<CheckReport>& checks);

}  // namespace memsflow
