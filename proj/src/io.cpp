#include "memsflow/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace memsflow {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  // "-0" would read back as the integer 0
  if (v == 0.0 && std::signbit(v)) return "-0.0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  out << "t,E_m,E_e,E_total,dissipation_step,dissipation_cum,min_gap,coincidence_count,"
         "multiplier_mass,fp_iters\n";
  for (const StepRecord& r : trace.records) {
    out << format_number(r.t) << ',' << format_number(r.energy.mechanical) << ','
        << format_number(r.energy.electrostatic) << ',' << format_number(r.energy.total) << ','
        << format_number(r.dissipation) << ',' << format_number(r.dissipation_cum) << ','
        << format_number(r.min_gap) << ',' << r.coincidence_count << ','
        << format_number(r.multiplier_mass) << ',' << r.fp_iters << '\n';
  }
}

void write_trace_csv(const std::string& path, const SimulationTrace& trace) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_trace_csv(out, trace);
  if (!out) throw Error("write failed: " + path);
}

namespace {

void write_array(std::ostream& out, const std::vector<double>& v) {
  out << '[';
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out << ',';
    // JSON has no literal for non-finite values.
    out << (std::isfinite(v[i]) ? format_number(v[i]) : std::string("null"));
  }
  out << ']';
}

std::vector<double> read_array(const nlohmann::json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(x.is_null() ? std::nan("") : x.get<double>());
  return v;
}

}  // namespace

std::string snapshot_json(const Snapshot& s) {
  std::ostringstream out;
  std::vector<double> xs(s.state.grid.nodes());
  for (int i = 0; i < s.state.grid.nodes(); ++i) xs[i] = s.state.grid.x(i);
  out << "{\n  \"step\": " << s.step << ",\n  \"t\": " << format_number(s.t) << ",\n";
  out << "  \"grid\": {\"L\": " << format_number(s.state.grid.L) << ", \"n_x\": " << s.state.grid.n
      << ", \"x\": ";
  write_array(out, xs);
  out << "},\n  \"deflection\": ";
  write_array(out, s.state.u);
  out << ",\n  \"multiplier\": ";
  write_array(out, s.multiplier);
  if (!s.psi1.empty()) {
    out << ",\n  \"potential\": {\"n_z_layer\": " << s.n_z_layer << ", \"n_eta_gap\": " << s.n_eta_gap
        << ", \"layout\": \"column-major: index = i * (n_z + 1) + j\", \"psi1\": ";
    write_array(out, s.psi1);
    out << ", \"phi2\": ";
    write_array(out, s.phi2);
    out << '}';
  }
  out << "\n}\n";
  return out.str();
}

void write_snapshot(const std::string& path, const Snapshot& snap) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << snapshot_json(snap);
  if (!out) throw Error("write failed: " + path);
}

Snapshot parse_snapshot(const std::string& text) {
  Snapshot s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.step = j.at("step").get<int>();
    s.t = j.at("t").get<double>();
    const BeamGrid grid{j.at("grid").at("L").get<double>(), j.at("grid").at("n_x").get<int>()};
    s.state = BeamState(grid, read_array(j.at("deflection")));
    s.multiplier = read_array(j.at("multiplier"));
    if (j.contains("potential")) {
      const auto& p = j.at("potential");
      s.n_z_layer = p.at("n_z_layer").get<int>();
      s.n_eta_gap = p.at("n_eta_gap").get<int>();
      s.psi1 = read_array(p.at("psi1"));
      s.phi2 = read_array(p.at("phi2"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed snapshot: ") + e.what());
  }
  return s;
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_snapshot(buf.str());
}

void print_checks(std::ostream& out, const std::vector<CheckReport>& checks) {
  std::size_t width = 10;
  for (const auto& c : checks) width = std::max(width, c.name.size());
  for (const auto& c : checks) {
    out << (c.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(static_cast<int>(width)) << c.name
        << std::right << "  measured " << std::setw(12) << std::setprecision(5) << c.measured << "  bound "
        << std::setw(12) << c.bound << "  tol " << std::setw(10) << c.tolerance;
    if (!c.context.empty()) out << "  (" << c.context << ')';
    out << '\n';
  }
}

}  // namespace memsflow
