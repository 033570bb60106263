#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lorentz/cone.hpp"

namespace lorentz::cli {

enum Exit { kOk = 0, kAnalysisFailure = 1, kConfigError = 2 };

struct RunConfig {
  std::string command;
  std::string spec_path;
  std::vector<double> point;  // empty: origin, or the first probe point if the origin is outside the chart
  std::vector<double> T;      // empty: foliation normal
  double rmax = 0.0;          // 0: command default
  int grid = 8;
  double tol = 1e-11;
  std::string out = "out";
  std::uint64_t seed = 1;
  std::string format = "csv";

  // command-specific
  std::vector<double> direction;  // geodesic: frame components, default e_0
  double smax = 1.0;
  int dirs = 64;
  double eps = 0.1;
  double r0 = 0.0;
  double t_range = 1.0;
  double graph_radius = 0.5;
  int graph_dirs = 16;
  int graph_levels = 8;
  std::vector<double> radii;
  int count = 20;
  double K2 = -1.0;  // < 0: matched to the Ricci tensor at p
  double half_angle = kPi / 8;
  std::string orientation = "future";
  int n_azimuth = 16;
  int panels = 2;
  int mc = 0;
  std::string inject_fault;
};

// Output files of one command; written under config.out.
class ReportBundle {
 public:
  explicit ReportBundle(const RunConfig& cfg) : cfg_(cfg) {}
  // Tabular data in CSV; converted to whitespace columns for --format plotdata.
  void add_table(const std::string& stem, const std::string& csv);
  void set_summary(const std::string& header, const std::string& row);
  void report(const std::string& line) { report_ += line + "\n"; }
  // Writes everything plus summary.csv, report.txt and manifest.txt; returns the manifest.
  std::vector<std::string> write(const std::string& spec_name) const;

 private:
  const RunConfig& cfg_;
  std::vector<std::pair<std::string, std::string>> tables_;
  std::string summary_header_, summary_row_;
  std::string report_;
};

MetricSpec load_spec(const RunConfig& cfg);
Observer observer(const MetricSpec& spec, const RunConfig& cfg);
IntegratorOptions integrator(const RunConfig& cfg);

int cmd_describe(const RunConfig& cfg);
int cmd_geodesic(const RunConfig& cfg);
int cmd_radius(const RunConfig& cfg);
int cmd_nullcone(const RunConfig& cfg);
int cmd_volume(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);

struct InvariantResult {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool gating = true;  // informational rows never fail the suite
  std::string detail;
  double seconds = 0.0;
};

std::vector<InvariantResult> run_invariant_suite();

}  // namespace lorentz::cli
