#pragma once

#include "amsqn/optimizer.hpp"

#include <map>
#include <string>
#include <vector>

namespace amsqn::report {

/// A method variant written in the benchmark tables' code, e.g.
/// "BFGS (i,o,32,r)" or "Br. (d,v)". GD and Newton rows carry no flags.
struct VariantLabel {
  BaseMethod method = BaseMethod::bfgs;
  HessianMode mode = HessianMode::inverse;
  bool single_secant = false;           // token "1": q forced to 1
  Perturbation perturbation = Perturbation::none;
  int nu = 0;                           // mu-correction period
  bool mu_scaling = false;              // token "sc"
  bool rejection = false;               // token "r"
};

/// Parses a table code; throws std::invalid_argument listing the valid
/// tokens on unknown input. parse(render(x)) == x.
VariantLabel parse_variant_label(const std::string& code);
std::string render_variant_label(const VariantLabel& label);

/// Applies a label on top of base solver settings.
SolverConfig apply_label(const VariantLabel& label, SolverConfig base);

struct SweepProblem {
  problems::ProblemKind kind = problems::ProblemKind::logreg;
  Index m = 200;
  Index n = 100;
  std::vector<double> cbar = {10.0};
  std::vector<double> sigma = {};                  // porder/xent noise grid
  std::vector<problems::SignalRegime> regime = {}; // logreg regime grid
  double omega = 10.0;                             // logreg SNR
  double p = 2.5;
  int n_classes = 10;
  int hidden = 100;                                // mlp hidden width
};

struct SweepSpec {
  SweepProblem problem;
  std::vector<std::string> methods; // variant codes
  int q = 5;
  std::optional<double> alpha;
  SecantMode secants = SecantMode::curve;
  double eps_tol = 1e-4;
  long max_iter = 10000;
  std::vector<std::uint64_t> seeds = {0};
  ShiftParams shift;
};

/// One (cbar, regime/sigma) column of the report table.
struct SweepCell {
  double cbar = 0.0;
  double sigma = 0.0;
  problems::SignalRegime regime = problems::SignalRegime::low;
  std::string name;
};

enum class CellOutcome { ok, inf_iter, inf_div, error };

struct CellResult {
  CellOutcome outcome = CellOutcome::ok;
  long iterations = 0; // valid when outcome == ok
};

struct SweepRow {
  std::string label;
  std::vector<CellResult> medians;                  // one per cell
  std::vector<std::vector<CellResult>> per_seed;    // [cell][seed]
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> rows;
  SweepSpec spec;
};

SweepSpec sweep_spec_from_json(const std::string& text);

/// Runs the whole grid; cells execute in an OpenMP worker pool, each with
/// its own instance and solver state. Per-run failures become Inf/Err cells,
/// never exceptions.
SweepResult run_sweep(const SweepSpec& spec, int jobs = 0);

std::string sweep_markdown(const SweepResult& result);
std::string sweep_csv(const SweepResult& result);
std::string markdown_from_csv(const std::string& csv_text);

} // namespace amsqn::report
