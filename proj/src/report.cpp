#include "amsqn/report.hpp"

#include "amsqn/limited_memory.hpp"

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <cctype>
#include <sstream>
#include <stdexcept>

namespace amsqn::report {

namespace {

using nlohmann::json;

const char* kValidTokens =
    "d, i, 1, v, s, p, o, r, sc, or an integer mu-correction period";

std::string method_code(BaseMethod m) {
  switch (m) {
    case BaseMethod::broyden: return "Br.";
    case BaseMethod::psb: return "Pow.";
    case BaseMethod::dfp: return "DFP";
    case BaseMethod::bfgs: return "BFGS";
    case BaseMethod::gd: return "Grad. Desc.";
    case BaseMethod::newton: return "Newton's";
  }
  return "?";
}

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

} // namespace

VariantLabel parse_variant_label(const std::string& code) {
  const std::string text = trim(code);
  VariantLabel label;

  const size_t open = text.find('(');
  std::string head = trim(open == std::string::npos ? text : text.substr(0, open));

  if (head == "Br." || head == "Br") label.method = BaseMethod::broyden;
  else if (head == "Pow." || head == "Pow" || head == "PSB") label.method = BaseMethod::psb;
  else if (head == "DFP") label.method = BaseMethod::dfp;
  else if (head == "BFGS") label.method = BaseMethod::bfgs;
  else if (head == "Grad. Desc." || head == "GD") label.method = BaseMethod::gd;
  else if (head == "Newton's" || head == "Newton") label.method = BaseMethod::newton;
  else
    throw std::invalid_argument("unknown method '" + head +
                                "' (expected Br., Pow., DFP, BFGS, Grad. Desc., "
                                "Newton's)");

  if (label.method == BaseMethod::gd || label.method == BaseMethod::newton) {
    if (open != std::string::npos)
      throw std::invalid_argument("'" + head + "' takes no flag list");
    return label;
  }

  if (open == std::string::npos || text.back() != ')')
    throw std::invalid_argument("expected '" + head + " (flags)'");
  const std::string flags = text.substr(open + 1, text.size() - open - 2);

  bool have_mode = false;
  bool have_variant = false;
  std::istringstream ss(flags);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (tok.empty()) continue;
    if (tok == "d") { label.mode = HessianMode::direct; have_mode = true; }
    else if (tok == "i") { label.mode = HessianMode::inverse; have_mode = true; }
    else if (tok == "1" && !have_variant) { label.single_secant = true; have_variant = true; }
    else if (tok == "v") { label.perturbation = Perturbation::none; have_variant = true; }
    else if (tok == "s") { label.perturbation = Perturbation::symmetric_only; have_variant = true; }
    else if (tok == "p") { label.perturbation = Perturbation::psd_projection; have_variant = true; }
    else if (tok == "o") { label.perturbation = Perturbation::ours; have_variant = true; }
    else if (tok == "r") { label.rejection = true; }
    else if (tok == "sc") { label.mu_scaling = true; }
    else if (!tok.empty() &&
             std::all_of(tok.begin(), tok.end(),
                         [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      label.nu = std::stoi(tok);
    } else {
      throw std::invalid_argument("unknown token '" + tok + "' in '" + code +
                                  "'; valid tokens: " + kValidTokens);
    }
  }
  if (!have_mode)
    throw std::invalid_argument("missing update-mode token (d or i) in '" + code + "'");
  if (!have_variant)
    throw std::invalid_argument("missing variant token (1, v, s, p or o) in '" +
                                code + "'");
  return label;
}

std::string render_variant_label(const VariantLabel& label) {
  if (label.method == BaseMethod::gd || label.method == BaseMethod::newton)
    return method_code(label.method);
  std::ostringstream os;
  os << method_code(label.method) << " (";
  os << (label.mode == HessianMode::direct ? "d" : "i");
  if (label.single_secant) {
    os << ",1";
  } else {
    switch (label.perturbation) {
      case Perturbation::none: os << ",v"; break;
      case Perturbation::symmetric_only: os << ",s"; break;
      case Perturbation::psd_projection: os << ",p"; break;
      case Perturbation::ours: os << ",o"; break;
    }
  }
  if (label.nu > 0) os << "," << label.nu;
  if (label.mu_scaling) os << ",sc";
  if (label.rejection) os << ",r";
  os << ")";
  return os.str();
}

SolverConfig apply_label(const VariantLabel& label, SolverConfig base) {
  base.method = label.method;
  base.mode = label.mode;
  if (label.single_secant) {
    base.q = 1;
    base.perturbation = Perturbation::none;
  } else {
    base.perturbation = label.perturbation;
  }
  base.correction_period = label.nu;
  base.mu_scaling = label.mu_scaling;
  base.rejection = label.rejection;
  return base;
}

namespace {

SecantMode secant_mode_from_string(const std::string& s) {
  if (s == "curve" || s == "cu") return SecantMode::curve;
  if (s == "anchored" || s == "an") return SecantMode::anchored;
  throw std::invalid_argument("unknown secant mode: " + s);
}

problems::ProblemInstance make_instance(const SweepProblem& p, const SweepCell& cell,
                                        std::uint64_t seed) {
  using problems::ProblemKind;
  switch (p.kind) {
    case ProblemKind::logreg:
      return problems::gen_logreg(p.m, p.n, cell.cbar, p.omega, cell.regime, seed);
    case ProblemKind::porder:
      return problems::gen_porder(p.m, p.n, p.p, cell.cbar, cell.sigma, seed);
    case ProblemKind::quadratic:
      return problems::gen_quadratic(p.m, p.n, cell.cbar, cell.sigma, seed);
    case ProblemKind::xent:
      return problems::gen_xent(p.m, p.n, p.n_classes, cell.cbar, cell.sigma, seed);
    case ProblemKind::mlp_binary:
      return problems::gen_mlp(p.n, p.hidden > 0 ? p.hidden : 100, p.m, seed);
  }
  throw std::logic_error("make_instance: unreachable");
}

CellResult run_one(const problems::ProblemInstance& instance,
                   const VariantLabel& label, const SweepSpec& spec) {
  CellResult out;
  try {
    SolverConfig cfg;
    cfg.q = spec.q;
    cfg.alpha = spec.alpha;
    cfg.secants = spec.secants;
    cfg.eps_tol = spec.eps_tol;
    cfg.max_iter = spec.max_iter;
    cfg.shift = spec.shift;
    cfg = apply_label(label, cfg);

    RunResult r;
    if (label.method == BaseMethod::gd) r = run_gd(instance, cfg);
    else if (label.method == BaseMethod::newton) r = run_newton(instance, cfg);
    else r = run_amsqn(instance, cfg);

    switch (r.status) {
      case RunStatus::converged:
        out.outcome = CellOutcome::ok;
        out.iterations = r.iterations;
        break;
      case RunStatus::max_iterations: out.outcome = CellOutcome::inf_iter; break;
      case RunStatus::diverged: out.outcome = CellOutcome::inf_div; break;
    }
  } catch (const std::exception&) {
    out.outcome = CellOutcome::error;
  }
  return out;
}

CellResult median_cell(std::vector<CellResult> seeds) {
  // any non-converged seed ranks above every iteration count
  std::sort(seeds.begin(), seeds.end(), [](const CellResult& a, const CellResult& b) {
    const bool ai = a.outcome == CellOutcome::ok;
    const bool bi = b.outcome == CellOutcome::ok;
    if (ai != bi) return ai;
    return a.iterations < b.iterations;
  });
  return seeds[(seeds.size() - 1) / 2];
}

std::string cell_text(const CellResult& c) {
  switch (c.outcome) {
    case CellOutcome::ok: return std::to_string(c.iterations);
    case CellOutcome::inf_iter:
    case CellOutcome::inf_div: return "Inf";
    case CellOutcome::error: return "Err";
  }
  return "?";
}

std::string cell_csv_text(const CellResult& c) {
  switch (c.outcome) {
    case CellOutcome::ok: return std::to_string(c.iterations);
    case CellOutcome::inf_iter: return "inf_iter";
    case CellOutcome::inf_div: return "inf_div";
    case CellOutcome::error: return "error";
  }
  return "?";
}

} // namespace

SweepSpec sweep_spec_from_json(const std::string& text) {
  const json doc = json::parse(text);
  SweepSpec spec;
  const json& jp = doc.at("problem");
  spec.problem.kind = problems::problem_kind_from_string(jp.at("kind").get<std::string>());
  spec.problem.m = jp.at("m").get<Index>();
  spec.problem.n = jp.at("n").get<Index>();
  if (jp.contains("cbar")) {
    spec.problem.cbar.clear();
    if (jp["cbar"].is_array())
      for (const auto& v : jp["cbar"]) spec.problem.cbar.push_back(v.get<double>());
    else
      spec.problem.cbar.push_back(jp["cbar"].get<double>());
  }
  if (jp.contains("sigma")) {
    spec.problem.sigma.clear();
    if (jp["sigma"].is_array())
      for (const auto& v : jp["sigma"]) spec.problem.sigma.push_back(v.get<double>());
    else
      spec.problem.sigma.push_back(jp["sigma"].get<double>());
  }
  if (jp.contains("regime")) {
    spec.problem.regime.clear();
    if (jp["regime"].is_array())
      for (const auto& v : jp["regime"])
        spec.problem.regime.push_back(problems::regime_from_string(v.get<std::string>()));
    else
      spec.problem.regime.push_back(
          problems::regime_from_string(jp["regime"].get<std::string>()));
  }
  if (jp.contains("omega")) spec.problem.omega = jp["omega"].get<double>();
  if (jp.contains("p")) spec.problem.p = jp["p"].get<double>();
  if (jp.contains("n_classes")) spec.problem.n_classes = jp["n_classes"].get<int>();
  if (jp.contains("hidden")) spec.problem.hidden = jp["hidden"].get<int>();

  for (const auto& m : doc.at("methods")) spec.methods.push_back(m.get<std::string>());
  if (doc.contains("q")) spec.q = doc["q"].get<int>();
  if (doc.contains("alpha")) spec.alpha = doc["alpha"].get<double>();
  if (doc.contains("secant_mode"))
    spec.secants = secant_mode_from_string(doc["secant_mode"].get<std::string>());
  if (doc.contains("eps_tol")) spec.eps_tol = doc["eps_tol"].get<double>();
  if (doc.contains("max_iter")) spec.max_iter = doc["max_iter"].get<long>();
  if (doc.contains("seeds")) {
    spec.seeds.clear();
    for (const auto& s : doc["seeds"]) spec.seeds.push_back(s.get<std::uint64_t>());
  }
  if (spec.methods.empty()) throw std::invalid_argument("sweep: empty method grid");
  if (spec.seeds.empty()) throw std::invalid_argument("sweep: need at least one seed");
  // validate all labels up front so config errors fail fast
  for (const auto& m : spec.methods) (void)parse_variant_label(m);
  return spec;
}

SweepResult run_sweep(const SweepSpec& spec, int jobs) {
  SweepResult result;
  result.spec = spec;

  const bool use_regime = spec.problem.kind == problems::ProblemKind::logreg;
  std::vector<SweepCell> cells;
  for (double cbar : spec.problem.cbar) {
    if (use_regime) {
      auto regimes = spec.problem.regime;
      if (regimes.empty()) regimes = {problems::SignalRegime::low};
      for (auto reg : regimes) {
        SweepCell c;
        c.cbar = cbar;
        c.regime = reg;
        std::ostringstream os;
        os << "cbar=" << cbar << " " << problems::to_string(reg);
        c.name = os.str();
        cells.push_back(c);
      }
    } else {
      auto sigmas = spec.problem.sigma;
      if (sigmas.empty()) sigmas = {0.0};
      for (double sg : sigmas) {
        SweepCell c;
        c.cbar = cbar;
        c.sigma = sg;
        std::ostringstream os;
        os << "cbar=" << cbar << " sigma=" << sg;
        c.name = os.str();
        cells.push_back(c);
      }
    }
  }
  if (cells.empty()) throw std::invalid_argument("sweep: empty problem grid");
  result.cells = cells;

  std::vector<VariantLabel> labels;
  for (const auto& code : spec.methods) labels.push_back(parse_variant_label(code));

  // instances shared across methods within a (cell, seed)
  const size_t n_cells = cells.size();
  const size_t n_seeds = spec.seeds.size();
  std::vector<problems::ProblemInstance> instances(n_cells * n_seeds);
  for (size_t ci = 0; ci < n_cells; ++ci)
    for (size_t si = 0; si < n_seeds; ++si)
      instances[ci * n_seeds + si] =
          make_instance(spec.problem, cells[ci], spec.seeds[si]);

  result.rows.resize(labels.size());
  for (size_t mi = 0; mi < labels.size(); ++mi) {
    result.rows[mi].label = spec.methods[mi];
    result.rows[mi].medians.resize(n_cells);
    result.rows[mi].per_seed.assign(n_cells, std::vector<CellResult>(n_seeds));
  }

#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif

  const long total = static_cast<long>(labels.size() * n_cells * n_seeds);
#pragma omp parallel for schedule(dynamic)
  for (long t = 0; t < total; ++t) {
    const size_t mi = static_cast<size_t>(t) / (n_cells * n_seeds);
    const size_t rem = static_cast<size_t>(t) % (n_cells * n_seeds);
    const size_t ci = rem / n_seeds;
    const size_t si = rem % n_seeds;
    result.rows[mi].per_seed[ci][si] =
        run_one(instances[ci * n_seeds + si], labels[mi], spec);
  }

  for (auto& row : result.rows)
    for (size_t ci = 0; ci < n_cells; ++ci)
      row.medians[ci] = median_cell(row.per_seed[ci]);
  return result;
}

std::string sweep_markdown(const SweepResult& result) {
  std::ostringstream os;
  os << "| method |";
  for (const auto& c : result.cells) os << " " << c.name << " |";
  os << "\n|---|";
  for (size_t i = 0; i < result.cells.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : result.rows) {
    os << "| " << row.label << " |";
    for (const auto& c : row.medians) os << " " << cell_text(c) << " |";
    os << "\n";
  }
  return os.str();
}

std::string sweep_csv(const SweepResult& result) {
  std::ostringstream os;
  os << "method";
  for (const auto& c : result.cells) os << "," << c.name;
  os << ",seed\n";
  for (const auto& row : result.rows) {
    // median row (seed column = "median"), then per-seed rows
    os << "\"" << row.label << "\"";
    for (const auto& c : row.medians) os << "," << cell_csv_text(c);
    os << ",median\n";
    for (size_t si = 0; si < result.spec.seeds.size(); ++si) {
      os << "\"" << row.label << "\"";
      for (size_t ci = 0; ci < result.cells.size(); ++ci)
        os << "," << cell_csv_text(row.per_seed[ci][si]);
      os << "," << result.spec.seeds[si] << "\n";
    }
  }
  return os.str();
}

std::string markdown_from_csv(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::ostringstream os;
  bool header = true;
  size_t cols = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (char ch : line) {
      if (ch == '"') quoted = !quoted;
      else if (ch == ',' && !quoted) { fields.push_back(field); field.clear(); }
      else field.push_back(ch);
    }
    fields.push_back(field);
    if (header) {
      cols = fields.size();
      os << "|";
      for (const auto& f : fields) os << " " << f << " |";
      os << "\n|";
      for (size_t i = 0; i < cols; ++i) os << "---|";
      os << "\n";
      header = false;
      continue;
    }
    if (fields.back() != "median") continue; // markdown view keeps medians only
    os << "|";
    for (const auto& f : fields) {
      std::string shown = f;
      if (shown == "inf_iter" || shown == "inf_div") shown = "Inf";
      if (shown == "error") shown = "Err";
      os << " " << shown << " |";
    }
    os << "\n";
  }
  return os.str();
}

} // namespace amsqn::report
