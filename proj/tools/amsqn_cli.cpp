#include "amsqn/limited_memory.hpp"
#include "amsqn/matrix_kernels.hpp"
#include "amsqn/optimizer.hpp"
#include "amsqn/problems.hpp"
#include "amsqn/psd_shift.hpp"
#include "amsqn/report.hpp"
#include "amsqn/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace amsqn;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << text;
}

int jobs_from_env(int cli_jobs) {
  if (cli_jobs > 0) return cli_jobs;
  if (const char* env = std::getenv("AMSQN_JOBS")) {
    const int j = std::atoi(env);
    if (j > 0) return j;
  }
  return 0;
}

problems::ProblemInstance instance_from_json(const json& jp) {
  using problems::ProblemKind;
  if (jp.contains("instance"))
    return problems::load_instance_file(jp["instance"].get<std::string>());
  const auto kind = problems::problem_kind_from_string(jp.at("kind").get<std::string>());
  const auto m = jp.value("m", Index(200));
  const auto n = jp.value("n", Index(100));
  const auto seed = jp.value("seed", std::uint64_t(0));
  const double cbar = jp.value("cbar", 10.0);
  const double sigma = jp.value("sigma", 0.0);
  switch (kind) {
    case ProblemKind::logreg:
      return problems::gen_logreg(
          m, n, cbar, jp.value("omega", 10.0),
          problems::regime_from_string(jp.value("regime", std::string("low"))), seed);
    case ProblemKind::porder:
      return problems::gen_porder(m, n, jp.value("p", 2.5), cbar, sigma, seed);
    case ProblemKind::quadratic:
      return problems::gen_quadratic(m, n, cbar, sigma, seed);
    case ProblemKind::xent:
      return problems::gen_xent(m, n, jp.value("n_classes", 10), cbar, sigma, seed);
    case ProblemKind::mlp_binary:
      return problems::gen_mlp(n, jp.value("hidden", 100), m, seed);
  }
  throw std::runtime_error("instance_from_json: unreachable");
}

json defaults_json(const SolverConfig& cfg) {
  json j;
  j["q"] = cfg.q;
  j["alpha"] = cfg.alpha ? json(*cfg.alpha) : json("auto");
  j["secant_mode"] = cfg.secants == SecantMode::curve ? "curve" : "anchored";
  j["eps_tol"] = cfg.eps_tol;
  j["max_iter"] = cfg.max_iter;
  j["rejection_eps"] = cfg.rejection_eps;
  j["shift"] = {{"c", cfg.shift.c},
                {"mu0", cfg.shift.mu0},
                {"lambda_tol", cfg.shift.lambda_tol},
                {"doubling", cfg.shift.doubling}};
  j["correction_period"] = cfg.correction_period;
  j["grad_normalization"] = "1/m";
  return j;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const json doc = json::parse(read_file(config_path));
  const auto instance = instance_from_json(doc.at("problem"));

  SolverConfig cfg;
  cfg.q = doc.value("q", 5);
  if (doc.contains("alpha")) cfg.alpha = doc["alpha"].get<double>();
  if (doc.contains("secant_mode"))
    cfg.secants = doc["secant_mode"].get<std::string>() == "anchored"
                      ? SecantMode::anchored
                      : SecantMode::curve;
  cfg.eps_tol = doc.value("eps_tol", 1e-4);
  cfg.max_iter = doc.value("max_iter", 10000L);
  cfg.seed = doc.value("seed", std::uint64_t(0));
  if (doc.contains("rejection_eps")) cfg.rejection_eps = doc["rejection_eps"].get<double>();
  if (doc.contains("literal_rejection_rule"))
    cfg.literal_reject_rule = doc["literal_rejection_rule"].get<bool>();

  const std::string method_code = doc.at("method").get<std::string>();
  const auto label = report::parse_variant_label(method_code);
  cfg = report::apply_label(label, cfg);

  bool limited = false;
  if (doc.contains("limited_memory")) {
    limited = true;
    const json& lm = doc["limited_memory"];
    cfg.memory = lm.value("L", 1);
    cfg.gamma = lm.value("gamma", 1.0);
    cfg.gamma_mode = lm.value("gamma_mode", std::string("constant")) == "self-scaling"
                         ? GammaMode::self_scaling
                         : GammaMode::constant;
    if (label.method != BaseMethod::bfgs || label.mode != HessianMode::inverse)
      throw std::runtime_error("limited_memory requires a BFGS (i,...) method code");
  }

  RunResult result;
  if (limited) result = run_lms_bfgs(instance, cfg);
  else if (label.method == BaseMethod::gd) result = run_gd(instance, cfg);
  else if (label.method == BaseMethod::newton) result = run_newton(instance, cfg);
  else result = run_amsqn(instance, cfg);

  fs::create_directories(out_dir);
  write_trace_csv(result, (fs::path(out_dir) / "trace.csv").string(), limited);

  json summary;
  summary["method"] = method_code;
  summary["status"] = result.status == RunStatus::converged ? "converged"
                      : result.status == RunStatus::diverged ? "diverged"
                                                             : "max_iterations";
  summary["iterations"] = result.iterations;
  summary["final_f"] = result.final_f;
  summary["final_grad_ratio"] = result.final_grad_ratio;
  summary["skipped_updates"] = result.skipped_updates;
  summary["mu_sum"] = result.mu_sum;
  summary["defaults"] = defaults_json(cfg);
  summary["problem"] = {{"kind", problems::to_string(instance.kind)},
                        {"m", instance.sample_count()},
                        {"n", instance.feature_count()},
                        {"seed", instance.seed}};
  write_file((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");

  std::cout << "status: " << summary["status"].get<std::string>()
            << ", iterations: " << result.iterations
            << ", final grad ratio: " << result.final_grad_ratio << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir, int jobs,
              int seeds_override) {
  auto spec = report::sweep_spec_from_json(read_file(config_path));
  if (seeds_override > 0) {
    spec.seeds.clear();
    for (int s = 0; s < seeds_override; ++s)
      spec.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  const auto result = report::run_sweep(spec, jobs_from_env(jobs));
  fs::create_directories(out_dir);
  const std::string md = report::sweep_markdown(result);
  write_file((fs::path(out_dir) / "sweep.md").string(), md);
  write_file((fs::path(out_dir) / "sweep.csv").string(), report::sweep_csv(result));
  std::cout << md;
  return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out_path) {
  const json doc = json::parse(read_file(config_path));
  const auto instance =
      instance_from_json(doc.contains("problem") ? doc["problem"] : doc);
  problems::save_instance_file(instance, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_report(const std::string& csv_path, const std::string& out_path) {
  const std::string md = report::markdown_from_csv(read_file(csv_path));
  if (out_path.empty()) std::cout << md;
  else write_file(out_path, md);
  return 0;
}

struct MuBenchRow {
  Index n;
  int q;
  double t_alg1;
  double t_dense;
  double t_iter;
};

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

int cmd_bench_mu(std::vector<Index> ns, std::vector<int> qs, int trials,
                 const std::string& out_path) {
  if (!std::is_sorted(ns.begin(), ns.end()))
    throw std::runtime_error("bench-mu: n values must be sorted ascending");
  using ClockT = std::chrono::steady_clock;
  std::ostringstream csv;
  csv << "n,q,t_alg1,t_dense_eig,t_iter_eig\n";
  ShiftParams params;

  for (Index n : ns) {
    for (int q : qs) {
      std::vector<double> t1, t2, t3;
      for (int trial = 0; trial <= trials; ++trial) { // trial 0 is warm-up
        Rng rng(static_cast<std::uint64_t>(n * 1000 + q * 10 + trial), Rng::kMatrix);
        Matrix d1(n, q), d2(n, q), w(q, q);
        for (Index i = 0; i < n; ++i)
          for (int j = 0; j < q; ++j) {
            d1(i, j) = rng.normal();
            d2(i, j) = rng.normal();
          }
        for (int i = 0; i < q; ++i)
          for (int j = 0; j < q; ++j) w(i, j) = rng.normal();

        auto tp = ClockT::now();
        const double mu = compute_mu(d1, d2, w, params);
        const double alg1_ms =
            std::chrono::duration<double, std::milli>(ClockT::now() - tp).count();

        // dense verdict on the materialized n x n perturbation
        tp = ClockT::now();
        const Matrix winv_d2t = kernels::solve(w, Matrix(d2.transpose()));
        const Matrix cross = d1 * winv_d2t;
        const Matrix delta = 0.5 * (cross + cross.transpose());
        const double lmin_dense =
            kernels::eig_min_sym(Matrix(delta + mu * Matrix::Identity(n, n)));
        const double dense_ms =
            std::chrono::duration<double, std::milli>(ClockT::now() - tp).count();

        // iterative verdict, matrix-free apply of the factored form
        tp = ClockT::now();
        const auto apply = [&](const Vector& v) -> Vector {
          const Vector a = d1 * kernels::solve(w, Matrix(d2.transpose() * v));
          const Vector b = d2 * kernels::solve(Matrix(w.transpose()),
                                               Matrix(d1.transpose() * v));
          return 0.5 * (a + b) + mu * v;
        };
        const double lmin_iter = kernels::eig_min_sym_iterative(apply, n);
        const double iter_ms =
            std::chrono::duration<double, std::milli>(ClockT::now() - tp).count();

        const double band = 1e-9 * (1.0 + delta.norm());
        if (lmin_dense < -band)
          std::cerr << "bench-mu: dense oracle disputes the certificate at n=" << n
                    << " q=" << q << " (lambda_min " << lmin_dense << ")\n";
        if ((lmin_iter < -band) != (lmin_dense < -band))
          std::cerr << "bench-mu: PSD verdicts disagree at n=" << n << " q=" << q
                    << " (dense " << lmin_dense << ", iterative " << lmin_iter
                    << ")\n";

        if (trial > 0) {
          t1.push_back(alg1_ms);
          t2.push_back(dense_ms);
          t3.push_back(iter_ms);
        }
      }
      csv << n << "," << q << "," << median_of(t1) << "," << median_of(t2) << ","
          << median_of(t3) << "\n";
    }
  }
  if (out_path.empty()) std::cout << csv.str();
  else write_file(out_path, csv.str());
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"amsqn: multisecant quasi-Newton benchmark harness"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", out_path, csv_path;
  int jobs = 0, trials = 3, seeds_override = 0;
  std::string n_list = "500,1000,2000", q_list = "5";

  auto* run = app.add_subcommand("run", "run one solver config, write trace + summary");
  run->add_option("--config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand("sweep", "run a method/problem grid");
  sweep->add_option("--config", config_path, "JSON sweep spec")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "worker threads (or AMSQN_JOBS)");
  sweep->add_option("--seeds", seeds_override, "run seeds 0..N-1, overriding the config");

  auto* bench = app.add_subcommand("bench-mu", "time the PSD certificate paths");
  bench->add_option("--n", n_list, "comma-separated n values, ascending");
  bench->add_option("--q", q_list, "comma-separated q values");
  bench->add_option("--trials", trials, "timed trials per point (plus one warm-up)");
  bench->add_option("--out", out_path, "CSV output path (stdout when empty)");

  auto* gen = app.add_subcommand("gen", "generate an instance to JSON");
  gen->add_option("--config", config_path, "JSON problem description")->required();
  gen->add_option("--out", out_path, "instance file")->required();

  auto* report_cmd = app.add_subcommand("report", "render a sweep CSV as markdown");
  report_cmd->add_option("--csv", csv_path, "sweep CSV")->required();
  report_cmd->add_option("--out", out_path, "markdown output (stdout when empty)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir, jobs, seeds_override);
    if (gen->parsed()) return cmd_gen(config_path, out_path);
    if (report_cmd->parsed()) return cmd_report(csv_path, out_path);
    if (bench->parsed()) {
      std::vector<Index> ns;
      std::vector<int> qs;
      std::istringstream sn(n_list), sq(q_list);
      std::string tok;
      while (std::getline(sn, tok, ',')) ns.push_back(std::stol(tok));
      while (std::getline(sq, tok, ',')) qs.push_back(std::stoi(tok));
      return cmd_bench_mu(ns, qs, trials, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
