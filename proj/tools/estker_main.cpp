// Command-line front end: solve / verify / sweep / filter-demo on problem
// files.  Exit codes: 0 success, 1 verification failure, 2 validation
// error, 3 numeric failure.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>

#include "estker/io.hpp"
#include "estker/kernel.hpp"
#include "estker/solve.hpp"

namespace {

int log_level() {
  const char* v = std::getenv("ESTKER_LOG");
  return v ? std::atoi(v) : 0;
}

void log_line(int level, const std::string& msg) {
  if (log_level() >= level) std::cerr << "[estker] " << msg << "\n";
}

estker::DistributionalSolution solve_problem(const estker::ProblemFile& pf, double z = 0.0) {
  estker::SolveOptions opts;
  opts.samples = pf.options.samples;
  estker::ProblemSpec spec = pf.spec(z);
  return estker::solve(spec, opts);
}

int cmd_solve(const std::string& path, const std::string& out_dir) {
  estker::ProblemFile pf = estker::load_problem(path);
  if (pf.f.uses_z())
    throw estker::ValidationError("f depends on z; use the filter-demo command");
  estker::DistributionalSolution sol = solve_problem(pf);
  std::filesystem::create_directories(out_dir);
  estker::write_file_atomic(out_dir + "/solution.json", estker::solution_to_json(sol));
  estker::write_file_atomic(out_dir + "/regular.csv", estker::regular_to_csv(sol));
  std::cout << "solved: alpha=" << sol.alpha << " tail_residual=" << sol.diag.tail_residual
            << " -> " << out_dir << "/solution.json\n";
  return 0;
}

int cmd_verify(const std::string& path, double tol, const std::string& in_dir,
               int perturb_index, double perturb_amount, const std::string& perturb_side) {
  estker::ProblemFile pf = estker::load_problem(path);
  if (pf.f.uses_z())
    throw estker::ValidationError("f depends on z; use the filter-demo command");
  estker::SmoothExpression f = pf.f.bind();

  estker::DistributionalSolution sol;
  bool from_files = std::filesystem::exists(in_dir + "/solution.json") &&
                    std::filesystem::exists(in_dir + "/regular.csv");
  if (from_files) {
    log_line(1, "re-validating stored solution from " + in_dir);
    sol = estker::load_solution(in_dir + "/solution.json", in_dir + "/regular.csv");
  } else {
    log_line(1, "no stored solution found; solving in memory");
    sol = solve_problem(pf);
  }

  if (perturb_index >= 0) {
    std::vector<double>& layer = (perturb_side == "L") ? sol.deltaL : sol.delta0;
    if (perturb_index >= int(layer.size()))
      throw estker::ValidationError("perturbation index out of range");
    layer[std::size_t(perturb_index)] += perturb_amount;
    std::cout << "injected perturbation: delta" << (perturb_side == "L" ? "L" : "0") << "["
              << perturb_index << "] += " << perturb_amount << "\n";
  }

  estker::RationalKernel kernel = estker::kernel_from_symbol(pf.Q, pf.P);
  double res = estker::residual(kernel, sol, [&](double x) { return f(x); });
  double tail = sol.diag.tail_residual;
  std::cout << "residual: " << res << "\n";
  std::cout << "tail_residual: " << tail << "\n";
  std::cout << "kernel_symmetry: " << (kernel.even_symbol() ? kernel.symmetry_residual() : -1.0)
            << (kernel.even_symbol() ? "" : " (symbol not even)") << "\n";

  if (pf.P.order() == 0 && !from_files) {
    // the direct h = QF route and the Green-function assembly must agree
    estker::DistributionalSolution direct = estker::solve_direct_qf(pf.spec());
    double res_direct = estker::residual(kernel, direct, [&](double x) { return f(x); });
    std::cout << "residual_direct_qf: " << res_direct << "\n";
  }
  return res <= tol ? 0 : 1;
}

int cmd_sweep(const std::string& path, const std::string& out_dir) {
  estker::ProblemFile pf = estker::load_problem(path);
  if (pf.f.uses_z())
    throw estker::ValidationError("f depends on z; use the filter-demo command");
  estker::SmoothExpression f = pf.f.bind();
  estker::DistributionalSolution sol = solve_problem(pf);
  estker::RationalKernel kernel = estker::kernel_from_symbol(pf.Q, pf.P);
  estker::SweepReport rep = estker::perturbation_sweep(
      kernel, [&](double x) { return f(x); }, pf.L, pf.options.epsilons, pf.options.nystrom_n, sol);
  std::filesystem::create_directories(out_dir);
  estker::write_file_atomic(out_dir + "/sweep.csv", estker::sweep_to_csv(rep));
  std::cout << "sweep: " << rep.rows.size() << " rows (epsilon sign " << rep.sign << ") -> "
            << out_dir << "/sweep.csv\n";
  return 0;
}

int cmd_filter_demo(const std::string& path, const std::string& out_dir) {
  estker::ProblemFile pf = estker::load_problem(path);
  if (pf.options.z_values.empty())
    throw estker::ValidationError("filter-demo needs a non-empty z grid in options");
  std::filesystem::create_directories(out_dir);
  estker::RationalKernel kernel = estker::kernel_from_symbol(pf.Q, pf.P);

  // every z-solve is independent; fan out across threads
  std::vector<std::future<double>> jobs;
  for (std::size_t i = 0; i < pf.options.z_values.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i]() {
      double z = pf.options.z_values[i];
      estker::DistributionalSolution sol = solve_problem(pf, z);
      estker::SmoothExpression fz = pf.f.bind(z);
      double res = estker::residual(kernel, sol, [&](double x) { return fz(x); });
      char name[64];
      std::snprintf(name, sizeof(name), "record_%03zu.json", i);
      estker::write_file_atomic(out_dir + "/" + name, estker::solution_to_json(sol, z, true));
      return res;
    }));
  }
  std::ostringstream index;
  index << "index,z,record,residual\n";
  bool ok = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    double res = jobs[i].get();
    char name[64];
    std::snprintf(name, sizeof(name), "record_%03zu.json", i);
    index << i << "," << estker::detail::format_double(pf.options.z_values[i]) << "," << name << ","
          << estker::detail::format_double(res) << "\n";
    if (res > pf.options.residual_tol) ok = false;
  }
  estker::write_file_atomic(out_dir + "/filter_index.csv", index.str());
  std::cout << "filter-demo: " << jobs.size() << " records -> " << out_dir << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytic solver for integral equations with rational-symbol kernels"};
  app.require_subcommand(1);

  std::string problem_path, out_dir = ".", in_dir = ".";
  double tol = 1e-6;
  int perturb_index = -1;
  double perturb_amount = 0.0;
  std::string perturb_side = "0";

  CLI::App* solve = app.add_subcommand("solve", "solve a problem file");
  solve->add_option("file", problem_path, "problem file (JSON)")->required();
  solve->add_option("--out", out_dir, "output directory");

  CLI::App* verify = app.add_subcommand("verify", "verify a solution against the kernel");
  verify->add_option("file", problem_path, "problem file (JSON)")->required();
  verify->add_option("--tol", tol, "residual tolerance");
  verify->add_option("--in", in_dir, "directory with solution.json/regular.csv");
  verify->add_option("--perturb-index", perturb_index, "corrupt one delta coefficient (index)");
  verify->add_option("--perturb-amount", perturb_amount, "perturbation size");
  verify->add_option("--perturb-side", perturb_side, "which endpoint layer: 0 or L");

  CLI::App* sweep = app.add_subcommand("sweep", "epsilon-perturbation sweep");
  sweep->add_option("file", problem_path, "problem file (JSON)")->required();
  sweep->add_option("--out", out_dir, "output directory");

  CLI::App* fdemo = app.add_subcommand("filter-demo", "solve a z-family of problems");
  fdemo->add_option("file", problem_path, "problem file (JSON)")->required();
  fdemo->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) return cmd_solve(problem_path, out_dir);
    if (verify->parsed())
      return cmd_verify(problem_path, tol, in_dir, perturb_index, perturb_amount, perturb_side);
    if (sweep->parsed()) return cmd_sweep(problem_path, out_dir);
    if (fdemo->parsed()) return cmd_filter_demo(problem_path, out_dir);
  } catch (const estker::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const estker::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
