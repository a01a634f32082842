#ifndef ESTKER_IO_HPP
#define ESTKER_IO_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "estker/errors.hpp"
#include "estker/kernel.hpp"
#include "estker/operators.hpp"
#include "estker/parse.hpp"
#include "estker/solve.hpp"

namespace estker {

struct ProblemOptions {
  int samples = 2048;
  double residual_tol = 1e-6;
  std::vector<double> epsilons = {1e-2, 1e-3, 1e-4};
  int nystrom_n = 800;
  std::vector<double> z_values;
};

struct ProblemFile {
  DifferentialOperator Q;
  DifferentialOperator P;
  ParsedExpression f;
  double L = 1.0;
  ProblemOptions options;

  ProblemSpec spec(double z = 0.0) const { return ProblemSpec{Q, P, f.bind(z), L, {}}; }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ValidationError("unknown key \"" + it.key() + "\" in " + where);
  }
}

inline DifferentialOperator operator_from_json(const nlohmann::json& obj, const std::string& name) {
  if (!obj.is_object()) throw ValidationError(name + " must be an object with a \"coeffs\" array");
  reject_unknown_keys(obj, {"coeffs"}, name);
  if (!obj.contains("coeffs") || !obj["coeffs"].is_array())
    throw ValidationError(name + ".coeffs must be an array (constant term first)");
  std::vector<Coefficient> coeffs;
  for (const auto& c : obj["coeffs"]) {
    if (c.is_number()) {
      coeffs.emplace_back(c.get<double>());
    } else if (c.is_string()) {
      coeffs.emplace_back(parse_expression(c.get<std::string>()));
    } else {
      throw ValidationError(name + ".coeffs entries must be numbers or expression strings");
    }
  }
  return DifferentialOperator(std::move(coeffs));
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open problem file: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("problem file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("problem file must be a JSON object");
  detail::reject_unknown_keys(doc, {"Q", "P", "f", "L", "options"}, "problem file");
  for (const char* key : {"Q", "P", "f", "L"})
    if (!doc.contains(key)) throw ValidationError(std::string("problem file is missing \"") + key + "\"");

  DifferentialOperator Q = detail::operator_from_json(doc["Q"], "Q");
  DifferentialOperator P = detail::operator_from_json(doc["P"], "P");
  if (!doc["f"].is_string()) throw ValidationError("f must be an expression string");
  ParsedExpression f = ParsedExpression::parse(doc["f"].get<std::string>());
  if (!doc["L"].is_number()) throw ValidationError("L must be a number");
  double L = doc["L"].get<double>();

  ProblemOptions opts;
  if (doc.contains("options")) {
    const nlohmann::json& o = doc["options"];
    if (!o.is_object()) throw ValidationError("options must be an object");
    detail::reject_unknown_keys(
        o, {"samples", "residual_tol", "epsilons", "nystrom_n", "z_values", "z_from", "z_to", "z_count"},
        "options");
    if (o.contains("samples")) opts.samples = o["samples"].get<int>();
    if (o.contains("residual_tol")) opts.residual_tol = o["residual_tol"].get<double>();
    if (o.contains("nystrom_n")) opts.nystrom_n = o["nystrom_n"].get<int>();
    if (o.contains("epsilons")) {
      opts.epsilons.clear();
      for (const auto& e : o["epsilons"]) opts.epsilons.push_back(e.get<double>());
    }
    if (o.contains("z_values")) {
      for (const auto& z : o["z_values"]) opts.z_values.push_back(z.get<double>());
    } else if (o.contains("z_from") || o.contains("z_to") || o.contains("z_count")) {
      if (!(o.contains("z_from") && o.contains("z_to") && o.contains("z_count")))
        throw ValidationError("z_from, z_to and z_count must be given together");
      double z0 = o["z_from"].get<double>(), z1 = o["z_to"].get<double>();
      int count = o["z_count"].get<int>();
      if (count < 1) throw ValidationError("z_count must be positive");
      for (int i = 0; i < count; ++i)
        opts.z_values.push_back(count == 1 ? z0 : z0 + (z1 - z0) * double(i) / double(count - 1));
    }
  }
  return ProblemFile{std::move(Q), std::move(P), std::move(f), L, std::move(opts)};
}

// Writes text to path atomically (temp file + rename).
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write: " + tmp);
    out << contents;
  }
  std::filesystem::rename(tmp, path);
}

// Deterministic JSON serialization: fixed field order, every float printed
// with 17 significant digits so values round-trip bit-exactly.
inline std::string solution_to_json(const DistributionalSolution& sol, double z = 0.0,
                                    bool with_z = false) {
  using detail::format_double;
  std::ostringstream os;
  os << "{\n";
  if (with_z) os << "  \"z\": " << format_double(z) << ",\n";
  os << "  \"n\": " << sol.diag.n << ",\n";
  os << "  \"m\": " << sol.diag.m << ",\n";
  os << "  \"alpha\": " << sol.alpha << ",\n";
  os << "  \"L\": " << format_double(sol.L) << ",\n";
  os << "  \"delta0\": [";
  for (std::size_t i = 0; i < sol.delta0.size(); ++i)
    os << (i ? ", " : "") << format_double(sol.delta0[i]);
  os << "],\n  \"deltaL\": [";
  for (std::size_t i = 0; i < sol.deltaL.size(); ++i)
    os << (i ? ", " : "") << format_double(sol.deltaL[i]);
  os << "],\n";
  os << "  \"regular_samples\": " << sol.sample_x.size() << ",\n";
  os << "  \"cond_matching_minus\": " << format_double(sol.diag.cond_matching_minus) << ",\n";
  os << "  \"cond_matching_plus\": " << format_double(sol.diag.cond_matching_plus) << ",\n";
  os << "  \"cond_constants\": " << format_double(sol.diag.cond_constants) << ",\n";
  os << "  \"tail_residual\": " << format_double(sol.diag.tail_residual) << "\n";
  os << "}\n";
  return os.str();
}

inline std::string regular_to_csv(const DistributionalSolution& sol) {
  std::ostringstream os;
  os << "x,h_regular\n";
  for (std::size_t i = 0; i < sol.sample_x.size(); ++i)
    os << detail::format_double(sol.sample_x[i]) << "," << detail::format_double(sol.sample_h[i])
       << "\n";
  return os.str();
}

// A solution reloaded from solution.json + regular.csv.  The regular part
// is reconstructed by local cubic interpolation of the samples, which is
// far below the verification tolerances for the smooth solutions produced
// here.
inline DistributionalSolution load_solution(const std::string& json_path,
                                            const std::string& csv_path) {
  std::ifstream jin(json_path);
  if (!jin) throw ValidationError("cannot open " + json_path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(jin);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("solution file is not valid JSON: ") + e.what());
  }

  DistributionalSolution sol;
  sol.L = doc.at("L").get<double>();
  sol.alpha = doc.at("alpha").get<int>();
  sol.diag.n = doc.at("n").get<int>();
  sol.diag.m = doc.at("m").get<int>();
  sol.diag.alpha = sol.alpha;
  sol.diag.tail_residual = doc.value("tail_residual", 0.0);
  for (const auto& v : doc.at("delta0")) sol.delta0.push_back(v.get<double>());
  for (const auto& v : doc.at("deltaL")) sol.deltaL.push_back(v.get<double>());

  std::ifstream cin_(csv_path);
  if (!cin_) throw ValidationError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(cin_, line) || line.rfind("x,", 0) != 0)
    throw ValidationError("regular.csv is missing its header row");
  while (std::getline(cin_, line)) {
    if (line.empty()) continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("malformed CSV row: " + line);
    sol.sample_x.push_back(std::stod(line.substr(0, comma)));
    sol.sample_h.push_back(std::stod(line.substr(comma + 1)));
  }
  if (sol.sample_x.size() < 4) throw ValidationError("regular.csv has too few samples");

  auto xs = std::make_shared<std::vector<double>>(sol.sample_x);
  auto hs = std::make_shared<std::vector<double>>(sol.sample_h);
  sol.regular_part.fn = [xs, hs](double x) {
    const std::vector<double>& gx = *xs;
    const std::vector<double>& gh = *hs;
    std::size_t i = std::size_t(std::upper_bound(gx.begin(), gx.end(), x) - gx.begin());
    std::size_t base = (i < 2) ? 0 : std::min(i - 2, gx.size() - 4);
    double r = 0.0;
    for (std::size_t a = base; a < base + 4; ++a) {
      double term = gh[a];
      for (std::size_t b = base; b < base + 4; ++b)
        if (b != a) term *= (x - gx[b]) / (gx[a] - gx[b]);
      r += term;
    }
    return r;
  };
  sol.assembly = sol.regular_part.fn;
  return sol;
}

inline std::string sweep_to_csv(const SweepReport& rep) {
  std::ostringstream os;
  os << "epsilon,interior_deviation,boundary_mass_0,boundary_mass_L,window,condition_estimate\n";
  for (const SweepRow& r : rep.rows)
    os << detail::format_double(r.epsilon) << "," << detail::format_double(r.interior_deviation)
       << "," << detail::format_double(r.mass0) << "," << detail::format_double(r.massL) << ","
       << detail::format_double(r.window) << "," << detail::format_double(r.cond_estimate) << "\n";
  return os.str();
}

}  // namespace estker

#endif  // ESTKER_IO_HPP
