#pragma once

// struct-h2 front end: simulate | design | sweep | verify.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 configuration error,
// 3 every requested design infeasible, 4 verification failed.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "structh2/csv.hpp"
#include "structh2/dataset.hpp"
#include "structh2/errors.hpp"
#include "structh2/example1.hpp"
#include "structh2/subspace.hpp"
#include "structh2/synthesis.hpp"
#include "structh2/verification.hpp"

namespace structh2::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kAllInfeasible = 3,
  kVerificationFailed = 4,
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct NoiseConfig {
  double eps = 0.1;
  Index T = 20;
  std::uint64_t seed = 1;
  int exponent = 1;
  double input_amplitude = 3.0;
  std::optional<Vector> x0;
  bool sphere = false;
};

struct VerifyConfig {
  std::optional<fs::path> k_file;
  std::optional<fs::path> result_dir;
  std::optional<double> gamma;
  std::size_t samples = 200;
  double gamma_scale = 1.0;
};

struct RunConfig {
  std::optional<PlantPair> plant;
  bool builtin = false;
  std::optional<PerformanceSpec> spec;
  std::optional<SubspaceSpec> subspace;
  std::vector<Design> designs{Design::D1, Design::D2, Design::D3, Design::D4};
  bool data_mode = false;
  std::optional<fs::path> data_dir;
  NoiseConfig noise;
  sdp::Options solver;
  double eta = 1e-3;
  bool sharing = false;
  bool dump_conic = false;
  fs::path output_dir = "out";
  std::vector<double> sweep_eps;
  std::vector<Index> sweep_T;
  VerifyConfig verify;

  const PlantPair& require_plant() const {
    if (!plant) throw ConfigError("a plant (builtin example1 or A/B files) is required");
    return *plant;
  }
  const PerformanceSpec& require_spec() const {
    if (!spec) throw ConfigError("a performance spec (C, D, E) is required");
    return *spec;
  }
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> eta;
  std::optional<std::string> designs;
  bool sharing = false;
  std::optional<int> exponent;
  std::optional<std::string> plant;
  std::optional<std::string> output;
};

namespace detail {

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "plant", "spec", "pattern", "basis", "designs", "mode", "data_dir", "noise",
      "solver", "eta", "sharing", "dump_conic", "output_dir", "sweep", "verify"};
  return keys;
}

template <typename T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " is missing or has the wrong type");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::vector<Design> parse_design_list(const std::string& list) {
  std::vector<Design> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(parse_design(item));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
  }
  if (out.empty()) throw ConfigError("design list is empty");
  return out;
}

inline void use_builtin(RunConfig& cfg) {
  cfg.builtin = true;
  cfg.plant = example1::plant();
  if (!cfg.spec) cfg.spec = example1::spec();
  if (!cfg.subspace) cfg.subspace = example1::subspace();
}

inline std::string format_gamma(double g) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", g);
  return buf;
}

inline std::string format_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Runs f(i) for i in [0, count) on a small pool; results land by index.
template <typename F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          f(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Reads a JSON configuration; relative paths are resolved against the
/// configuration file's directory.
inline RunConfig load_config(const std::optional<fs::path>& file, const Overrides& ov = {}) {
  RunConfig cfg;
  json j = json::object();
  fs::path base = fs::current_path();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(file->string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    base = file->parent_path().empty() ? fs::current_path() : file->parent_path();
    for (const auto& [key, value] : j.items()) {
      (void)value;
      const auto& keys = detail::known_keys();
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  }

  const std::string root = "config";
  if (j.contains("spec")) {
    const auto& s = j["spec"];
    if (s.is_string()) {
      if (s.get<std::string>() != "example1") throw ConfigError("unknown builtin spec " + s.dump());
      cfg.spec = example1::spec();
    } else {
      PerformanceSpec spec;
      spec.C = csv::read_matrix(detail::resolve(base, detail::get<std::string>(s, "C", "spec")));
      spec.D = csv::read_matrix(detail::resolve(base, detail::get<std::string>(s, "D", "spec")));
      spec.E = csv::read_matrix(detail::resolve(base, detail::get<std::string>(s, "E", "spec")));
      cfg.spec = spec;
    }
  }
  if (j.contains("pattern") && j.contains("basis")) {
    throw ConfigError("give either pattern or basis, not both");
  }
  if (j.contains("pattern")) {
    cfg.subspace = SubspaceSpec::from_pattern(
        read_pattern(detail::resolve(base, detail::get<std::string>(j, "pattern", root))));
  } else if (j.contains("basis")) {
    cfg.subspace = read_basis(detail::resolve(base, detail::get<std::string>(j, "basis", root)));
  }

  std::optional<std::string> plant_name = ov.plant;
  if (!plant_name && j.contains("plant")) {
    const auto& p = j["plant"];
    if (p.is_string()) {
      plant_name = p.get<std::string>();
    } else {
      PlantPair plant{
          csv::read_matrix(detail::resolve(base, detail::get<std::string>(p, "A", "plant"))),
          csv::read_matrix(detail::resolve(base, detail::get<std::string>(p, "B", "plant")))};
      plant.validate();
      cfg.plant = plant;
    }
  }
  if (plant_name) {
    if (*plant_name != "example1") throw ConfigError("unknown builtin plant '" + *plant_name + "'");
    detail::use_builtin(cfg);
  }

  if (j.contains("designs")) {
    std::string list;
    for (const auto& d : j["designs"]) {
      if (!d.is_string()) throw ConfigError("designs must be a list of strings");
      list += d.get<std::string>() + ",";
    }
    cfg.designs = detail::parse_design_list(list);
  }
  const std::string mode = detail::get_or<std::string>(j, "mode", "model", root);
  if (mode != "model" && mode != "data") throw ConfigError("mode must be \"model\" or \"data\"");
  cfg.data_mode = mode == "data";
  if (j.contains("data_dir")) {
    cfg.data_dir = detail::resolve(base, detail::get<std::string>(j, "data_dir", root));
  }
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    const std::string w = "noise";
    cfg.noise.eps = detail::get_or<double>(n, "eps", cfg.noise.eps, w);
    const auto t = detail::get_or<long long>(n, "T", cfg.noise.T, w);
    cfg.noise.T = static_cast<Index>(t);
    if (t < 1) throw ConfigError("T must be ≥ 1");
    cfg.noise.seed = detail::get_or<std::uint64_t>(n, "seed", cfg.noise.seed, w);
    cfg.noise.exponent = detail::get_or<int>(n, "exponent", cfg.noise.exponent, w);
    cfg.noise.input_amplitude =
        detail::get_or<double>(n, "input_amplitude", cfg.noise.input_amplitude, w);
    cfg.noise.sphere = detail::get_or<bool>(n, "sphere", false, w);
    if (n.contains("x0")) {
      const auto xs = detail::get<std::vector<double>>(n, "x0", w);
      cfg.noise.x0 = Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size()));
    }
  }
  if (j.contains("solver")) {
    const auto& s = j["solver"];
    const std::string w = "solver";
    cfg.solver.tol_feas = detail::get_or<double>(s, "tol_feas", cfg.solver.tol_feas, w);
    cfg.solver.tol_gap = detail::get_or<double>(s, "tol_gap", cfg.solver.tol_gap, w);
    cfg.solver.max_iter = detail::get_or<int>(s, "max_iter", cfg.solver.max_iter, w);
    cfg.solver.verbose = detail::get_or<bool>(s, "verbose", false, w);
    const std::string backend = detail::get_or<std::string>(s, "backend", "embedded", w);
    if (backend == "external") {
      throw ConfigError("solver.backend=external is not available in this build");
    }
    if (backend != "embedded") throw ConfigError("solver.backend must be embedded or external");
  }
  cfg.eta = detail::get_or<double>(j, "eta", cfg.eta, root);
  cfg.sharing = detail::get_or<bool>(j, "sharing", false, root);
  cfg.dump_conic = detail::get_or<bool>(j, "dump_conic", false, root);
  if (j.contains("output_dir")) {
    cfg.output_dir = detail::resolve(base, detail::get<std::string>(j, "output_dir", root));
  } else {
    cfg.output_dir = base / "out";
  }
  if (j.contains("sweep")) {
    const auto& s = j["sweep"];
    cfg.sweep_eps = detail::get_or<std::vector<double>>(s, "eps", {}, "sweep");
    for (long long t : detail::get_or<std::vector<long long>>(s, "T", {}, "sweep")) {
      if (t < 1) throw ConfigError("T must be ≥ 1");
      cfg.sweep_T.push_back(static_cast<Index>(t));
    }
  }
  if (j.contains("verify")) {
    const auto& v = j["verify"];
    const std::string w = "verify";
    if (v.contains("K")) cfg.verify.k_file = detail::resolve(base, detail::get<std::string>(v, "K", w));
    if (v.contains("result")) {
      cfg.verify.result_dir = detail::resolve(base, detail::get<std::string>(v, "result", w));
    }
    if (v.contains("gamma")) cfg.verify.gamma = detail::get<double>(v, "gamma", w);
    cfg.verify.samples = detail::get_or<std::size_t>(v, "samples", cfg.verify.samples, w);
    cfg.verify.gamma_scale = detail::get_or<double>(v, "gamma_scale", 1.0, w);
  }

  if (ov.seed) cfg.noise.seed = *ov.seed;
  if (ov.eta) cfg.eta = *ov.eta;
  if (ov.designs) cfg.designs = detail::parse_design_list(*ov.designs);
  if (ov.sharing) cfg.sharing = true;
  if (ov.exponent) cfg.noise.exponent = *ov.exponent;
  if (ov.output) cfg.output_dir = *ov.output;

  if (cfg.noise.exponent != 1 && cfg.noise.exponent != 2) {
    throw ConfigError("exponent must be 1 or 2");
  }
  if (!(cfg.noise.eps >= 0.0)) throw ConfigError("eps must be nonnegative");
  if (!(cfg.eta >= 0.0)) throw ConfigError("eta must be nonnegative");
  for (double e : cfg.sweep_eps) {
    if (!(e >= 0.0)) throw ConfigError("sweep eps must be nonnegative");
  }
  if (cfg.plant && cfg.spec) cfg.spec->validate(cfg.plant->n(), cfg.plant->m());
  return cfg;
}

inline DesignOptions design_options(const RunConfig& cfg, Design d) {
  DesignOptions o;
  o.design = d;
  o.subspace = cfg.subspace;
  o.sharing = cfg.sharing;
  o.eta = cfg.eta;
  o.solver = cfg.solver;
  return o;
}

/// Seeded excitation and trajectory from the configured plant.
inline Simulation simulate_from(const RunConfig& cfg, double eps, Index samples,
                                std::uint64_t seed) {
  const PlantPair& plant = cfg.require_plant();
  const Vector x0 = cfg.noise.x0 ? *cfg.noise.x0 : Vector::Unit(plant.n(), 0);
  if (x0.size() != plant.n()) throw ConfigError("noise.x0 has the wrong length");
  const Matrix u = uniform_inputs(plant.m(), samples, cfg.noise.input_amplitude, seed);
  return simulate(plant, x0, u, eps, seed, cfg.noise.exponent,
                  cfg.noise.sphere ? NoiseShape::Sphere : NoiseShape::Ball);
}

inline DataBatch batch_for(const RunConfig& cfg) {
  if (cfg.data_dir && fs::exists(*cfg.data_dir / "xminus.csv")) return read_batch(*cfg.data_dir);
  if (!cfg.plant) throw ConfigError("data mode needs data_dir or a plant to simulate from");
  return simulate_from(cfg, cfg.noise.eps, cfg.noise.T, cfg.noise.seed).batch;
}

inline void write_result(const fs::path& dir, Design d, const SynthesisResult& r) {
  fs::create_directories(dir);
  json j;
  j["design"] = to_string(d);
  j["status"] = sdp::to_string(r.status);
  if (r.optimal()) {
    j["gamma"] = r.gamma;
    j["alpha"] = r.alpha;
    j["beta"] = r.beta;
    csv::write_matrix(dir / "K.csv", r.K);
    csv::write_matrix(dir / "P.csv", r.P);
    csv::write_matrix(dir / "Q.csv", r.Q);
    csv::write_matrix(dir / "R.csv", r.R);
    csv::write_matrix(dir / "L.csv", r.L);
  } else {
    j["gamma"] = nullptr;
    if (r.status == sdp::Status::Infeasible) j["certificate_residual"] = r.certificate_residual;
  }
  j["iterations"] = r.iterations;
  j["warnings"] = r.warnings;
  std::ofstream(dir / "result.json") << j.dump(2) << '\n';
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  const auto sim = simulate_from(cfg, cfg.noise.eps, cfg.noise.T, cfg.noise.seed);
  const fs::path dir = cfg.data_dir ? *cfg.data_dir : cfg.output_dir / "data";
  write_batch(dir, sim.batch);
  const double res = data_equation_residual(cfg.require_plant(), sim.batch, sim.wminus);
  out << "T=" << sim.batch.samples() << " eps=" << detail::format_short(cfg.noise.eps)
      << " residual=" << detail::format_short(res) << " dir=" << dir.string() << "\n";
  return kOk;
}

inline SynthesisResult run_design(const RunConfig& cfg, Design d, const DataBatch* batch,
                                  const fs::path* dump_to = nullptr) {
  DesignOptions o = design_options(cfg, d);
  if (dump_to) {
    o.inspect = [dump_to](const lmi::ConicForm& f) {
      fs::create_directories(dump_to->parent_path());
      std::ofstream os(*dump_to);
      f.dump(os);
    };
  }
  if (batch) return design_data(*batch, cfg.require_spec(), o);
  return design_model(cfg.require_plant(), cfg.require_spec(), o);
}

inline int cmd_design(const RunConfig& cfg, std::ostream& out) {
  std::optional<DataBatch> batch;
  if (cfg.data_mode) batch = batch_for(cfg);
  cfg.require_spec();
  if (!cfg.data_mode) cfg.require_plant();
  std::vector<SynthesisResult> results(cfg.designs.size());
  detail::parallel_for(cfg.designs.size(), [&](std::size_t i) {
    const Design d = cfg.designs[i];
    const fs::path dump = cfg.output_dir / to_string(d) / "conic.txt";
    results[i] = run_design(cfg, d, batch ? &*batch : nullptr, cfg.dump_conic ? &dump : nullptr);
  });
  bool any_optimal = false;
  for (std::size_t i = 0; i < cfg.designs.size(); ++i) {
    const Design d = cfg.designs[i];
    const auto& r = results[i];
    write_result(cfg.output_dir / to_string(d), d, r);
    out << "design=" << to_string(d) << " gamma="
        << (r.optimal() ? detail::format_gamma(r.gamma)
                        : (r.status == sdp::Status::Infeasible ? "Infeasible" : "n/a"))
        << " status=" << sdp::to_string(r.status);
    if (r.optimal()) {
      any_optimal = true;
      if (cfg.data_mode) {
        out << " alpha=" << detail::format_short(r.alpha) << " beta=" << detail::format_short(r.beta);
      }
      if (cfg.sharing) {
        out << " sharing=" << detail::format_short(r.K.colwise().sum().cwiseAbs().maxCoeff());
      }
    }
    out << "\n";
    for (const auto& w : r.warnings) out << "  warning: " << w << "\n";
  }
  return any_optimal ? kOk : kAllInfeasible;
}

struct SweepTable {
  std::vector<std::string> columns;              // first is "model"
  std::vector<std::string> rows;                 // design names
  std::vector<std::vector<std::string>> cells;   // rows × columns

  std::string text() const {
    std::vector<std::size_t> width(columns.size() + 1, 0);
    width[0] = std::string("design").size();
    for (const auto& r : rows) width[0] = std::max(width[0], r.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      width[c + 1] = columns[c].size();
      for (const auto& row : cells) width[c + 1] = std::max(width[c + 1], row[c].size());
    }
    std::ostringstream os;
    auto line = [&](const std::string& head, const std::vector<std::string>& vals) {
      os << std::left << std::setw(static_cast<int>(width[0])) << head;
      for (std::size_t c = 0; c < vals.size(); ++c) {
        os << "  " << std::right << std::setw(static_cast<int>(width[c + 1])) << vals[c];
      }
      os << "\n";
    };
    line("design", columns);
    for (std::size_t r = 0; r < rows.size(); ++r) line(rows[r], cells[r]);
    return os.str();
  }

  std::string csv() const {
    std::ostringstream os;
    os << "design";
    for (const auto& c : columns) os << "," << c;
    os << "\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
      os << rows[r];
      for (const auto& v : cells[r]) os << "," << v;
      os << "\n";
    }
    return os.str();
  }
};

/// Grid of (ε, T) cells. Each ε gets its own trajectory of length max T and
/// every T reuses its first T samples.
inline SweepTable sweep(const RunConfig& cfg) {
  const PlantPair& plant = cfg.require_plant();
  const PerformanceSpec& spec = cfg.require_spec();
  const std::vector<double> eps = cfg.sweep_eps.empty() ? std::vector<double>{cfg.noise.eps}
                                                        : cfg.sweep_eps;
  const std::vector<Index> ts = cfg.sweep_T.empty() ? std::vector<Index>{cfg.noise.T} : cfg.sweep_T;
  const Index t_max = *std::max_element(ts.begin(), ts.end());

  std::vector<Simulation> sims;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    sims.push_back(simulate_from(cfg, eps[i], t_max, structh2::detail::mix_seed(cfg.noise.seed, i)));
  }

  SweepTable table;
  table.columns.push_back("model");
  struct Cell {
    std::size_t eps_index;
    Index samples;
  };
  std::vector<Cell> grid;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    for (Index t : ts) {
      grid.push_back({i, t});
      std::string label;
      if (eps.size() > 1 || ts.size() == 1) label += "eps=" + detail::format_short(eps[i]);
      if (ts.size() > 1) label += std::string(label.empty() ? "" : ",") + "T=" + std::to_string(t);
      table.columns.push_back(label);
    }
  }
  for (Design d : cfg.designs) table.rows.push_back(to_string(d));

  const std::size_t nd = cfg.designs.size();
  const std::size_t ncols = grid.size() + 1;
  std::vector<SynthesisResult> results(nd * ncols);
  detail::parallel_for(results.size(), [&](std::size_t k) {
    const std::size_t r = k / ncols;
    const std::size_t c = k % ncols;
    const Design d = cfg.designs[r];
    if (c == 0) {
      results[k] = design_model(plant, spec, design_options(cfg, d));
    } else {
      const Cell& cell = grid[c - 1];
      const DataBatch batch = sims[cell.eps_index].batch.prefix(cell.samples);
      results[k] = design_data(batch, spec, design_options(cfg, d));
    }
  });
  table.cells.assign(nd, std::vector<std::string>(ncols));
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& res = results[k];
    std::string v;
    if (res.optimal()) {
      v = detail::format_gamma(res.gamma);
    } else if (res.status == sdp::Status::Infeasible) {
      v = "Infeasible";
    } else {
      v = sdp::to_string(res.status);
    }
    table.cells[k / ncols][k % ncols] = v;
  }
  return table;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
  const SweepTable table = sweep(cfg);
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "sweep.txt") << table.text();
  std::ofstream(cfg.output_dir / "sweep.csv") << table.csv();
  out << table.text();
  return kOk;
}

inline int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  std::optional<fs::path> k_file = cfg.verify.k_file;
  std::optional<double> gamma = cfg.verify.gamma;
  if (cfg.verify.result_dir) {
    if (!k_file) k_file = *cfg.verify.result_dir / "K.csv";
    if (!gamma) {
      std::ifstream in(*cfg.verify.result_dir / "result.json");
      if (!in) throw ConfigError("cannot open " + (*cfg.verify.result_dir / "result.json").string());
      json r;
      try {
        r = json::parse(in);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("result.json: ") + e.what());
      }
      if (r.contains("gamma") && r["gamma"].is_number()) gamma = r["gamma"].get<double>();
    }
  }
  if (!k_file) throw ConfigError("verify needs verify.K or verify.result");
  if (!fs::exists(*k_file)) throw ConfigError("K file not found: " + k_file->string());
  const Matrix K = csv::read_matrix(*k_file);
  const PerformanceSpec& spec = cfg.require_spec();

  VerificationReport rep;
  if (cfg.data_mode) {
    const DataBatch batch = batch_for(cfg);
    if (!gamma) throw ConfigError("data verification needs a gamma bound");
    rep = verify_data(batch, spec, K, *gamma * cfg.verify.gamma_scale, cfg.verify.samples,
                      cfg.noise.seed, cfg.subspace, cfg.sharing, cfg.plant);
  } else {
    rep = verify_model(cfg.require_plant(), spec, K, cfg.subspace, cfg.sharing);
    if (gamma) {
      rep.gamma = *gamma * cfg.verify.gamma_scale;
      if (rep.h2.finite && rep.h2.value > *rep.gamma * (1.0 + 1e-4)) {
        rep.violations.push_back("H2 norm " + std::to_string(rep.h2.value) + " above " +
                                 std::to_string(*rep.gamma));
      }
    }
  }
  fs::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "report.json") << to_json(rep).dump(2) << '\n';
  out << "verify passed=" << (rep.passed() ? "true" : "false")
      << " stable=" << (rep.stable ? "true" : "false")
      << " h2=" << (rep.h2.finite ? detail::format_short(rep.h2.value) : "inf")
      << " samples=" << rep.samples_checked << " violations=" << rep.violations.size() << "\n";
  return rep.passed() ? kOk : kVerificationFailed;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured H2 state-feedback design from models or noisy data"};
  app.require_subcommand(1, 1);
  std::optional<std::string> config;
  Overrides ov;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta;
  std::optional<std::string> designs;
  std::optional<int> exponent;
  std::optional<std::string> plant;
  std::optional<std::string> output;
  bool sharing = false;

  std::vector<CLI::App*> subs;
  for (const char* name : {"simulate", "design", "sweep", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON configuration file");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--eta", eta, "strictness margin");
    sub->add_option("--design", designs, "comma-separated subset of D1,D2,D3,D4");
    sub->add_flag("--sharing", sharing, "enforce 1'K = 0");
    sub->add_option("--exponent", exponent, "noise bound exponent (1 or 2)");
    sub->add_option("--plant", plant, "builtin plant (example1)");
    sub->add_option("--output", output, "output directory");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
  ov.seed = seed;
  ov.eta = eta;
  ov.designs = designs;
  ov.sharing = sharing;
  ov.exponent = exponent;
  ov.plant = plant;
  ov.output = output;

  RunConfig cfg;
  try {
    cfg = load_config(config ? std::optional<fs::path>(*config) : std::nullopt, ov);
    if (!config && !plant) throw ConfigError("--config or --plant is required");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "simulate") return cmd_simulate(cfg, out);
    if (cmd == "design") return cmd_design(cfg, out);
    if (cmd == "sweep") return cmd_sweep(cfg, out);
    return cmd_verify(cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace structh2::cli
