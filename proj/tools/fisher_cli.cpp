// Command-line driver: generate market instances, run one solver with
// checkpointed metrics, or sweep algorithms x seeds and aggregate.
//
// Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 work budget
// exhausted before a requested tolerance was reached.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fisher/fisher.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitBudget = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --gen "linear,n=50,m=50,seed=1[,sigma=1][,noise=1]" or
// --gen "ces,n=20,m=20,seed=3[,rho=0.5][,sigma=0.2][,noise=0.2]"
fisher::GeneratorSpec parse_gen_spec(const std::string& text) {
  fisher::GeneratorSpec spec;
  std::stringstream ss(text);
  std::string tok;
  bool first = true;
  while (std::getline(ss, tok, ',')) {
    if (first) {
      if (tok == "linear")
        spec.kind = fisher::Utility::Linear;
      else if (tok == "ces")
        spec.kind = fisher::Utility::Ces;
      else
        throw ConfigError("unknown generator kind '" + tok + "'");
      first = false;
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string::npos)
      throw ConfigError("bad generator field '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    try {
      if (key == "n")
        spec.n = std::stoi(val);
      else if (key == "m")
        spec.m = std::stoi(val);
      else if (key == "seed")
        spec.seed = std::stoull(val);
      else if (key == "sigma")
        spec.sigma = std::stod(val);
      else if (key == "noise")
        spec.noise = std::stod(val);
      else if (key == "rho")
        spec.rho = std::stod(val);
      else
        throw ConfigError("unknown generator field '" + key + "'");
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad value for generator field '" + key + "'");
    }
  }
  if (first) throw ConfigError("empty generator spec");
  if (spec.n <= 0 || spec.m <= 0)
    throw ConfigError("generator spec needs positive n and m");
  return spec;
}

struct SolveArgs {
  std::string algo;
  std::string instance_path;
  std::string gen_spec;
  std::string out_path;
  std::string config_path;
  std::uint64_t seed = 0;
  long long work_budget = 0;
  long long checkpoint = 0;
  double tol = 0.0;
  double rho_minus = NAN, rho_plus = NAN, delta = NAN;
  double alpha_max = NAN, alpha_bar = NAN;
  bool with_ref = false;
  double ref_tol = -1.0;
};

// --config JSON file fills any field the command line left at its default.
void merge_config_file(SolveArgs& a) {
  if (a.config_path.empty()) return;
  std::ifstream in(a.config_path);
  if (!in) throw fisher::IoError(fisher::IoCode::FileNotFound,
                                 "cannot open config: " + a.config_path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ConfigError("config file is not a JSON object: " + a.config_path);
  const auto str = [&](const char* k, std::string& dst) {
    if (dst.empty() && j.contains(k)) dst = j[k].get<std::string>();
  };
  str("algo", a.algo);
  str("instance", a.instance_path);
  str("gen", a.gen_spec);
  str("out", a.out_path);
  if (a.seed == 0 && j.contains("seed")) a.seed = j["seed"].get<std::uint64_t>();
  if (a.work_budget == 0 && j.contains("work_budget"))
    a.work_budget = j["work_budget"].get<long long>();
  if (a.checkpoint == 0 && j.contains("checkpoint"))
    a.checkpoint = j["checkpoint"].get<long long>();
  if (a.tol == 0.0 && j.contains("tol")) a.tol = j["tol"].get<double>();
  const auto num = [&](const char* k, double& dst) {
    if (std::isnan(dst) && j.contains(k)) dst = j[k].get<double>();
  };
  num("rho_minus", a.rho_minus);
  num("rho_plus", a.rho_plus);
  num("delta", a.delta);
  num("alpha_max", a.alpha_max);
  num("alpha_bar", a.alpha_bar);
  if (!a.with_ref && j.contains("with_ref")) a.with_ref = j["with_ref"].get<bool>();
  if (a.ref_tol < 0.0 && j.contains("ref_tol")) a.ref_tol = j["ref_tol"].get<double>();
}

fisher::MarketInstance resolve_instance(const std::string& path,
                                        const std::string& gen) {
  if (!path.empty() && !gen.empty())
    throw ConfigError("give either --instance or --gen, not both");
  if (!path.empty()) return fisher::load_instance(path);
  if (!gen.empty()) return fisher::generate_low_rank(parse_gen_spec(gen));
  throw ConfigError("an instance is required (--instance or --gen)");
}

fisher::RunConfig to_run_config(const SolveArgs& a) {
  fisher::RunConfig cfg;
  const auto algo = fisher::algo_from_name(a.algo);
  if (!algo) throw ConfigError("unknown algorithm '" + a.algo + "'");
  cfg.algo = *algo;
  cfg.seed = a.seed;
  cfg.work_budget = a.work_budget;
  cfg.checkpoint_every = a.checkpoint;
  cfg.tol = a.tol;
  cfg.rho_minus = a.rho_minus;
  cfg.rho_plus = a.rho_plus;
  cfg.delta = a.delta;
  cfg.alpha_max = a.alpha_max;
  cfg.alpha_bar = a.alpha_bar;
  return cfg;
}

int cmd_generate(const std::string& gen, const std::string& out) {
  const fisher::MarketInstance inst = fisher::generate_low_rank(parse_gen_spec(gen));
  fisher::save_instance(inst, out);
  std::cout << "wrote " << out << " (" << inst.n << " buyers, " << inst.m
            << " items, " << (inst.utility == fisher::Utility::Ces ? "ces" : "linear")
            << ")\n";
  return kExitOk;
}

int cmd_solve(SolveArgs a) {
  merge_config_file(a);
  const fisher::MarketInstance inst =
      resolve_instance(a.instance_path, a.gen_spec);
  const fisher::RunConfig cfg = to_run_config(a);

  std::vector<double> ref_u;
  const std::vector<double>* ref_ptr = nullptr;
  if (a.with_ref || a.ref_tol >= 0.0) {
    fisher::RefOptions opts;
    opts.tol = a.ref_tol;
    if (!a.instance_path.empty()) {
      const auto slash = a.instance_path.find_last_of('/');
      opts.cache_dir =
          slash == std::string::npos ? "." : a.instance_path.substr(0, slash);
    }
    const fisher::ReferenceResult ref = fisher::reference_equilibrium(inst, opts);
    if (ref.converged) {
      ref_u = ref.utilities;
      ref_ptr = &ref_u;
    } else {
      std::cerr << "warning: reference did not converge (gap " << ref.gap
                << "); utility gap omitted\n";
    }
  }

  const fisher::RunResult res = fisher::run_solver(inst, cfg, ref_ptr);
  if (!a.out_path.empty()) fisher::write_metrics_csv(res.records, a.out_path);

  std::printf("%s seed=%llu work=%lld gap=%.3e%s wall=%.3fs\n",
              fisher::algo_name(cfg.algo),
              static_cast<unsigned long long>(cfg.seed), res.work,
              res.final_gap, res.reached_tol ? " (tol reached)" : "",
              res.wall_seconds);
  if (cfg.tol > 0.0 && !res.reached_tol) return kExitBudget;
  return kExitOk;
}

int cmd_compare(const std::string& algos_csv, int seeds,
                const std::string& instance_path, const std::string& gen,
                long long work_budget, long long checkpoint, const std::string& out,
                bool with_ref) {
  const fisher::MarketInstance inst = resolve_instance(instance_path, gen);

  std::vector<fisher::Algo> algos;
  std::stringstream ss(algos_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto a = fisher::algo_from_name(tok);
    if (!a) throw ConfigError("unknown algorithm '" + tok + "'");
    algos.push_back(*a);
  }
  if (algos.empty()) throw ConfigError("--algos must name at least one algorithm");
  if (seeds <= 0) throw ConfigError("--seeds must be positive");

  std::vector<double> ref_u;
  const std::vector<double>* ref_ptr = nullptr;
  if (with_ref) {
    const fisher::ReferenceResult ref = fisher::reference_equilibrium(inst);
    if (ref.converged) {
      ref_u = ref.utilities;
      ref_ptr = &ref_u;
    }
  }

  std::vector<fisher::MetricsRecord> all;
  for (const fisher::Algo algo : algos)
    for (int s = 0; s < seeds; ++s) {
      fisher::RunConfig cfg;
      cfg.algo = algo;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.work_budget = work_budget;
      cfg.checkpoint_every = checkpoint;
      const fisher::RunResult res = fisher::run_solver(inst, cfg, ref_ptr);
      all.insert(all.end(), res.records.begin(), res.records.end());
      std::printf("%-12s seed=%d work=%lld gap=%.3e\n", fisher::algo_name(algo),
                  s, res.work, res.final_gap);
    }

  const auto cells = fisher::aggregate_records(all);
  if (!out.empty()) {
    std::ofstream os(out, std::ios::binary);
    if (!os) throw fisher::IoError(fisher::IoCode::FileNotFound,
                                   "cannot open for write: " + out);
    fisher::write_compare_csv(cells, os);
  } else {
    fisher::write_compare_csv(cells, std::cout);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fisher market equilibrium solvers"};
  app.require_subcommand(1);

  auto* gen_cmd = app.add_subcommand("generate", "generate a random instance");
  std::string gen_spec, gen_out;
  gen_cmd->add_option("--gen", gen_spec,
                      "generator spec, e.g. linear,n=50,m=50,seed=1")
      ->required();
  gen_cmd->add_option("--out", gen_out, "output instance path")->required();

  auto* solve_cmd = app.add_subcommand("solve", "run one solver with checkpoints");
  SolveArgs sa;
  solve_cmd->add_option("--algo", sa.algo, "algorithm name (see README)");
  solve_cmd->add_option("--instance", sa.instance_path, "instance file");
  solve_cmd->add_option("--gen", sa.gen_spec, "inline generator spec");
  solve_cmd->add_option("--seed", sa.seed, "solver seed");
  solve_cmd->add_option("--work-budget", sa.work_budget, "valuation-access budget");
  solve_cmd->add_option("--checkpoint", sa.checkpoint,
                        "metrics grid in work units (default n*m)");
  solve_cmd->add_option("--tol", sa.tol, "stop at this duality gap");
  solve_cmd->add_option("--out", sa.out_path, "metrics CSV path");
  solve_cmd->add_option("--rho-minus", sa.rho_minus, "line-search shrink factor");
  solve_cmd->add_option("--rho-plus", sa.rho_plus, "line-search growth factor");
  solve_cmd->add_option("--delta", sa.delta, "bid-step damping");
  solve_cmd->add_option("--alpha-max", sa.alpha_max, "mirror stepsize cap");
  solve_cmd->add_option("--alpha-bar", sa.alpha_bar, "adaptive stepsize cap");
  solve_cmd->add_option("--config", sa.config_path, "JSON config file");
  solve_cmd->add_flag("--with-ref", sa.with_ref,
                      "compute a reference equilibrium for utility gaps");
  solve_cmd->add_option("--ref-tol", sa.ref_tol, "reference duality gap target");

  auto* cmp_cmd = app.add_subcommand("compare", "sweep algorithms x seeds");
  std::string cmp_algos, cmp_instance, cmp_gen, cmp_out;
  int cmp_seeds = 1;
  long long cmp_budget = 0, cmp_checkpoint = 0;
  bool cmp_ref = false;
  cmp_cmd->add_option("--algos", cmp_algos, "comma-separated algorithm names")
      ->required();
  cmp_cmd->add_option("--seeds", cmp_seeds, "number of seeds (0..k-1)");
  cmp_cmd->add_option("--instance", cmp_instance, "instance file");
  cmp_cmd->add_option("--gen", cmp_gen, "inline generator spec");
  cmp_cmd->add_option("--work-budget", cmp_budget, "valuation-access budget")
      ->required();
  cmp_cmd->add_option("--checkpoint", cmp_checkpoint, "metrics grid");
  cmp_cmd->add_option("--out", cmp_out, "summary CSV path (default stdout)");
  cmp_cmd->add_flag("--with-ref", cmp_ref, "include utility gaps vs a reference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen_cmd->parsed()) return cmd_generate(gen_spec, gen_out);
    if (solve_cmd->parsed()) return cmd_solve(sa);
    return cmd_compare(cmp_algos, cmp_seeds, cmp_instance, cmp_gen, cmp_budget,
                       cmp_checkpoint, cmp_out, cmp_ref);
  } catch (const fisher::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
