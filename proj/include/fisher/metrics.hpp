#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fisher/instances.hpp"
#include "fisher/market.hpp"
#include "fisher/pr_solvers.hpp"

namespace fisher {

// One observational snapshot of a run. Metric evaluation never counts
// toward the work column; work is whatever the solver had charged when the
// snapshot was taken, snapped to the checkpoint grid.
struct MetricsRecord {
  std::string algo;
  std::uint64_t seed = 0;
  long long work = 0;
  double duality_gap = 0.0;
  std::optional<double> utility_gap;  // absent when no reference is known
  double supply_res = 0.0;
  double budget_res = 0.0;
  double bpb_res = 0.0;
};

inline void write_metrics_csv(const std::vector<MetricsRecord>& records,
                              std::ostream& out) {
  out << "algo,seed,work,duality_gap,utility_gap,supply_res,budget_res,bpb_res\n";
  for (const auto& r : records) {
    out << r.algo << ',' << r.seed << ',' << r.work << ','
        << detail::fmt_double(r.duality_gap) << ',';
    if (r.utility_gap) out << detail::fmt_double(*r.utility_gap);
    out << ',' << detail::fmt_double(r.supply_res) << ','
        << detail::fmt_double(r.budget_res) << ','
        << detail::fmt_double(r.bpb_res) << '\n';
  }
}

inline void write_metrics_csv(const std::vector<MetricsRecord>& records,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoCode::FileNotFound, "cannot open for write: " + path);
  write_metrics_csv(records, out);
  if (!out) throw IoError(IoCode::FileNotFound, "write failed: " + path);
}

inline std::string metrics_csv_string(const std::vector<MetricsRecord>& records) {
  std::ostringstream ss;
  write_metrics_csv(records, ss);
  return ss.str();
}

// Equilibrium-candidate prices supported by an allocation. Linear: the
// max bang-per-buck rule p_j = max_i (B_i / u_i) v_ij. CES: the marginal
// analogue p_j = max_i B_i v_ij x_ij^(rho-1) / u_i(rho) over buyers that
// hold the item (x^(rho-1) diverges at zero; projections produce exact
// zeros, so the holder set is well-defined). u must be the true inner-sum
// utilities of x, all positive.
inline std::vector<double> prices_from_allocation(const MarketInstance& inst,
                                                  const Mat& x,
                                                  const std::vector<double>& u) {
  for (double ui : u)
    if (!(ui > 0.0))
      throw std::invalid_argument("prices_from_allocation: utility not positive");
  std::vector<double> p(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j) {
    double pj = 0.0;
    for (int i = 0; i < inst.n; ++i) {
      const double v = inst.valuations(i, j);
      if (v == 0.0) continue;
      if (inst.utility == Utility::Linear) {
        pj = std::max(pj, inst.budgets[i] / u[i] * v);
      } else if (x(i, j) > 0.0) {
        pj = std::max(pj, inst.budgets[i] * v *
                              std::pow(x(i, j), inst.rho - 1.0) / u[i]);
      }
    }
    p[j] = pj;
  }
  return p;
}

// Duality gap of the smoothed EG program at (p, u): best dual objective the
// price vector certifies minus the primal value. Nonnegative for every
// feasible u and positive p (weak duality); zero exactly at equilibrium.
// Linear dual: sum_j p_j + sum_i B_i log(B_i / beta_i) - sum_i B_i with
// beta_i = min over supp(i) of p_j / v_ij. CES dual replaces the beta term
// by ((1-rho)/rho) B_i log G_i with G_i = sum_supp v^(1/(1-rho)) p^(-rho/(1-rho)),
// the closed-form inner maximization of the Lagrangian.
inline double duality_gap_raw(const MarketInstance& inst,
                              const std::vector<double>& prices,
                              const std::vector<double>& u) {
  double dual = 0.0;
  for (double pj : prices) dual += pj;
  double primal = 0.0;
  if (inst.utility == Utility::Linear) {
    for (int i = 0; i < inst.n; ++i) {
      double beta = std::numeric_limits<double>::infinity();
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.valuations(i, j);
        if (v > 0.0) beta = std::min(beta, prices[j] / v);
      }
      if (!(beta > 0.0))
        throw std::invalid_argument("duality_gap: nonpositive price on support");
      const double bi = inst.budgets[i];
      dual += bi * std::log(bi / beta) - bi;
      primal += bi * std::log(u[i]);
    }
  } else {
    const double r = inst.rho;
    for (int i = 0; i < inst.n; ++i) {
      double gsum = 0.0;
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.valuations(i, j);
        if (v == 0.0) continue;
        if (!(prices[j] > 0.0))
          throw std::invalid_argument("duality_gap: nonpositive price on support");
        gsum += std::pow(v, 1.0 / (1.0 - r)) *
                std::pow(prices[j], -r / (1.0 - r));
      }
      const double bi = inst.budgets[i];
      dual += bi * std::log(bi) + (1.0 - r) / r * bi * std::log(gsum) - bi;
      primal += bi / r * std::log(u[i]);
    }
  }
  return dual - primal;
}

inline double duality_gap(const MarketInstance& inst,
                          const std::vector<double>& prices,
                          const std::vector<double>& u) {
  return std::max(duality_gap_raw(inst, prices, u), 0.0);
}

// Mean relative utility error against a reference profile.
inline double utility_gap(const std::vector<double>& u,
                          const std::vector<double>& ref) {
  if (u.size() != ref.size())
    throw std::invalid_argument("utility_gap: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(ref[i] > 0.0))
      throw std::invalid_argument("utility_gap: reference utility not positive");
    s += std::abs(u[i] - ref[i]) / ref[i];
  }
  return s / static_cast<double>(u.size());
}

// Market-equilibrium residuals of (x, p): worst item oversupply/undersupply,
// worst relative budget violation, and worst relative bang-per-buck
// suboptimality among purchased items (marginal rates for CES). Items with
// p_j = 0 are excluded from the ratio computations.
struct Residuals {
  double supply = 0.0;
  double budget = 0.0;
  double bang_per_buck = 0.0;
};

inline Residuals me_residuals(const MarketInstance& inst, const Mat& x,
                              const std::vector<double>& prices) {
  Residuals r;
  for (int j = 0; j < inst.m; ++j) {
    if (!(prices[j] > 0.0)) continue;
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += x(i, j);
    r.supply = std::max(r.supply, std::abs(s - 1.0));
  }
  for (int i = 0; i < inst.n; ++i) {
    double spend = 0.0;
    for (int j = 0; j < inst.m; ++j) spend += prices[j] * x(i, j);
    r.budget = std::max(r.budget,
                        std::abs(spend - inst.budgets[i]) / inst.budgets[i]);
  }
  constexpr double kHolds = 1e-9;  // entries below this do not count as purchases
  for (int i = 0; i < inst.n; ++i) {
    double best = 0.0, worst = std::numeric_limits<double>::infinity();
    for (int j = 0; j < inst.m; ++j) {
      if (!(prices[j] > 0.0)) continue;
      const double v = inst.valuations(i, j);
      if (inst.utility == Utility::Linear) {
        const double rate = v / prices[j];
        best = std::max(best, rate);
        if (x(i, j) > kHolds) worst = std::min(worst, rate);
      } else if (x(i, j) > kHolds && v > 0.0) {
        const double rate = v * std::pow(x(i, j), inst.rho - 1.0) / prices[j];
        best = std::max(best, rate);
        worst = std::min(worst, rate);
      }
    }
    if (best > 0.0 && std::isfinite(worst))
      r.bang_per_buck = std::max(r.bang_per_buck, (best - worst) / best);
  }
  return r;
}

inline Mat allocation_from_bids(const MarketInstance& inst, const Mat& b,
                                const std::vector<double>& prices) {
  Mat x(inst.n, inst.m);
  for (int j = 0; j < inst.m; ++j) {
    if (!(prices[j] > 0.0))
      throw std::invalid_argument("allocation_from_bids: nonpositive price");
    for (int i = 0; i < inst.n; ++i) x(i, j) = b(i, j) / prices[j];
  }
  return x;
}

namespace detail {

// Shared snapshot body once the measuring side has fixed its price vector:
// EG iterates carry no prices and derive the max-bang-per-buck ones, bid
// iterates are measured at the actual bid prices (column sums).
inline MetricsRecord measure_at_prices(const MarketInstance& inst, const Mat& x,
                                       const std::vector<double>& prices,
                                       const std::vector<double>& u,
                                       const std::string& algo,
                                       std::uint64_t seed, long long work,
                                       const std::vector<double>* ref_utilities) {
  MetricsRecord rec;
  rec.algo = algo;
  rec.seed = seed;
  rec.work = work;
  rec.duality_gap = duality_gap(inst, prices, u);
  const Residuals res = me_residuals(inst, x, prices);
  rec.supply_res = res.supply;
  rec.budget_res = res.budget;
  rec.bpb_res = res.bang_per_buck;
  if (ref_utilities) {
    std::vector<double> ru = u;
    if (inst.utility == Utility::Ces)
      for (double& v : ru) v = std::pow(v, 1.0 / inst.rho);
    rec.utility_gap = utility_gap(ru, *ref_utilities);
  }
  return rec;
}

inline MetricsRecord degenerate_record(const std::string& algo,
                                       std::uint64_t seed, long long work) {
  MetricsRecord rec;
  rec.algo = algo;
  rec.seed = seed;
  rec.work = work;
  rec.duality_gap = std::numeric_limits<double>::infinity();
  rec.supply_res = rec.budget_res = rec.bpb_res =
      std::numeric_limits<double>::infinity();
  return rec;
}

}  // namespace detail

// Full metric snapshot of an allocation; utilities are recomputed exactly
// (never from solver caches). ref_utilities, when given, are in reported
// units (CES utilities raised to 1/rho).
inline MetricsRecord measure_allocation(const MarketInstance& inst, const Mat& x,
                                        const std::string& algo,
                                        std::uint64_t seed, long long work,
                                        const std::vector<double>* ref_utilities) {
  const std::vector<double> u = compute_utilities(inst, x);
  for (double ui : u)
    if (!(ui > 0.0)) return detail::degenerate_record(algo, seed, work);
  const std::vector<double> p = prices_from_allocation(inst, x, u);
  return detail::measure_at_prices(inst, x, p, u, algo, seed, work,
                                   ref_utilities);
}

// Bid-side snapshot: prices are the exact column sums of b (cached solver
// prices are not trusted here), the allocation is b/p.
inline MetricsRecord measure_bids(const MarketInstance& inst, const Mat& b,
                                  const std::string& algo, std::uint64_t seed,
                                  long long work,
                                  const std::vector<double>* ref_utilities) {
  std::vector<double> p(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j) {
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += b(i, j);
    p[j] = s;
  }
  const Mat x = allocation_from_bids(inst, b, p);
  const std::vector<double> u = compute_utilities(inst, x);
  for (double ui : u)
    if (!(ui > 0.0)) return detail::degenerate_record(algo, seed, work);
  return detail::measure_at_prices(inst, x, p, u, algo, seed, work,
                                   ref_utilities);
}

// High-accuracy reference equilibrium computed by the most reliable method
// per family: full mirror descent with line search (linear) or full CES
// proportional response, both deterministic. Results are memoized in-process
// and optionally persisted as a JSON sidecar keyed by instance fingerprint;
// a second call with the same arguments returns the cached record verbatim.
struct ReferenceResult {
  std::vector<double> utilities;  // reported units (CES: inner sum^(1/rho))
  std::vector<double> prices;
  Mat bids;
  double phi = 0.0;  // Shmyrev objective at the reference bids
  double gap = std::numeric_limits<double>::infinity();
  long long work = 0;
  bool converged = false;
};

struct RefOptions {
  double tol = -1.0;            // default: 1e-10 linear, 1e-8 CES
  long long max_steps = 200000;  // full-matrix iterations
  std::string cache_dir;        // empty: in-process memo only
};

namespace detail {

inline ReferenceResult compute_reference(const MarketInstance& inst,
                                         double tol, long long max_steps) {
  PrParams params;
  params.grow = 2.0;  // full-matrix search growth
  PrSolverState st = init_bids(inst, 0, params);
  ReferenceResult out;
  // The line-searched phase descends fast, but its sufficient-decrease slack
  // admits micro-increases once true per-step decreases fall below roundoff,
  // so the measured gap plateaus around 1e-6 instead of polishing. Pinning
  // alpha = 1 afterwards turns the update into the plain proportional
  // response contraction, which drives the gap to the floating-point floor.
  const double polish_at = std::max(tol, 1e-6);
  bool polishing = inst.utility != Utility::Linear;
  const auto enter_polish = [&st, &polishing] {
    st.params.alpha_max = 1.0;
    st.md_alpha = 1.0;
    polishing = true;
  };
  for (long long k = 0; k < max_steps; ++k) {
    if (!polishing && k >= max_steps / 4) enter_polish();
    if (inst.utility == Utility::Linear)
      prls_step(st, inst);
    else
      pr_ces_step(st, inst);
    const MetricsRecord rec = measure_bids(inst, st.b, "ref", 0, st.work, nullptr);
    if (rec.duality_gap <= tol) {
      out.converged = true;
      break;
    }
    if (!polishing && rec.duality_gap <= polish_at) enter_polish();
  }
  out.work = st.work;
  out.bids = st.b;
  out.prices.assign(inst.m, 0.0);
  for (int j = 0; j < inst.m; ++j) {
    double s = 0.0;
    for (int i = 0; i < inst.n; ++i) s += st.b(i, j);
    out.prices[j] = s;
  }
  const Mat x = allocation_from_bids(inst, st.b, out.prices);
  const std::vector<double> u = compute_utilities(inst, x);
  out.gap = duality_gap(inst, out.prices, u);
  out.utilities = u;
  if (inst.utility == Utility::Ces)
    for (double& v : out.utilities) v = std::pow(v, 1.0 / inst.rho);
  out.phi = shmyrev_objective(inst, st.b);
  return out;
}

inline nlohmann::json reference_to_json(const ReferenceResult& r) {
  nlohmann::json j;
  j["utilities"] = r.utilities;
  j["prices"] = r.prices;
  j["bids"] = r.bids.a;
  j["bids_rows"] = r.bids.rows;
  j["bids_cols"] = r.bids.cols;
  j["phi"] = r.phi;
  j["gap"] = r.gap;
  j["work"] = r.work;
  j["converged"] = r.converged;
  return j;
}

inline ReferenceResult reference_from_json(const nlohmann::json& j) {
  ReferenceResult r;
  r.utilities = j.at("utilities").get<std::vector<double>>();
  r.prices = j.at("prices").get<std::vector<double>>();
  r.bids.rows = j.at("bids_rows").get<int>();
  r.bids.cols = j.at("bids_cols").get<int>();
  r.bids.a = j.at("bids").get<std::vector<double>>();
  r.phi = j.at("phi").get<double>();
  r.gap = j.at("gap").get<double>();
  r.work = j.at("work").get<long long>();
  r.converged = j.at("converged").get<bool>();
  return r;
}

}  // namespace detail

inline ReferenceResult reference_equilibrium(const MarketInstance& inst,
                                             const RefOptions& opts = {}) {
  const double tol =
      opts.tol >= 0.0 ? opts.tol : (inst.utility == Utility::Ces ? 1e-8 : 1e-10);
  std::ostringstream key;
  key << std::hex << instance_fingerprint(inst) << '-' << std::hexfloat << tol
      << '-' << std::dec << opts.max_steps;

  static std::mutex mu;
  static std::map<std::string, ReferenceResult> memo;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = memo.find(key.str());
    if (it != memo.end()) return it->second;
  }

  const std::string cache_path =
      opts.cache_dir.empty() ? std::string()
                             : opts.cache_dir + "/ref-" + key.str() + ".json";
  if (!cache_path.empty()) {
    std::ifstream in(cache_path, std::ios::binary);
    if (in) {
      nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
      if (!j.is_discarded()) {
        ReferenceResult r = detail::reference_from_json(j);
        std::lock_guard<std::mutex> lock(mu);
        memo[key.str()] = r;
        return r;
      }
    }
  }

  ReferenceResult r = detail::compute_reference(inst, tol, opts.max_steps);
  if (!cache_path.empty()) {
    std::ofstream out(cache_path, std::ios::binary);
    if (out) out << detail::reference_to_json(r).dump() << '\n';
  }
  std::lock_guard<std::mutex> lock(mu);
  memo[key.str()] = r;
  return r;
}

}  // namespace fisher
