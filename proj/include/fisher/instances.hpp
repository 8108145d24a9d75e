#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fisher/market.hpp"
#include "fisher/rng.hpp"

namespace fisher {

// Low-rank-plus-noise random market. Valuations are v_ij = max(f_i h_j + e_ij, 0)
// with buyer/item factors f, h ~ N(1, sigma^2) and noise e ~ U[0, noise);
// budgets are all 1. Defaults follow the utility family (sigma = noise = 1
// for linear, 0.2 for CES); negative sigma/noise select those defaults.
struct GeneratorSpec {
  Utility kind = Utility::Linear;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  double sigma = -1.0;
  double noise = -1.0;
  double rho = 0.5;  // CES only
};

inline MarketInstance generate_low_rank(const GeneratorSpec& spec) {
  if (spec.n <= 0 || spec.m <= 0)
    throw std::invalid_argument("generator: n and m must be positive");
  const double def = spec.kind == Utility::Ces ? 0.2 : 1.0;
  const double sigma = spec.sigma < 0.0 ? def : spec.sigma;
  const double noise = spec.noise < 0.0 ? def : spec.noise;

  MarketInstance inst;
  inst.n = spec.n;
  inst.m = spec.m;
  inst.utility = spec.kind;
  inst.rho = spec.kind == Utility::Ces ? spec.rho : 0.0;
  inst.budgets.assign(spec.n, 1.0);
  inst.valuations = Mat(spec.n, spec.m);

  // Fixed draw order (buyer factors, item factors, noise row-major) so a
  // seed pins the instance independently of any loop refactoring.
  Rng rng(spec.seed);
  std::vector<double> f(spec.n), h(spec.m);
  for (int i = 0; i < spec.n; ++i) f[i] = rng.normal(1.0, sigma);
  for (int j = 0; j < spec.m; ++j) h[j] = rng.normal(1.0, sigma);
  Mat raw(spec.n, spec.m);
  for (int i = 0; i < spec.n; ++i)
    for (int j = 0; j < spec.m; ++j) {
      raw(i, j) = f[i] * h[j] + rng.uniform(0.0, noise);
      inst.valuations(i, j) = std::max(raw(i, j), 0.0);
    }

  // Clamping can zero out a whole row or column, which no solver accepts.
  // Revive the entry that was closest to surviving; rows first, then
  // columns (a column fix only adds mass, so it cannot re-break a row).
  for (int i = 0; i < spec.n; ++i) {
    bool any = false;
    for (int j = 0; j < spec.m; ++j) any = any || inst.valuations(i, j) > 0.0;
    if (any) continue;
    int best = 0;
    for (int j = 1; j < spec.m; ++j)
      if (raw(i, j) > raw(i, best)) best = j;
    inst.valuations(i, best) = 1e-6;
  }
  for (int j = 0; j < spec.m; ++j) {
    bool any = false;
    for (int i = 0; i < spec.n; ++i) any = any || inst.valuations(i, j) > 0.0;
    if (any) continue;
    int best = 0;
    for (int i = 1; i < spec.n; ++i)
      if (raw(i, j) > raw(best, j)) best = i;
    inst.valuations(best, j) = 1e-6;
  }

  validate(inst);
  return inst;
}

enum class IoCode {
  FileNotFound,
  MalformedHeader,
  MalformedNumber,
  DimensionMismatch,
  NegativeValuation,
  InvalidInstance,
};

struct IoError : std::runtime_error {
  IoCode code;
  IoError(IoCode c, const std::string& what) : std::runtime_error(what), code(c) {}
};

namespace detail {

// Shortest-exact double formatting: %.17g always round-trips, but prefer
// fewer digits when they already parse back bitwise.
inline std::string fmt_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

inline double parse_double(const std::string& tok) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + tok.size())
    throw IoError(IoCode::MalformedNumber, "bad numeric field '" + tok + "'");
  return v;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

// Text format, UTF-8 with LF endings: a one-line JSON header
// {"kind","n","m"[,"rho"]}, then n CSV rows of m valuations, then one CSV
// row of n budgets. Doubles are written with shortest exact precision, so
// save/load round-trips bitwise.
inline std::string serialize_instance(const MarketInstance& inst) {
  nlohmann::json hdr;
  hdr["kind"] = inst.utility == Utility::Ces ? "ces" : "linear";
  hdr["n"] = inst.n;
  hdr["m"] = inst.m;
  if (inst.utility == Utility::Ces) hdr["rho"] = inst.rho;
  std::string out = hdr.dump();
  out += '\n';
  for (int i = 0; i < inst.n; ++i) {
    for (int j = 0; j < inst.m; ++j) {
      if (j) out += ',';
      out += detail::fmt_double(inst.valuations(i, j));
    }
    out += '\n';
  }
  for (int i = 0; i < inst.n; ++i) {
    if (i) out += ',';
    out += detail::fmt_double(inst.budgets[i]);
  }
  out += '\n';
  return out;
}

inline MarketInstance parse_instance(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw IoError(IoCode::MalformedHeader, "empty instance file");
  nlohmann::json hdr = nlohmann::json::parse(line, nullptr, false);
  if (hdr.is_discarded() || !hdr.is_object() || !hdr.contains("kind") ||
      !hdr.contains("n") || !hdr.contains("m") ||
      !hdr["n"].is_number_integer() || !hdr["m"].is_number_integer())
    throw IoError(IoCode::MalformedHeader, "bad instance header: " + line);

  MarketInstance inst;
  const std::string kind = hdr["kind"].get<std::string>();
  if (kind == "linear") {
    inst.utility = Utility::Linear;
  } else if (kind == "ces") {
    inst.utility = Utility::Ces;
    if (!hdr.contains("rho") || !hdr["rho"].is_number())
      throw IoError(IoCode::MalformedHeader, "ces header missing rho");
    inst.rho = hdr["rho"].get<double>();
  } else {
    throw IoError(IoCode::MalformedHeader, "unknown utility kind '" + kind + "'");
  }
  inst.n = hdr["n"].get<int>();
  inst.m = hdr["m"].get<int>();
  if (inst.n <= 0 || inst.m <= 0)
    throw IoError(IoCode::MalformedHeader, "header dimensions must be positive");

  inst.valuations = Mat(inst.n, inst.m);
  for (int i = 0; i < inst.n; ++i) {
    if (!std::getline(in, line))
      throw IoError(IoCode::DimensionMismatch, "missing valuation row");
    const auto toks = detail::split_csv(line);
    if (static_cast<int>(toks.size()) != inst.m)
      throw IoError(IoCode::DimensionMismatch, "valuation row width mismatch");
    for (int j = 0; j < inst.m; ++j) {
      const double v = detail::parse_double(toks[j]);
      if (v < 0.0)
        throw IoError(IoCode::NegativeValuation, "negative valuation " + toks[j]);
      inst.valuations(i, j) = v;
    }
  }
  if (!std::getline(in, line))
    throw IoError(IoCode::DimensionMismatch, "missing budgets row");
  const auto toks = detail::split_csv(line);
  if (static_cast<int>(toks.size()) != inst.n)
    throw IoError(IoCode::DimensionMismatch, "budgets row width mismatch");
  inst.budgets.resize(inst.n);
  for (int i = 0; i < inst.n; ++i) inst.budgets[i] = detail::parse_double(toks[i]);

  std::string rest;
  while (std::getline(in, rest))
    if (!rest.empty())
      throw IoError(IoCode::DimensionMismatch, "trailing content after budgets");

  try {
    validate(inst);
  } catch (const std::invalid_argument& e) {
    throw IoError(IoCode::InvalidInstance, e.what());
  }
  return inst;
}

inline void save_instance(const MarketInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(IoCode::FileNotFound, "cannot open for write: " + path);
  out << serialize_instance(inst);
  if (!out) throw IoError(IoCode::FileNotFound, "write failed: " + path);
}

inline MarketInstance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoCode::FileNotFound, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

// 64-bit FNV-1a over the canonical serialization; used to key reference
// equilibrium caches to instance content.
inline std::uint64_t instance_fingerprint(const MarketInstance& inst) {
  const std::string s = serialize_instance(inst);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace fisher
