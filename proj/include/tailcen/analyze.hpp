#pragma once

// Interval report for one empirical data set: tail index and extreme
// quantiles, by a chosen method or by the hybrid rule.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailcen/baselines.hpp"
#include "tailcen/dataset.hpp"
#include "tailcen/error.hpp"
#include "tailcen/montecarlo.hpp"
#include "tailcen/types.hpp"

namespace tailcen {

struct AnalyzeOptions {
  /// Explicit k; otherwise k = [k_rule n].
  std::optional<std::size_t> k;
  double k_rule = 0.05;
  std::vector<TargetSpec> targets{TargetSpec::index(), TargetSpec::quantile(0.01), TargetSpec::quantile(0.001)};
  /// "auto" (hybrid rule), "ml", "fk", "hill" or "gi".
  std::string method = "auto";
  std::size_t switch_k = kSwitchK;
  FitOptions mle;
};

struct AnalyzeRow {
  std::string target;
  Method method = Method::fk;
  ConfidenceInterval ci;
  double estimate = std::numeric_limits<double>::quiet_NaN();
};

struct AnalyzeReport {
  std::string name;
  std::size_t n = 0, m = 0, k = 0;
  double cen_percent = 0.0;
  double u = 0.0;
  std::optional<double> threshold;
  double level = 0.95;
  /// How the method was chosen, e.g. "auto: k=180 <= 250, fk".
  std::string dispatch;
  std::vector<AnalyzeRow> rows;
};

/// k = [k_rule n], rounded to the nearest integer like the simulations.
inline std::size_t resolve_k(const Dataset& ds, const AnalyzeOptions& opt) {
  const std::size_t k =
      opt.k ? *opt.k : static_cast<std::size_t>(std::llround(opt.k_rule * static_cast<double>(ds.n())));
  if (k < 3) throw ValidationError(ds.name + ": resolved k=" + std::to_string(k) + ", k >= 3 required");
  return k;
}

namespace detail {
/// Rethrows the active exception with `ctx` prepended, keeping its type.
[[noreturn]] inline void rethrow_with_context(const std::string& ctx) {
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(ctx + ": " + e.what(), e.rows());
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(ctx + ": " + e.what(), e.diagnostics());
  } catch (const DomainError& e) {
    throw DomainError(ctx + ": " + e.what());
  }
}
}  // namespace detail

inline AnalyzeReport analyze(const Dataset& ds, const AnalyzeOptions& opt, TableStore& tables) {
  AnalyzeReport rep;
  rep.name = ds.name;
  rep.n = ds.n();
  rep.m = ds.m();
  rep.cen_percent = ds.censored_percent();
  rep.k = resolve_k(ds, opt);
  rep.threshold = ds.threshold;
  rep.level = tables.config().level;

  const bool baseline = opt.method == "hill" || opt.method == "gi";
  if (baseline) {
    const std::vector<double> y = ds.observed_desc();
    const Method m = parse_method(opt.method);
    BaselineFit f;
    try {
      f = m == Method::hill ? hill(y, rep.k) : gi(y, rep.k);
    } catch (...) {
      detail::rethrow_with_context(ds.name + ", " + opt.method);
    }
    rep.u = y[rep.k];
    rep.dispatch = opt.method + ": censored values dropped";
    rep.rows.push_back({"index", m, f.ci(rep.level), f.xi_hat});
    return rep;
  }

  TailData tail;
  try {
    tail = ds.tail(rep.k);
  } catch (...) {
    detail::rethrow_with_context(ds.name);
  }
  rep.u = tail.u;
  std::optional<Method> fixed;
  if (opt.method == "auto") {
    const Method m = hybrid_choice(tail, opt.switch_k);
    std::ostringstream os;
    os << "auto: k=" << rep.k << (rep.k > opt.switch_k ? " > " : " <= ") << opt.switch_k;
    if (rep.k > opt.switch_k && !tail.T) os << " but no threshold";
    os << ", " << to_string(m);
    rep.dispatch = os.str();
  } else {
    fixed = parse_method(opt.method);
    rep.dispatch = opt.method + ": requested";
  }
  for (const auto& t : opt.targets) {
    try {
      const MethodResult r = fixed ? apply_tail_method(*fixed, tail, t, tables, opt.mle)
                                   : hybrid_dispatch(tail, t, tables, opt.mle, opt.switch_k);
      rep.rows.push_back({t.name(), r.ci.method, r.ci, r.estimate});
    } catch (...) {
      detail::rethrow_with_context(ds.name + ", target " + t.name());
    }
  }
  return rep;
}

inline nlohmann::json to_json(const AnalyzeReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& w : r.rows) {
    nlohmann::json j{{"target", w.target},     {"method", to_string(w.method)}, {"lo", num(w.ci.lo)},
                     {"hi", num(w.ci.hi)},     {"estimate", num(w.estimate)},   {"degenerate", w.ci.degenerate}};
    if (!w.ci.note.empty()) j["note"] = w.ci.note;
    rows.push_back(std::move(j));
  }
  return {{"name", r.name},
          {"n", r.n},
          {"m", r.m},
          {"cen_percent", r.cen_percent},
          {"k", r.k},
          {"u", r.u},
          {"threshold", r.threshold ? nlohmann::json(*r.threshold) : nlohmann::json(nullptr)},
          {"level", r.level},
          {"dispatch", r.dispatch},
          {"intervals", rows}};
}

inline std::string to_csv(const AnalyzeReport& r) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "name,n,m,cen_percent,k,target,method,lo,hi,estimate,degenerate\n";
  for (const auto& w : r.rows)
    os << r.name << ',' << r.n << ',' << r.m << ',' << detail::fmt(r.cen_percent, 4) << ',' << r.k << ',' << w.target
       << ',' << to_string(w.method) << ',' << detail::fmt(w.ci.lo, 10) << ',' << detail::fmt(w.ci.hi, 10) << ','
       << detail::fmt(w.estimate, 10) << ',' << w.ci.degenerate << '\n';
  return os.str();
}

inline std::string to_table(const AnalyzeReport& r) {
  std::ostringstream os;
  os << r.name << ": n=" << r.n << " cen#=" << r.m << " cen%=" << std::fixed << std::setprecision(3) << r.cen_percent
     << std::defaultfloat << " k=" << r.k << " u=" << std::setprecision(6) << r.u << '\n';
  os << r.dispatch << '\n';
  for (const auto& w : r.rows) {
    os << "  " << std::left << std::setw(8) << w.target << std::setw(6) << to_string(w.method) << std::right << '('
       << detail::fmt(w.ci.lo, 4) << ", " << detail::fmt(w.ci.hi, 4) << ')';
    if (!w.ci.note.empty()) os << "  [" << w.ci.note << ']';
    os << '\n';
  }
  return os.str();
}

}  // namespace tailcen
