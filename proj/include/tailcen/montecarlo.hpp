#pragma once

// Replication harness: censored samples from a DGP, every requested method
// and target per replication, aggregated bias / coverage / length.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tailcen/baselines.hpp"
#include "tailcen/censored_mle.hpp"
#include "tailcen/distributions.hpp"
#include "tailcen/error.hpp"
#include "tailcen/fixed_k/cache.hpp"
#include "tailcen/fixed_k/config.hpp"
#include "tailcen/fixed_k/lagrange.hpp"
#include "tailcen/fixed_k/lr_test.hpp"
#include "tailcen/parallel.hpp"
#include "tailcen/rng.hpp"
#include "tailcen/tail_data.hpp"
#include "tailcen/types.hpp"

namespace tailcen {

/// Tail index, or the 1 - p quantile.
struct TargetSpec {
  enum class Kind { index, quantile } kind = Kind::index;
  double p = 0.0;

  static TargetSpec index() { return {}; }
  static TargetSpec quantile(double p) { return {Kind::quantile, p}; }

  bool is_index() const noexcept { return kind == Kind::index; }

  /// "index", or "q" followed by the digits of 1 - p ("q99", "q999").
  std::string name() const {
    if (is_index()) return "index";
    std::ostringstream os;
    os << std::setprecision(12) << 1.0 - p;
    std::string s = os.str();
    const auto dot = s.find('.');
    return "q" + (dot == std::string::npos ? s : s.substr(dot + 1));
  }
};

inline TargetSpec parse_target(const std::string& s) {
  if (s == "index") return TargetSpec::index();
  if (s.size() >= 2 && s[0] == 'q' && s.find_first_not_of("0123456789", 1) == std::string::npos) {
    const double level = std::stod("0." + s.substr(1));
    return TargetSpec::quantile(1.0 - level);
  }
  throw ValidationError("unknown target '" + s + "' (expected index, q99, q999, ...)");
}

/// Cv and Lagrange tables keyed by (k, m) and (k, m, h), built on first use
/// and read from / written to the cache directory when one is set.
class TableStore {
 public:
  TableStore(fk::FkConfig cfg, std::optional<std::filesystem::path> dir) : cfg_(std::move(cfg)), dir_(std::move(dir)) {}

  const fk::FkConfig& config() const noexcept { return cfg_; }

  const fk::CvTable& cv(std::size_t k, std::size_t m) {
    std::lock_guard lk(mu_);
    auto it = cv_.find({k, m});
    if (it == cv_.end()) it = cv_.emplace(std::make_pair(k, m), fk::cached_cv_table(k, m, cfg_, dir_)).first;
    return it->second;
  }

  const fk::WeightTable& lambda(std::size_t k, std::size_t m, double h) {
    std::lock_guard lk(mu_);
    auto key = std::make_tuple(k, m, h);
    auto it = lam_.find(key);
    if (it == lam_.end()) it = lam_.emplace(key, fk::cached_weight_table(k, m, h, cfg_, dir_)).first;
    return it->second;
  }

 private:
  fk::FkConfig cfg_;
  std::optional<std::filesystem::path> dir_;
  std::mutex mu_;
  std::map<std::pair<std::size_t, std::size_t>, fk::CvTable> cv_;
  std::map<std::tuple<std::size_t, std::size_t, double>, fk::WeightTable> lam_;
};

/// Interval plus the point estimate behind it (NaN for fk).
struct MethodResult {
  ConfidenceInterval ci;
  double estimate = std::numeric_limits<double>::quiet_NaN();
};

/// ml or fk interval for one target. Lagrange tables use h = p n.
inline MethodResult apply_tail_method(Method method, const TailData& tail, const TargetSpec& target, TableStore& tables,
                                      const FitOptions& mle = {}) {
  const double level = tables.config().level;
  MethodResult r;
  switch (method) {
    case Method::ml: {
      const GpdFit fit = fit_mle(tail, mle);
      if (target.is_index()) {
        r.ci = ci_index_ml(fit, tail.k(), level);
        r.estimate = fit.params.xi;
      } else {
        r.ci = ci_quantile_ml(fit, tail, target.p, level);
        r.estimate = quantile_point(fit, tail, target.p);
      }
      return r;
    }
    case Method::fk: {
      if (target.is_index()) {
        r.ci = fk::ci_index_fk(tail, tables.cv(tail.k(), tail.m), tables.config());
      } else {
        const double h = target.p * static_cast<double>(tail.n);
        r.ci = fk::ci_quantile_fk(tail, target.p, tables.lambda(tail.k(), tail.m, h), tables.config());
      }
      return r;
    }
    default:
      throw ValidationError(std::string("apply_tail_method: ") + std::string(to_string(method)) +
                            " is not a censoring-aware method");
  }
}

inline constexpr std::size_t kSwitchK = 250;

/// ml when k > 250, fk otherwise. The likelihood needs T, so a tail without
/// a known threshold always goes to fk.
inline Method hybrid_choice(const TailData& tail, std::size_t switch_k = kSwitchK) {
  return tail.k() > switch_k && tail.T ? Method::ml : Method::fk;
}

inline MethodResult hybrid_dispatch(const TailData& tail, const TargetSpec& target, TableStore& tables,
                                    const FitOptions& mle = {}, std::size_t switch_k = kSwitchK) {
  tail.validate();
  const Method m = hybrid_choice(tail, switch_k);
  MethodResult r = apply_tail_method(m, tail, target, tables, mle);
  if (m == Method::fk && tail.k() > switch_k) {
    r.ci.note += r.ci.note.empty() ? "" : "; ";
    r.ci.note += "k > " + std::to_string(switch_k) + " but the threshold is unknown, so fk is used";
  }
  return r;
}

// ---------------------------------------------------------------------------

struct McConfig {
  DgpSpec dgp;
  std::size_t n = 1000;
  double cen_p = 0.01;
  double k_rule = 0.05;
  std::size_t reps = 1000;
  std::vector<Method> methods{Method::hill, Method::gi, Method::ml, Method::fk};
  std::vector<TargetSpec> targets{TargetSpec::index(), TargetSpec::quantile(0.01), TargetSpec::quantile(0.001)};
  std::uint64_t seed = 1;
  unsigned threads = 0;
  fk::FkConfig fk;
  FitOptions mle;
  std::optional<std::filesystem::path> cache_dir;
  /// Hill and GI see the sample with censored values dropped (true) or
  /// replaced by T (false).
  bool baselines_drop_censored = true;

  /// k = [k_rule n], the closest integer.
  std::size_t k() const { return static_cast<std::size_t>(std::llround(k_rule * static_cast<double>(n))); }

  void validate() const {
    if (reps < 1) throw ValidationError("McConfig: reps >= 1 required");
    if (!(cen_p > 0.0 && cen_p < 1.0)) throw ValidationError("McConfig: cen_p must lie in (0, 1)");
    if (!(k_rule * static_cast<double>(n) >= 3.0)) throw ValidationError("McConfig: k_rule * n >= 3 required");
    if (methods.empty() || targets.empty()) throw ValidationError("McConfig: no methods or no targets");
    for (const auto& t : targets)
      if (!t.is_index() && !(t.p > 0.0 && t.p < 1.0)) throw ValidationError("McConfig: target p must lie in (0, 1)");
    fk.validate();
  }
};

struct McRow {
  std::string dgp;
  std::size_t n = 0;
  double cen_p = 0.0;
  std::size_t k = 0;
  Method method = Method::ml;
  std::string target;
  double truth = 0.0;
  /// Replications that produced an interval.
  std::size_t used = 0;
  std::size_t failures = 0;
  std::size_t degenerate = 0;
  /// Mean of estimate - truth; NaN when the method has no point estimate.
  double bias = std::numeric_limits<double>::quiet_NaN();
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double avg_length = std::numeric_limits<double>::quiet_NaN();
  /// sqrt(coverage (1 - coverage) / used).
  double mc_std_err = std::numeric_limits<double>::quiet_NaN();
  /// First failure message, if any.
  std::string first_error;
};

struct McReport {
  std::vector<McRow> rows;

  const McRow* find(Method m, const std::string& target) const {
    for (const auto& r : rows)
      if (r.method == m && r.target == target) return &r;
    return nullptr;
  }
};

namespace detail {
inline constexpr std::uint64_t kMcStream = 0x6d63;

struct Outcome {
  bool ok = false, covered = false, degenerate = false;
  double length = 0.0, estimate = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

/// The raw sample of replication `rep`.
inline std::vector<double> mc_sample(const McConfig& cfg, std::size_t rep) {
  Philox4x32 rng(cfg.seed, stream_id({kMcStream, rep}));
  return dgp_sample(cfg.dgp, cfg.n, rng);
}
}  // namespace detail

inline McReport run_experiment(const McConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.k();
  const double T = dgp_true_quantile(cfg.dgp, 1.0 - cfg.cen_p);
  const double xi = cfg.dgp.tail_index();
  TableStore tables(cfg.fk, cfg.cache_dir);

  struct Cell {
    Method method;
    TargetSpec target;
    double truth;
  };
  std::vector<Cell> cells;
  for (Method m : cfg.methods)
    for (const auto& t : cfg.targets) {
      // The baselines estimate the index only.
      if ((m == Method::hill || m == Method::gi) && !t.is_index()) continue;
      cells.push_back({m, t, t.is_index() ? xi : dgp_true_quantile(cfg.dgp, 1.0 - t.p)});
    }

  // Tables for every censored count that occurs, built up front so that the
  // replications below only read them.
  bool need_fk = false;
  for (const auto& c : cells) need_fk |= c.method == Method::fk;
  if (need_fk) {
    std::vector<std::size_t> ms(cfg.reps);
    parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep, unsigned) {
      std::size_t m = 0;
      for (double y : detail::mc_sample(cfg, rep)) m += y >= T;
      ms[rep] = m;
    });
    const std::set<std::size_t> distinct(ms.begin(), ms.end());
    for (std::size_t m : distinct)
      for (const auto& c : cells) {
        if (c.method != Method::fk) continue;
        if (c.target.is_index())
          tables.cv(k, m);
        else
          tables.lambda(k, m, c.target.p * static_cast<double>(cfg.n));
      }
  }

  const std::size_t C = cells.size();
  std::vector<detail::Outcome> out(cfg.reps * C);
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep, unsigned) {
    const std::vector<double> sample = detail::mc_sample(cfg, rep);
    std::vector<double> naive;
    naive.reserve(sample.size());
    for (double y : sample) {
      if (y <= T)
        naive.push_back(y);
      else if (!cfg.baselines_drop_censored)
        naive.push_back(T);
    }
    std::sort(naive.begin(), naive.end(), std::greater<>());
    std::optional<TailData> tail;
    std::string tail_error;
    try {
      tail = TailData::from_sample(sample, k, T);
    } catch (const std::exception& e) {
      tail_error = e.what();
    }
    for (std::size_t c = 0; c < C; ++c) {
      const Cell& cell = cells[c];
      detail::Outcome& o = out[rep * C + c];
      try {
        MethodResult r;
        if (cell.method == Method::hill || cell.method == Method::gi) {
          const BaselineFit f = cell.method == Method::hill ? hill(naive, k) : gi(naive, k);
          r.ci = f.ci(cfg.fk.level);
          r.estimate = f.xi_hat;
        } else {
          if (!tail) throw ValidationError(tail_error);
          r = apply_tail_method(cell.method, *tail, cell.target, tables, cfg.mle);
        }
        o.ok = true;
        o.degenerate = r.ci.degenerate;
        // An empty set (NaN bounds) has length zero and covers nothing.
        o.covered = r.ci.contains(cell.truth);
        o.length = std::isnan(r.ci.lo) ? 0.0 : r.ci.length();
        o.estimate = r.estimate;
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  });

  McReport rep;
  for (std::size_t c = 0; c < C; ++c) {
    McRow row;
    row.dgp = cfg.dgp.name();
    row.n = cfg.n;
    row.cen_p = cfg.cen_p;
    row.k = k;
    row.method = cells[c].method;
    row.target = cells[c].target.name();
    row.truth = cells[c].truth;
    double cov = 0.0, len = 0.0, bias = 0.0;
    std::size_t nb = 0;
    for (std::size_t r = 0; r < cfg.reps; ++r) {
      const auto& o = out[r * C + c];
      if (!o.ok) {
        ++row.failures;
        if (row.first_error.empty()) row.first_error = o.error;
        continue;
      }
      ++row.used;
      row.degenerate += o.degenerate;
      cov += o.covered;
      len += o.length;
      if (!std::isnan(o.estimate)) {
        bias += o.estimate - row.truth;
        ++nb;
      }
    }
    if (row.used > 0) {
      const double u = static_cast<double>(row.used);
      row.coverage = cov / u;
      row.avg_length = len / u;
      row.mc_std_err = std::sqrt(row.coverage * (1.0 - row.coverage) / u);
    }
    if (nb > 0) row.bias = bias / static_cast<double>(nb);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report output

namespace detail {
inline std::string fmt(double v, int prec = 6) {
  if (std::isnan(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}
}  // namespace detail

inline std::string to_csv(const McReport& r) {
  std::ostringstream os;
  os << "dgp,n,cen_p,k,method,target,truth,used,failures,degenerate,bias,coverage,avg_length,mc_std_err\n";
  for (const auto& w : r.rows)
    os << w.dgp << ',' << w.n << ',' << w.cen_p << ',' << w.k << ',' << to_string(w.method) << ',' << w.target << ','
       << detail::fmt(w.truth, 10) << ',' << w.used << ',' << w.failures << ',' << w.degenerate << ','
       << detail::fmt(w.bias) << ',' << detail::fmt(w.coverage) << ',' << detail::fmt(w.avg_length) << ','
       << detail::fmt(w.mc_std_err) << '\n';
  return os.str();
}

inline nlohmann::json to_json(const McReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  for (const auto& w : r.rows) {
    nlohmann::json j{{"dgp", w.dgp},
                     {"n", w.n},
                     {"cen_p", w.cen_p},
                     {"k", w.k},
                     {"method", to_string(w.method)},
                     {"target", w.target},
                     {"truth", w.truth},
                     {"used", w.used},
                     {"failures", w.failures},
                     {"degenerate", w.degenerate},
                     {"bias", num(w.bias)},
                     {"coverage", num(w.coverage)},
                     {"avg_length", num(w.avg_length)},
                     {"mc_std_err", num(w.mc_std_err)}};
    if (!w.first_error.empty()) j["first_error"] = w.first_error;
    rows.push_back(std::move(j));
  }
  return {{"rows", rows}};
}

inline std::string to_table(const McReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "dgp" << std::setw(7) << "n" << std::setw(8) << "cen_p" << std::setw(7) << "method"
     << std::setw(8) << "target" << std::right << std::setw(10) << "bias" << std::setw(8) << "cov" << std::setw(11)
     << "length" << std::setw(8) << "se" << std::setw(6) << "fail" << '\n';
  for (const auto& w : r.rows)
    os << std::left << std::setw(8) << w.dgp << std::setw(7) << w.n << std::setw(8) << w.cen_p << std::setw(7)
       << to_string(w.method) << std::setw(8) << w.target << std::right << std::fixed << std::setprecision(3)
       << std::setw(10) << w.bias << std::setw(8) << w.coverage << std::setw(11) << w.avg_length << std::setw(8)
       << w.mc_std_err << std::setw(6) << w.failures << std::defaultfloat << '\n';
  return os.str();
}

}  // namespace tailcen
