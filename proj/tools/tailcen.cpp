// tailcen: command-line front end.
//
//   tailcen ingest-validate --input data.csv --censor-col topcoded
//   tailcen analyze --input data.csv --threshold 150000 --targets index,q99
//   tailcen analyze --input disasters.csv --missing 4 --k 157
//   tailcen simulate --dgp gpd --n 1000 --cen-p 0.01 --format csv
//   tailcen precompute --kind lambda --k 20 --m 2 --h 1
//
// Exit codes: 0 success, 2 invalid input, 3 solver non-convergence, 1 other.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tailcen.hpp"

namespace {

using namespace tailcen;

struct FkFlags {
  double level = 0.95;
  std::size_t cv_draws = 100000;
  std::size_t lambda_draws = 20000;
  double lambda_tol = 0.001;
  int lambda_max_iter = 500;
  std::uint64_t seed = 12345;
  unsigned threads = 0;
  bool refine = false;
  std::string cache_dir;

  void add(CLI::App* app) {
    app->add_option("--level", level, "confidence level")->check(CLI::Range(0.0, 1.0));
    app->add_option("--cv-draws", cv_draws, "draws behind critical values");
    app->add_option("--lambda-draws", lambda_draws, "draws behind Lagrange weights");
    app->add_option("--lambda-tol", lambda_tol, "coverage tolerance of the Lagrange solver");
    app->add_option("--lambda-max-iter", lambda_max_iter, "Gauss-Seidel sweeps");
    app->add_option("--fk-seed", seed, "seed of the fixed-k simulations");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
    app->add_flag("--refine", refine, "refine the index interval ends off the grid");
    app->add_option("--cache-dir", cache_dir, "table cache directory (default $TAILCEN_CACHE_DIR)");
  }

  fk::FkConfig config() const {
    fk::FkConfig c;
    c.level = level;
    c.cv_draws = cv_draws;
    c.lambda_draws = lambda_draws;
    c.lambda_tol = lambda_tol;
    c.lambda_max_iter = lambda_max_iter;
    c.seed = seed;
    c.threads = threads;
    c.refine = refine;
    c.validate();
    return c;
  }
};

struct InputFlags {
  std::string path;
  CsvOptions csv;
  std::string censor_col;
  double threshold = 0.0;
  std::size_t missing = 0;
  CLI::Option* thr_opt = nullptr;
  CLI::Option* miss_opt = nullptr;
  CLI::Option* cen_opt = nullptr;

  void add(CLI::App* app) {
    app->add_option("--input", path, "CSV file with a header row")->required();
    app->add_option("--value-col", csv.value_column, "value column")->capture_default_str();
    cen_opt = app->add_option("--censor-col", censor_col, "column of censoring flags");
    thr_opt = app->add_option("--threshold", threshold, "censoring threshold T");
    miss_opt = app->add_option("--missing", missing, "number of censored observations absent from the file");
    miss_opt->excludes(thr_opt)->excludes(cen_opt);
  }

  Dataset load() {
    if (*cen_opt) csv.censor_column = censor_col;
    if (*thr_opt) csv.threshold = threshold;
    if (*miss_opt) csv.m_override = missing;
    return ingest_csv(path, csv);
  }
};

std::vector<TargetSpec> parse_targets(const std::vector<std::string>& v) {
  std::vector<TargetSpec> out;
  for (const auto& s : v) out.push_back(parse_target(s));
  return out;
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << text;
}

void print_rows(const std::vector<std::size_t>& rows) {
  if (rows.empty()) return;
  std::cerr << "  rows:";
  const std::size_t shown = std::min<std::size_t>(rows.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) std::cerr << ' ' << rows[i];
  if (rows.size() > shown) std::cerr << " ... (" << rows.size() << " in total)";
  std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tail index and extreme quantile inference under tail censoring"};
  app.require_subcommand(1);

  // ingest-validate
  auto* iv = app.add_subcommand("ingest-validate", "check a CSV file and print its censoring summary");
  InputFlags iv_in;
  iv_in.add(iv);

  // analyze
  auto* an = app.add_subcommand("analyze", "confidence intervals for an empirical data set");
  InputFlags an_in;
  an_in.add(an);
  FkFlags an_fk;
  an_fk.add(an);
  AnalyzeOptions an_opt;
  std::size_t an_k = 0;
  auto* an_k_opt = an->add_option("--k", an_k, "number of tail observations");
  an->add_option("--k-rule", an_opt.k_rule, "k = [k_rule n] when --k is absent")->capture_default_str();
  std::vector<std::string> an_targets{"index", "q99", "q999"};
  an->add_option("--targets", an_targets, "index, q99, q999, ...")->delimiter(',')->capture_default_str();
  an->add_option("--method", an_opt.method, "auto, ml, fk, hill or gi")
      ->check(CLI::IsMember({"auto", "ml", "fk", "hill", "gi"}))
      ->capture_default_str();
  std::string an_format = "table", an_out;
  an->add_option("--format", an_format, "table, json or csv")->check(CLI::IsMember({"table", "json", "csv"}));
  an->add_option("-o,--output", an_out, "output file (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Monte Carlo coverage and length study");
  FkFlags sim_fk;
  sim_fk.add(sim);
  McConfig mc;
  std::string sim_dgp = "gpd";
  sim->add_option("--dgp", sim_dgp, "gpd (standard Pareto), gpd-unit, t2, f44 or dpln")->capture_default_str();
  sim->add_option("--n", mc.n, "sample size")->capture_default_str();
  sim->add_option("--cen-p", mc.cen_p, "censored probability")->capture_default_str();
  sim->add_option("--k-rule", mc.k_rule, "k = [k_rule n]")->capture_default_str();
  sim->add_option("--reps", mc.reps, "replications")->capture_default_str();
  sim->add_option("--seed", mc.seed, "seed of the samples")->capture_default_str();
  std::vector<std::string> sim_methods{"hill", "gi", "ml", "fk"}, sim_targets{"index", "q99", "q999"};
  sim->add_option("--methods", sim_methods, "subset of hill, gi, ml, fk")->delimiter(',')->capture_default_str();
  sim->add_option("--targets", sim_targets, "index, q99, q999, ...")->delimiter(',')->capture_default_str();
  bool sim_topcode = false;
  sim->add_flag("--baselines-topcode", sim_topcode, "give Hill and GI the censored values at T instead of dropping them");
  std::string sim_format = "table", sim_out;
  sim->add_option("--format", sim_format, "table, json or csv")->check(CLI::IsMember({"table", "json", "csv"}));
  sim->add_option("-o,--output", sim_out, "output file (default stdout)");

  // precompute
  auto* pre = app.add_subcommand("precompute", "build a critical-value or Lagrange-weight table");
  pre->set_help_flag("--help", "print this help and exit");
  FkFlags pre_fk;
  pre_fk.add(pre);
  std::string pre_kind;
  std::size_t pre_k = 0, pre_m = 0;
  double pre_h = 1.0;
  std::string pre_out;
  pre->add_option("--kind", pre_kind, "cv or lambda")->required()->check(CLI::IsMember({"cv", "lambda"}));
  pre->add_option("--k", pre_k, "tail observations")->required();
  pre->add_option("--m", pre_m, "censored observations")->capture_default_str();
  pre->add_option("--h", pre_h, "h = p n of the quantile (lambda only)")->capture_default_str();
  pre->add_option("-o,--output", pre_out, "output file (default: the cache directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*iv) {
      const Dataset ds = iv_in.load();
      std::cout << ds.name << ": n=" << ds.n() << " m=" << ds.m() << " cen%=" << std::fixed << std::setprecision(3)
                << ds.censored_percent() << std::defaultfloat;
      if (ds.threshold) std::cout << " threshold=" << *ds.threshold;
      std::cout << '\n';
    } else if (*an) {
      const Dataset ds = an_in.load();
      if (*an_k_opt) an_opt.k = an_k;
      an_opt.targets = parse_targets(an_targets);
      TableStore tables(an_fk.config(), fk::cache_dir(an_fk.cache_dir));
      const AnalyzeReport rep = analyze(ds, an_opt, tables);
      // the table carries the dispatch line itself
      if (an_format != "table") std::cerr << rep.dispatch << '\n';
      if (an_format == "json")
        emit(to_json(rep).dump(2) + "\n", an_out);
      else if (an_format == "csv")
        emit(to_csv(rep), an_out);
      else
        emit(to_table(rep), an_out);
    } else if (*sim) {
      mc.dgp = parse_dgp(sim_dgp);
      mc.fk = sim_fk.config();
      mc.threads = sim_fk.threads;
      mc.cache_dir = fk::cache_dir(sim_fk.cache_dir);
      mc.baselines_drop_censored = !sim_topcode;
      mc.methods.clear();
      for (const auto& s : sim_methods) mc.methods.push_back(parse_method(s));
      mc.targets = parse_targets(sim_targets);
      const McReport rep = run_experiment(mc);
      if (sim_format == "json")
        emit(to_json(rep).dump(2) + "\n", sim_out);
      else if (sim_format == "csv")
        emit(to_csv(rep), sim_out);
      else
        emit(to_table(rep), sim_out);
    } else if (*pre) {
      const fk::FkConfig cfg = pre_fk.config();
      const auto dir = fk::cache_dir(pre_fk.cache_dir);
      if (pre_out.empty() && !dir) throw ValidationError("precompute: give --output or a cache directory");
      if (pre_kind == "cv") {
        const fk::CvTable t = fk::build_cv_table(pre_k, pre_m, cfg);
        const auto path = pre_out.empty() ? *dir / fk::cv_cache_name(pre_k, pre_m, cfg) : std::filesystem::path(pre_out);
        fk::write_json_file(path, fk::to_json(t));
        std::cout << path.string() << '\n';
      } else {
        const fk::WeightTable t = fk::solve_lambda_unchecked(pre_k, pre_m, pre_h, cfg);
        if (!t.certificate.converged) {
          std::cerr << "Lagrange solver did not converge; certificate:\n"
                    << fk::to_json(t).at("certificate").dump(1) << '\n';
          return 3;
        }
        const auto path =
            pre_out.empty() ? *dir / fk::lambda_cache_name(pre_k, pre_m, pre_h, cfg) : std::filesystem::path(pre_out);
        fk::write_json_file(path, fk::to_json(t));
        std::cout << path.string() << '\n';
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    print_rows(e.rows());
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
