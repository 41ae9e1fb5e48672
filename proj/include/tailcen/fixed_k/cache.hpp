#pragma once

// On-disk cache for critical-value and Lagrange-weight tables. Files are
// JSON with every key spelled out; doubles are written with round-trip
// precision, and nothing time-dependent is stored, so a rerun with the same
// seed reproduces the file byte for byte.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tailcen/error.hpp"
#include "tailcen/fixed_k/config.hpp"
#include "tailcen/fixed_k/lagrange.hpp"
#include "tailcen/fixed_k/lr_test.hpp"

namespace tailcen::fk {

inline constexpr int kCacheFormatVersion = 1;

inline nlohmann::json to_json(const CvTable& t) {
  return {{"kind", "cv"},
          {"version", kCacheFormatVersion},
          {"k", t.k},
          {"m", t.m},
          {"level", t.level},
          {"xi_grid", t.xi_grid},
          {"weights", t.weights},
          {"cv", t.cv},
          {"effective_sample_size", t.ess},
          {"seed", t.seed},
          {"draws", t.draws}};
}

inline nlohmann::json to_json(const WeightTable& t) {
  return {{"kind", "lambda"},
          {"version", kCacheFormatVersion},
          {"k", t.k},
          {"m", t.m},
          {"h", t.h},
          {"level", t.level},
          {"xi_grid", t.xi_grid},
          {"weights", t.weights},
          {"masses", t.masses},
          {"seed", t.seed},
          {"draws", t.draws},
          {"certificate",
           {{"max_deviation", t.certificate.max_deviation},
            {"iterations", t.certificate.iterations},
            {"converged", t.certificate.converged},
            {"coverage", t.certificate.coverage}}}};
}

namespace detail {
inline void expect_kind(const nlohmann::json& j, const char* kind) {
  if (!j.contains("kind") || j.at("kind") != kind)
    throw ValidationError(std::string("cache file is not a '") + kind + "' table");
  if (j.value("version", 0) != kCacheFormatVersion) throw ValidationError("unsupported cache file version");
}
}  // namespace detail

inline CvTable cv_table_from_json(const nlohmann::json& j) {
  detail::expect_kind(j, "cv");
  CvTable t;
  j.at("k").get_to(t.k);
  j.at("m").get_to(t.m);
  j.at("level").get_to(t.level);
  j.at("xi_grid").get_to(t.xi_grid);
  j.at("weights").get_to(t.weights);
  j.at("cv").get_to(t.cv);
  j.at("effective_sample_size").get_to(t.ess);
  j.at("seed").get_to(t.seed);
  j.at("draws").get_to(t.draws);
  return t;
}

inline WeightTable weight_table_from_json(const nlohmann::json& j) {
  detail::expect_kind(j, "lambda");
  WeightTable t;
  j.at("k").get_to(t.k);
  j.at("m").get_to(t.m);
  j.at("h").get_to(t.h);
  j.at("level").get_to(t.level);
  j.at("xi_grid").get_to(t.xi_grid);
  j.at("weights").get_to(t.weights);
  j.at("masses").get_to(t.masses);
  j.at("seed").get_to(t.seed);
  j.at("draws").get_to(t.draws);
  const auto& c = j.at("certificate");
  c.at("max_deviation").get_to(t.certificate.max_deviation);
  c.at("iterations").get_to(t.certificate.iterations);
  c.at("converged").get_to(t.certificate.converged);
  c.at("coverage").get_to(t.certificate.coverage);
  return t;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed cache file " + path.string() + ": " + e.what());
  }
}

/// Directory holding cached tables: the explicit argument, else
/// $TAILCEN_CACHE_DIR, else none.
inline std::optional<std::filesystem::path> cache_dir(const std::string& explicit_dir = {}) {
  if (!explicit_dir.empty()) return std::filesystem::path(explicit_dir);
  if (const char* e = std::getenv("TAILCEN_CACHE_DIR"); e && *e) return std::filesystem::path(e);
  return std::nullopt;
}

namespace detail {
inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}
inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
}  // namespace detail

inline std::string cv_cache_name(std::size_t k, std::size_t m, const FkConfig& cfg) {
  return "cv_k" + std::to_string(k) + "_m" + std::to_string(m) + "_lv" + detail::num(cfg.level) + "_g" +
         detail::hex(cfg.grid_hash()) + "_s" + std::to_string(cfg.seed) + "_n" + std::to_string(cfg.cv_draws) +
         ".json";
}

inline std::string lambda_cache_name(std::size_t k, std::size_t m, double h, const FkConfig& cfg) {
  return "lambda_k" + std::to_string(k) + "_m" + std::to_string(m) + "_h" + detail::num(h) + "_lv" +
         detail::num(cfg.level) + "_g" + detail::hex(cfg.grid_hash()) + "_s" + std::to_string(cfg.seed) + "_n" +
         std::to_string(cfg.lambda_draws) + ".json";
}

/// Loads the cv table from `dir` when present, else builds and stores it.
inline CvTable cached_cv_table(std::size_t k, std::size_t m, const FkConfig& cfg,
                               const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    const auto p = *dir / cv_cache_name(k, m, cfg);
    if (std::filesystem::exists(p)) return cv_table_from_json(read_json_file(p));
    CvTable t = build_cv_table(k, m, cfg);
    write_json_file(p, to_json(t));
    return t;
  }
  return build_cv_table(k, m, cfg);
}

/// Loads the Lagrange table from `dir` when present, else solves and stores
/// it. Unconverged solutions are stored too (their certificate says so).
inline WeightTable cached_weight_table(std::size_t k, std::size_t m, double h, const FkConfig& cfg,
                                       const std::optional<std::filesystem::path>& dir) {
  if (dir) {
    const auto p = *dir / lambda_cache_name(k, m, h, cfg);
    if (std::filesystem::exists(p)) return weight_table_from_json(read_json_file(p));
    WeightTable t = solve_lambda_unchecked(k, m, h, cfg);
    write_json_file(p, to_json(t));
    return t;
  }
  return solve_lambda_unchecked(k, m, h, cfg);
}

}  // namespace tailcen::fk
