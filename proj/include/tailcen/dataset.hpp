#pragma once

// Empirical data sets and CSV ingestion. Two shapes are accepted:
//   * topcoded: a threshold T, with censored rows flagged or equal to T;
//   * missing tail: only the observed values, plus the number m of
//     observations known to lie above them (no threshold).
// Anything else is rejected.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/tokenizer.hpp>

#include "tailcen/error.hpp"
#include "tailcen/tail_data.hpp"

namespace tailcen {

struct Dataset {
  std::vector<double> values;
  std::vector<bool> censored;
  std::optional<double> threshold;
  /// Censored count when the censored rows are absent (no threshold).
  std::optional<std::size_t> m_missing;
  std::string name;

  std::size_t m() const {
    if (m_missing) return *m_missing;
    return static_cast<std::size_t>(std::count(censored.begin(), censored.end(), true));
  }

  /// Sample size including the censored observations.
  std::size_t n() const { return m_missing ? values.size() + *m_missing : values.size(); }

  double censored_percent() const { return n() == 0 ? 0.0 : 100.0 * static_cast<double>(m()) / static_cast<double>(n()); }

  /// Throws ValidationError listing the offending rows.
  void validate() const {
    if (values.empty()) throw ValidationError(name + ": no data rows");
    if (censored.size() != values.size()) throw ValidationError(name + ": flags and values differ in length");
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) bad.push_back(i);
    if (!bad.empty()) throw ValidationError(name + ": non-finite values", bad);
    if (threshold && m_missing) throw ValidationError(name + ": give either a threshold or a missing count, not both");
    if (threshold) {
      for (std::size_t i = 0; i < values.size(); ++i)
        if (censored[i] ? values[i] != *threshold : !(values[i] < *threshold)) bad.push_back(i);
      if (!bad.empty())
        throw ValidationError(name + ": censored rows must equal the threshold and the others lie below it", bad);
    } else {
      for (std::size_t i = 0; i < values.size(); ++i)
        if (censored[i]) bad.push_back(i);
      if (!bad.empty()) throw ValidationError(name + ": censored rows without a threshold", bad);
      if (!m_missing) throw ValidationError(name + ": neither a threshold nor a missing count was given");
    }
  }

  /// Tail with k observed exceedances.
  TailData tail(std::size_t k) const {
    validate();
    if (threshold) return TailData::from_sample(values, k, threshold);
    return TailData::from_sample(values, k, std::nullopt, m_missing);
  }

  /// Uncensored values, sorted descending.
  std::vector<double> observed_desc() const {
    std::vector<double> y;
    y.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!censored[i]) y.push_back(values[i]);
    std::sort(y.begin(), y.end(), std::greater<>());
    return y;
  }
};

struct CsvOptions {
  std::string value_column = "value";
  /// Column of 0/1 (or true/false, yes/no) censoring flags.
  std::optional<std::string> censor_column;
  std::optional<double> threshold;
  std::optional<std::size_t> m_override;
  char delimiter = ',';
};

namespace detail {

inline std::optional<bool> parse_flag(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "1" || s == "true" || s == "yes" || s == "t" || s == "y") return true;
  if (s == "0" || s == "false" || s == "no" || s == "f" || s == "n") return false;
  return std::nullopt;
}

inline std::optional<double> parse_number(const std::string& s) {
  std::size_t pos = 0;
  try {
    const double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads a CSV with a header row. Row indices in errors are 0-based data
/// rows (the header is not counted).
inline Dataset ingest_csv(std::istream& in, const CsvOptions& opt, const std::string& name = "input") {
  if (opt.m_override && (opt.threshold || opt.censor_column))
    throw ValidationError(name + ": a missing count excludes a threshold or a censoring column");
  using Sep = boost::escaped_list_separator<char>;
  const Sep sep('\\', opt.delimiter, '"');
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    boost::tokenizer<Sep> tok(line, sep);
    for (const auto& f : tok) header.push_back(detail::trim(f));
    break;
  }
  if (header.empty()) throw ValidationError(name + ": empty file");
  auto column = [&](const std::string& c) {
    const auto it = std::find(header.begin(), header.end(), c);
    if (it == header.end()) throw ValidationError(name + ": no column '" + c + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t vcol = column(opt.value_column);
  const std::optional<std::size_t> ccol = opt.censor_column ? std::optional(column(*opt.censor_column)) : std::nullopt;

  Dataset ds;
  ds.name = name;
  std::vector<std::size_t> bad;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    try {
      boost::tokenizer<Sep> tok(line, sep);
      for (const auto& s : tok) f.push_back(detail::trim(s));
    } catch (const boost::escaped_list_error&) {
      bad.push_back(row++);
      continue;
    }
    const auto v = vcol < f.size() ? detail::parse_number(f[vcol]) : std::nullopt;
    const auto c = ccol ? (*ccol < f.size() ? detail::parse_flag(f[*ccol]) : std::nullopt) : std::optional(false);
    if (!v || !c) {
      bad.push_back(row++);
      continue;
    }
    ds.values.push_back(*v);
    ds.censored.push_back(*c);
    ++row;
  }
  if (!bad.empty()) throw ValidationError(name + ": unparsable rows", bad);
  if (ds.values.empty()) throw ValidationError(name + ": no data rows");

  if (opt.m_override) {
    ds.m_missing = opt.m_override;
  } else if (opt.threshold) {
    ds.threshold = opt.threshold;
    // Without flags, rows at the threshold are the censored ones.
    if (!ccol)
      for (std::size_t i = 0; i < ds.values.size(); ++i) ds.censored[i] = ds.values[i] == *opt.threshold;
  } else if (ccol) {
    // Flags alone: the threshold is the common value of the flagged rows.
    std::optional<double> t;
    std::vector<std::size_t> off;
    for (std::size_t i = 0; i < ds.values.size(); ++i) {
      if (!ds.censored[i]) continue;
      if (!t) t = ds.values[i];
      if (ds.values[i] != *t) off.push_back(i);
    }
    if (!t) throw ValidationError(name + ": no flagged rows and no threshold");
    if (!off.empty()) throw ValidationError(name + ": flagged rows carry different values, give the threshold", off);
    ds.threshold = t;
  } else {
    throw ValidationError(name + ": give a censoring column, a threshold, or a missing count");
  }
  ds.validate();
  return ds;
}

inline Dataset ingest_csv(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return ingest_csv(in, opt, path);
}

}  // namespace tailcen
