#pragma once

// CSV emission for aggregated runs. Every file starts with two comment lines
// (# seed=..., # git-describe=...) followed by a header row. Reals use %.5e.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrrl/errors.hpp"
#include "lrrl/harness/aggregate.hpp"

#ifndef LRRL_GIT_DESCRIBE
#define LRRL_GIT_DESCRIBE "unknown"
#endif

namespace lrrl::harness {

enum class CsvKind { regret, err_theta, se_iter };

inline const char* csv_kind_name(CsvKind k) {
  switch (k) {
    case CsvKind::regret: return "regret";
    case CsvKind::err_theta: return "err_theta";
    case CsvKind::se_iter: return "se_iter";
  }
  return "?";
}

inline const char* csv_header(CsvKind k) {
  switch (k) {
    case CsvKind::regret: return "algorithm,T,r,round,mean_cum_regret,var";
    case CsvKind::err_theta: return "algorithm,T,r,epoch,mean_err,var";
    case CsvKind::se_iter: return "algorithm,T,r,epoch,gd_iter,mean_se,mean_err_theta,var_err_theta";
  }
  return "";
}

inline std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.5e", x);
  return buf;
}

namespace detail {

inline std::string key_prefix(const SeriesKey& key) {
  return std::string(algorithm_name(key.algorithm)) + "," + std::to_string(key.tasks) + "," +
         std::to_string(key.rank) + ",";
}

inline std::size_t append_rows(std::string& out, const AggregateResult& result, CsvKind kind) {
  std::size_t rows = 0;
  for (const auto& [key, s] : result.series) {
    const std::string prefix = key_prefix(key);
    switch (kind) {
      case CsvKind::regret:
        for (std::size_t n = 0; n < s.regret.size(); ++n, ++rows)
          out += prefix + std::to_string(n + 1) + "," + format_real(s.regret[n].mean) + "," +
                 format_real(s.regret[n].variance()) + "\n";
        break;
      case CsvKind::err_theta:
        for (std::size_t m = 0; m < s.err_theta.size(); ++m, ++rows)
          out += prefix + std::to_string(m) + "," + format_real(s.err_theta[m].mean) + "," +
                 format_real(s.err_theta[m].variance()) + "\n";
        break;
      case CsvKind::se_iter:
        for (const auto& [at, cell] : s.iterations) {
          // Missing metrics (no planted basis) are written as nan.
          const double se = cell.subspace_error.count ? cell.subspace_error.mean : std::nan("");
          const double err = cell.err_theta.count ? cell.err_theta.mean : std::nan("");
          const double var = cell.err_theta.count ? cell.err_theta.variance() : std::nan("");
          out += prefix + std::to_string(at.first) + "," + std::to_string(at.second) + "," + format_real(se) +
                 "," + format_real(err) + "," + format_real(var) + "\n";
          ++rows;
        }
        break;
    }
  }
  return rows;
}

}  // namespace detail

/// Whether `result` holds any rows of this kind.
inline bool has_rows(const AggregateResult& result, CsvKind kind) {
  std::string scratch;
  return detail::append_rows(scratch, result, kind) > 0;
}

inline std::string render_csv(const AggregateResult& result, CsvKind kind) {
  std::string body;
  if (detail::append_rows(body, result, kind) == 0)
    throw Error(std::string("write_csv: no ") + csv_kind_name(kind) + " data to write");
  std::string out = "# seed=" + std::to_string(result.seed) + "\n# git-describe=" LRRL_GIT_DESCRIBE "\n";
  out += csv_header(kind);
  out += "\n";
  out += body;
  return out;
}

/// Writes one CSV. Throws before touching the filesystem if there is nothing
/// to write.
inline void write_csv(const AggregateResult& result, CsvKind kind, const std::filesystem::path& path) {
  const std::string text = render_csv(result, kind);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_csv: cannot open " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error("write_csv: write failed for " + path.string());
}

struct CsvTable {
  std::vector<std::string> comments;  // without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

/// Reader for the unquoted CSVs written above.
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("read_csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.comments.push_back(line.substr(1));
      continue;
    }
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw Error("read_csv: data row " + std::to_string(table.rows.size() + 1) + " width differs from header in " +
                  path.string());
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw Error("read_csv: no header row in " + path.string());
  return table;
}

}  // namespace lrrl::harness
