#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "diagnostics.hpp"
#include "gibbs.hpp"
#include "model.hpp"
#include "simulation.hpp"

namespace higibbs {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

// Plain key = value configuration, '#' comments, one pair per line.
struct Config {
  std::map<std::string, std::string> values;
  std::string source;

  bool has(const std::string& key) const { return values.count(key) > 0; }

  std::string get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
      throw Error(strf("%s: missing required key '%s'", source.c_str(), key.c_str()));
    return it->second;
  }
  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }
  double get_double(const std::string& key) const { return parse_double(key, get(key)); }
  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }
  long get_int(const std::string& key) const {
    double v = get_double(key);
    long r = static_cast<long>(v);
    if (static_cast<double>(r) != v)
      throw Error(strf("%s: key '%s' must be an integer, got '%s'", source.c_str(), key.c_str(),
                       get(key).c_str()));
    return r;
  }
  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }
  std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& tok : split_list(get(key)))
      out.push_back(parse_double(key, tok));
    return out;
  }

  double parse_double(const std::string& key, const std::string& tok) const {
    const char* begin = tok.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(v))
      throw Error(strf("%s: key '%s' has non-numeric value '%s'", source.c_str(), key.c_str(),
                       tok.c_str()));
    return v;
  }
};

inline Config parse_config_text(const std::string& text, const std::string& source) {
  Config cfg;
  cfg.source = source;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(strf("%s:%d: expected 'key = value', got '%s'", source.c_str(), lineno,
                       line.c_str()));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(strf("%s:%d: empty key", source.c_str(), lineno));
    if (cfg.values.count(key))
      throw Error(strf("%s:%d: duplicate key '%s'", source.c_str(), lineno, key.c_str()));
    cfg.values[key] = value;
  }
  return cfg;
}

inline Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(strf("cannot open config file '%s'", path.c_str()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// Column roles of a long-format CSV: one row per unit, cluster membership in
// a label column, level-2 columns constant within each cluster. Missing
// cells (sentinels: empty or NA) are allowed in the outcome and the
// partially observed cluster-level covariates only.
struct ColumnSchema {
  std::string outcome;
  std::string cluster;
  std::vector<std::string> level1;   // unit-level known covariates (x1)
  std::vector<std::string> level2;   // cluster-level known covariates (x2)
  std::vector<std::string> partial;  // cluster-level partially observed (C)
  std::vector<std::string> center;   // covariate names to center before fitting

  static ColumnSchema from_config(const Config& cfg) {
    ColumnSchema s;
    s.outcome = cfg.get("outcome");
    s.cluster = cfg.get("cluster");
    s.level1 = split_list(cfg.get("level1", ""));
    s.level2 = split_list(cfg.get("level2", ""));
    s.partial = split_list(cfg.get("partial"));
    s.center = split_list(cfg.get("center", ""));
    s.validate();
    return s;
  }

  void validate() const {
    if (outcome.empty() || cluster.empty())
      throw Error("ColumnSchema: outcome and cluster columns are required");
    if (partial.empty())
      throw Error("ColumnSchema: at least one partially observed covariate is required");
    std::vector<std::string> all{outcome, cluster};
    for (const auto* grp : {&level1, &level2, &partial})
      all.insert(all.end(), grp->begin(), grp->end());
    std::vector<std::string> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    if (dup != sorted.end())
      throw Error(strf("ColumnSchema: column '%s' is listed under more than one role",
                       dup->c_str()));
    for (const std::string& name : center) {
      bool known = std::find(level1.begin(), level1.end(), name) != level1.end() ||
                   std::find(level2.begin(), level2.end(), name) != level2.end() ||
                   std::find(partial.begin(), partial.end(), name) != partial.end();
      if (!known)
        throw Error(strf("ColumnSchema: center lists '%s', which is not a covariate column",
                         name.c_str()));
    }
  }
};

// A loaded dataset plus everything needed to interpret and report it.
struct LoadedData {
  Dataset data;
  std::vector<std::string> cluster_labels;      // by cluster index
  std::vector<std::string> x1_names, x2_names, c_names;
  std::map<std::string, double> centers;        // applied centering offsets
};

namespace detail {

inline bool is_sentinel(const std::string& tok) { return tok.empty() || tok == "NA"; }

inline std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

inline double parse_cell(const std::string& tok, int row, const std::string& col) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v))
    throw Error(strf("row %d, column '%s': cannot parse '%s' as a number", row, col.c_str(),
                     tok.c_str()));
  return v;
}

}  // namespace detail

// Load a long-format CSV per the schema. Rows are grouped by cluster label
// in order of first appearance (within a cluster, file order is kept).
// Validates numeric cells, missingness placement, and within-cluster
// constancy of every level-2 column before constructing the dataset, so a
// bad file never yields a partial result.
inline LoadedData load_dataset(const std::string& path, const ColumnSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw Error(strf("cannot open data file '%s'", path.c_str()));
  std::string line;
  if (!std::getline(in, line)) throw Error(strf("'%s' is empty", path.c_str()));
  std::vector<std::string> header = detail::split_csv_row(line);
  std::map<std::string, int> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i]))
      throw Error(strf("'%s': duplicate column '%s' in header", path.c_str(), header[i].c_str()));
    col[header[i]] = static_cast<int>(i);
  }
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end())
      throw Error(strf("'%s': required column '%s' not found in header", path.c_str(),
                       name.c_str()));
    return it->second;
  };
  int c_outcome = need(schema.outcome);
  int c_cluster = need(schema.cluster);
  std::vector<int> c_l1, c_l2, c_pp;
  for (const auto& n : schema.level1) c_l1.push_back(need(n));
  for (const auto& n : schema.level2) c_l2.push_back(need(n));
  for (const auto& n : schema.partial) c_pp.push_back(need(n));

  struct RawRow {
    std::string cluster;
    double y = 0.0;
    bool y_miss = false;
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<double> c;
    std::vector<bool> c_miss;
  };
  std::vector<RawRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> f = detail::split_csv_row(line);
    if (f.size() != header.size())
      throw Error(strf("'%s' row %d: %zu fields, header has %zu", path.c_str(), lineno, f.size(),
                       header.size()));
    RawRow r;
    r.cluster = f[c_cluster];
    if (r.cluster.empty())
      throw Error(strf("'%s' row %d: empty cluster label", path.c_str(), lineno));
    if (detail::is_sentinel(f[c_outcome]))
      r.y_miss = true;
    else
      r.y = detail::parse_cell(f[c_outcome], lineno, schema.outcome);
    for (std::size_t k = 0; k < c_l1.size(); ++k) {
      if (detail::is_sentinel(f[c_l1[k]]))
        throw Error(strf("'%s' row %d: known covariate '%s' is missing; only the outcome and "
                         "partial covariates may have missing cells",
                         path.c_str(), lineno, schema.level1[k].c_str()));
      r.x1.push_back(detail::parse_cell(f[c_l1[k]], lineno, schema.level1[k]));
    }
    for (std::size_t k = 0; k < c_l2.size(); ++k) {
      if (detail::is_sentinel(f[c_l2[k]]))
        throw Error(strf("'%s' row %d: known covariate '%s' is missing; only the outcome and "
                         "partial covariates may have missing cells",
                         path.c_str(), lineno, schema.level2[k].c_str()));
      r.x2.push_back(detail::parse_cell(f[c_l2[k]], lineno, schema.level2[k]));
    }
    for (std::size_t k = 0; k < c_pp.size(); ++k) {
      if (detail::is_sentinel(f[c_pp[k]])) {
        r.c.push_back(0.0);
        r.c_miss.push_back(true);
      } else {
        r.c.push_back(detail::parse_cell(f[c_pp[k]], lineno, schema.partial[k]));
        r.c_miss.push_back(false);
      }
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(strf("'%s' has a header but no data rows", path.c_str()));

  std::vector<std::string> labels;
  std::map<std::string, int> cluster_of;
  for (const auto& r : rows)
    if (!cluster_of.count(r.cluster)) {
      cluster_of[r.cluster] = static_cast<int>(labels.size());
      labels.push_back(r.cluster);
    }
  const int J = static_cast<int>(labels.size());
  const int p = static_cast<int>(schema.partial.size());
  const int q1 = static_cast<int>(schema.level1.size());
  const int q2 = static_cast<int>(schema.level2.size());

  // Within-cluster constancy of level-2 columns; a partial covariate must be
  // uniformly missing or uniformly one value per cluster.
  std::vector<std::vector<const RawRow*>> by_cluster(J);
  for (const auto& r : rows) by_cluster[cluster_of[r.cluster]].push_back(&r);
  for (int j = 0; j < J; ++j) {
    const auto& grp = by_cluster[j];
    for (int k = 0; k < q2; ++k)
      for (const RawRow* r : grp)
        if (r->x2[k] != grp[0]->x2[k])
          throw Error(strf("level-2 column '%s' varies within cluster '%s'",
                           schema.level2[k].c_str(), labels[j].c_str()));
    for (int k = 0; k < p; ++k)
      for (const RawRow* r : grp)
        if (r->c_miss[k] != grp[0]->c_miss[k] ||
            (!r->c_miss[k] && r->c[k] != grp[0]->c[k]))
          throw Error(strf("level-2 column '%s' varies within cluster '%s'",
                           schema.partial[k].c_str(), labels[j].c_str()));
  }

  LoadedData out;
  out.cluster_labels = labels;
  out.x1_names = schema.level1;
  out.x2_names = schema.level2;
  out.c_names = schema.partial;
  Dataset& d = out.data;
  const int N = static_cast<int>(rows.size());
  d.y.resize(N);
  d.y_miss.assign(N, 0);
  d.x1.resize(N, q1);
  d.x2.resize(J, q2);
  d.c.resize(J, p);
  d.c_miss.assign(static_cast<std::size_t>(J) * p, 0);
  d.cluster_start.resize(J + 1);
  int at = 0;
  for (int j = 0; j < J; ++j) {
    d.cluster_start[j] = at;
    const auto& grp = by_cluster[j];
    for (int k = 0; k < q2; ++k) d.x2(j, k) = grp[0]->x2[k];
    for (int k = 0; k < p; ++k) {
      d.c(j, k) = grp[0]->c[k];
      d.c_miss[j * p + k] = grp[0]->c_miss[k] ? 1 : 0;
    }
    for (const RawRow* r : grp) {
      d.y[at] = r->y;
      d.y_miss[at] = r->y_miss ? 1 : 0;
      for (int k = 0; k < q1; ++k) d.x1(at, k) = r->x1[k];
      ++at;
    }
  }
  d.cluster_start[J] = at;

  // Centering: covariates only, against the mean of the observed values;
  // offsets are recorded for back-transformation in reports.
  for (const std::string& name : schema.center) {
    auto idx_of = [](const std::vector<std::string>& v, const std::string& n) {
      auto it = std::find(v.begin(), v.end(), n);
      return it == v.end() ? -1 : static_cast<int>(it - v.begin());
    };
    int k;
    if ((k = idx_of(schema.level1, name)) >= 0) {
      double m = d.x1.col(k).mean();
      d.x1.col(k).array() -= m;
      out.centers[name] = m;
    } else if ((k = idx_of(schema.level2, name)) >= 0) {
      double m = d.x2.col(k).mean();
      d.x2.col(k).array() -= m;
      out.centers[name] = m;
    } else if ((k = idx_of(schema.partial, name)) >= 0) {
      double sum = 0.0;
      int cnt = 0;
      for (int j = 0; j < J; ++j)
        if (!d.c_miss[j * p + k]) {
          sum += d.c(j, k);
          ++cnt;
        }
      double m = sum / cnt;
      for (int j = 0; j < J; ++j)
        if (!d.c_miss[j * p + k]) d.c(j, k) -= m;
      out.centers[name] = m;
    }
  }
  return out;
}

// Write a dataset back to CSV in the schema's column order (cluster,
// outcome, level1, level2, partial); masked cells become NA. Loading the
// result with the same (non-centering) schema reproduces the dataset.
inline void save_dataset(const std::string& path, const LoadedData& ld,
                         const ColumnSchema& schema) {
  std::ofstream outf(path);
  if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
  outf << schema.cluster << "," << schema.outcome;
  for (const auto& n : schema.level1) outf << "," << n;
  for (const auto& n : schema.level2) outf << "," << n;
  for (const auto& n : schema.partial) outf << "," << n;
  outf << "\n";
  const Dataset& d = ld.data;
  const int p = static_cast<int>(d.c.cols());
  for (int j = 0; j < d.J(); ++j) {
    for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
      outf << ld.cluster_labels[j];
      if (d.y_miss[i])
        outf << ",NA";
      else
        outf << "," << strf("%.17g", d.y[i]);
      for (int k = 0; k < d.x1.cols(); ++k) outf << "," << strf("%.17g", d.x1(i, k));
      for (int k = 0; k < d.x2.cols(); ++k) outf << "," << strf("%.17g", d.x2(j, k));
      for (int k = 0; k < p; ++k) {
        if (d.c_miss[j * p + k])
          outf << ",NA";
        else
          outf << "," << strf("%.17g", d.c(j, k));
      }
      outf << "\n";
    }
  }
  if (!outf) throw Error(strf("write to '%s' failed", path.c_str()));
}

// Columnar chain trace: header row of parameter names, one tab-separated
// row per kept draw, full double precision.
inline void write_chain_record(const std::string& path, const ChainRecord& rec) {
  std::ofstream outf(path);
  if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
  for (std::size_t k = 0; k < rec.names.size(); ++k)
    outf << (k ? "\t" : "") << rec.names[k];
  outf << "\n";
  for (Eigen::Index r = 0; r < rec.draws.rows(); ++r) {
    for (Eigen::Index k = 0; k < rec.draws.cols(); ++k)
      outf << (k ? "\t" : "") << strf("%.17g", rec.draws(r, k));
    outf << "\n";
  }
  if (!outf) throw Error(strf("write to '%s' failed", path.c_str()));
}

inline ChainRecord read_chain_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(strf("cannot open chain file '%s'", path.c_str()));
  std::string line;
  if (!std::getline(in, line)) throw Error(strf("chain file '%s' is empty", path.c_str()));
  ChainRecord rec;
  {
    std::istringstream is(line);
    std::string tok;
    while (std::getline(is, tok, '\t')) rec.names.push_back(trim(tok));
  }
  if (rec.names.empty()) throw Error(strf("chain file '%s' has no columns", path.c_str()));
  std::vector<std::vector<double>> data;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::istringstream is(line);
    std::string tok;
    while (std::getline(is, tok, '\t')) {
      const char* begin = tok.c_str();
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin || *end != '\0')
        throw Error(strf("'%s' row %d: cannot parse '%s'", path.c_str(), lineno, tok.c_str()));
      row.push_back(v);
    }
    if (row.size() != rec.names.size())
      throw Error(strf("'%s' row %d: %zu fields, header has %zu", path.c_str(), lineno,
                       row.size(), rec.names.size()));
    data.push_back(std::move(row));
  }
  if (data.empty()) throw Error(strf("chain file '%s' has no draws", path.c_str()));
  rec.draws.resize(static_cast<Eigen::Index>(data.size()),
                   static_cast<Eigen::Index>(rec.names.size()));
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t k = 0; k < data[r].size(); ++k)
      rec.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = data[r][k];
  return rec;
}

// One single-column file per parameter per chain, for external plotting:
// <dir>/<parameter>_chain<k>.txt, header line then one value per row.
inline void write_trace_series(const std::string& dir, const std::vector<ChainRecord>& chains) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (std::size_t k = 0; k < chains[c].names.size(); ++k) {
      std::string path =
          (fs::path(dir) / strf("%s_chain%zu.txt", chains[c].names[k].c_str(), c + 1)).string();
      std::ofstream outf(path);
      if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
      outf << chains[c].names[k] << "\n";
      for (Eigen::Index r = 0; r < chains[c].draws.rows(); ++r)
        outf << strf("%.17g", chains[c].draws(r, static_cast<Eigen::Index>(k))) << "\n";
    }
  }
}

struct FitRow {
  std::string parameter;
  std::string label;
  SummaryStats stats;
  bool significant = false;  // central interval excludes zero
};

// Pooled-chain estimates table plus a human-readable report with the ICC and
// the convergence assessment.
inline std::vector<FitRow> fit_rows(const std::vector<ChainRecord>& chains,
                                    const std::vector<std::string>& names,
                                    const std::vector<std::string>& labels) {
  std::vector<FitRow> rows;
  for (std::size_t k = 0; k < names.size(); ++k) {
    Eigen::VectorXd pooled(static_cast<Eigen::Index>(chains.size()) * chains[0].draws.rows());
    Eigen::Index at = 0;
    for (const auto& ch : chains) {
      pooled.segment(at, ch.draws.rows()) = ch.col(names[k]);
      at += ch.draws.rows();
    }
    FitRow row;
    row.parameter = names[k];
    row.label = k < labels.size() ? labels[k] : "-";
    row.stats = posterior_summary(pooled);
    row.significant = row.stats.lower > 0.0 || row.stats.upper < 0.0;
    rows.push_back(row);
  }
  return rows;
}

inline void write_estimates_tsv(const std::string& path, const std::vector<FitRow>& rows) {
  std::ofstream outf(path);
  if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
  outf << "parameter\tterm\testimate\tse\tlower2.5\tupper97.5\tsignif\n";
  for (const auto& r : rows)
    outf << r.parameter << "\t" << r.label << "\t" << strf("%.10g", r.stats.mean) << "\t"
         << strf("%.10g", r.stats.sd) << "\t" << strf("%.10g", r.stats.lower) << "\t"
         << strf("%.10g", r.stats.upper) << "\t" << (r.significant ? "*" : "") << "\n";
  if (!outf) throw Error(strf("write to '%s' failed", path.c_str()));
}

inline void write_fit_report(const std::string& path, const std::vector<FitRow>& rows,
                             const ConvergenceReport& conv, double icc, int n_units,
                             int n_clusters, const std::map<std::string, double>& centers) {
  std::ofstream outf(path);
  if (!outf) throw Error(strf("cannot write '%s'", path.c_str()));
  outf << "Hierarchical linear model fit\n";
  outf << strf("%d units in %d clusters\n\n", n_units, n_clusters);
  outf << strf("%-10s %-12s %10s %10s %10s %10s  %s\n", "parameter", "term", "estimate", "se",
               "2.5%", "97.5%", "");
  for (const auto& r : rows)
    outf << strf("%-10s %-12s %10.4f %10.4f %10.4f %10.4f  %s\n", r.parameter.c_str(),
                 r.label.c_str(), r.stats.mean, r.stats.sd, r.stats.lower, r.stats.upper,
                 r.significant ? "*" : "");
  outf << strf("\nICC (tau / (tau + sigma2)): %.4f\n", icc);
  if (!centers.empty()) {
    outf << "\nCentered covariates (subtracted means):\n";
    for (const auto& [name, m] : centers) outf << strf("  %s: %.6g\n", name.c_str(), m);
  }
  outf << "\nConvergence\n";
  outf << strf("  Geweke (first chain, |z| < %.2f): %s\n", GewekeResult::kCritical,
               conv.all_geweke_pass ? "all parameters pass" : "FAILURES");
  if (conv.has_psrf)
    outf << strf("  PSRF (< %.2f): %s\n", PsrfResult::kThreshold,
                 conv.all_psrf_pass ? "all parameters pass" : "FAILURES");
  else
    outf << "  PSRF: not available (single chain)\n";
  outf << strf("\n  %-10s %10s %6s %10s %6s\n", "parameter", "geweke_z", "pass", "psrf", "pass");
  for (std::size_t k = 0; k < conv.names.size(); ++k) {
    std::string psrf_txt = "-", psrf_pass = "-";
    if (conv.has_psrf) {
      psrf_txt = strf("%.4f", conv.psrf_values[k].value);
      psrf_pass = conv.psrf_values[k].pass ? "yes" : "NO";
    }
    outf << strf("  %-10s %10.4f %6s %10s %6s\n", conv.names[k].c_str(), conv.geweke[k].z,
                 conv.geweke[k].pass ? "yes" : "NO", psrf_txt.c_str(), psrf_pass.c_str());
  }
  if (!outf) throw Error(strf("write to '%s' failed", path.c_str()));
}

// Simulation outputs: per-parameter aggregate table and a per-replication
// log (estimates, intervals, convergence flags, failures).
inline void write_sim_report(const std::string& dir, const ReplicationReport& rep,
                             const SimulationDesign& design) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream outf((fs::path(dir) / "aggregate.tsv").string());
    if (!outf) throw Error("cannot write aggregate.tsv");
    outf << "parameter\ttruth\tbias_pct\tase\tese\tcoverage\n";
    for (std::size_t k = 0; k < rep.names.size(); ++k)
      outf << rep.names[k] << "\t" << strf("%.10g", rep.truth[k]) << "\t"
           << strf("%.10g", rep.bias_pct[k]) << "\t" << strf("%.10g", rep.ase[k]) << "\t"
           << strf("%.10g", rep.ese[k]) << "\t" << strf("%.10g", rep.coverage[k]) << "\n";
  }
  {
    std::ofstream outf((fs::path(dir) / "replications.tsv").string());
    if (!outf) throw Error("cannot write replications.tsv");
    outf << "replication\tstatus\tgeweke_pass\tpsrf_pass";
    for (const auto& n : rep.names) outf << "\test_" << n << "\tse_" << n;
    outf << "\terror\n";
    for (std::size_t r = 0; r < rep.rows.size(); ++r) {
      const auto& row = rep.rows[r];
      outf << (r + 1) << "\t" << (row.failed ? "failed" : "ok") << "\t"
           << (row.failed ? "-" : (row.geweke_all ? "1" : "0")) << "\t"
           << (row.failed ? "-" : (row.psrf_all ? "1" : "0"));
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(rep.names.size()); ++k) {
        if (row.failed)
          outf << "\t-\t-";
        else
          outf << "\t" << strf("%.10g", row.est[k]) << "\t" << strf("%.10g", row.se[k]);
      }
      outf << "\t" << (row.failed ? row.error : "") << "\n";
    }
  }
  {
    std::ofstream outf((fs::path(dir) / "summary.txt").string());
    if (!outf) throw Error("cannot write summary.txt");
    outf << strf("Scenario %s: %d clusters of %d units, %d replications\n",
                 scenario_name(design.scenario), design.clusters, design.cluster_size,
                 rep.replications);
    outf << strf("completed %d, failed %d\n\n", rep.completed, rep.failed);
    outf << strf("%-10s %8s %10s %8s %8s %9s\n", "parameter", "truth", "bias_pct", "ase", "ese",
                 "coverage");
    for (std::size_t k = 0; k < rep.names.size(); ++k)
      outf << strf("%-10s %8.3f %10.3f %8.3f %8.3f %9.3f\n", rep.names[k].c_str(), rep.truth[k],
                   rep.bias_pct[k], rep.ase[k], rep.ese[k], rep.coverage[k]);
    if (rep.ese_degenerate)
      outf << "\nESE is degenerate (fewer than two completed replications).\n";
    outf << strf("\nGeweke pass rate (all monitored parameters): %.3f\n", rep.geweke_pass_rate);
    outf << strf("PSRF pass rate (all monitored parameters):   %.3f\n", rep.psrf_pass_rate);
  }
}

}  // namespace higibbs
