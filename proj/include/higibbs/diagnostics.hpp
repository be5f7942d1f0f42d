#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "common.hpp"
#include "gibbs.hpp"

namespace higibbs {

struct GewekeResult {
  double z = 0.0;
  bool degenerate = false;  // both segment variances zero (constant series)
  bool pass = true;

  static constexpr double kCritical = 1.96;
};

namespace detail {

// Batch-means estimate of Var(segment mean): split into floor(sqrt(m))
// batches of equal length and take the sample variance of the batch means
// over the batch count. Robust to the autocorrelation a plain iid variance
// estimate would ignore.
inline double batch_means_var(const Eigen::VectorXd& seg) {
  const int m = static_cast<int>(seg.size());
  int nb = static_cast<int>(std::floor(std::sqrt(static_cast<double>(m))));
  if (nb < 2) throw Error("batch_means_var: segment too short");
  int bs = m / nb;
  Eigen::VectorXd bm(nb);
  for (int b = 0; b < nb; ++b) bm[b] = seg.segment(b * bs, bs).mean();
  double mean = bm.mean();
  double v = (bm.array() - mean).square().sum() / (nb - 1);
  return v / nb;
}

}  // namespace detail

// Geweke convergence statistic on two segments: z = (mean_a - mean_b) /
// sqrt(var_a + var_b) with batch-means variances. Antisymmetric in the
// segments by construction. Constant series make both variances zero; the
// statistic is then reported as a vacuous pass with the degenerate flag set.
inline GewekeResult geweke_z_segments(const Eigen::VectorXd& seg_a,
                                      const Eigen::VectorXd& seg_b) {
  if (seg_a.size() < 4 || seg_b.size() < 4)
    throw Error("geweke_z_segments: segments must have at least 4 values");
  double va = detail::batch_means_var(seg_a);
  double vb = detail::batch_means_var(seg_b);
  GewekeResult r;
  if (va + vb <= 0.0) {
    r.z = 0.0;
    r.degenerate = true;
    r.pass = true;
    return r;
  }
  r.z = (seg_a.mean() - seg_b.mean()) / std::sqrt(va + vb);
  r.pass = std::abs(r.z) < GewekeResult::kCritical;
  return r;
}

// Standard split: first frac_a of the series against the last frac_b.
inline GewekeResult geweke_z(const Eigen::VectorXd& series, double frac_a = 0.2,
                             double frac_b = 0.5) {
  if (!(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0)
    throw Error("geweke_z: fractions must be positive with frac_a + frac_b <= 1");
  const int n = static_cast<int>(series.size());
  int na = static_cast<int>(std::floor(n * frac_a));
  int nb = static_cast<int>(std::floor(n * frac_b));
  if (na < 10 || nb < 10)
    throw Error(strf("geweke_z: series length %d too short for fractions %.3g/%.3g "
                     "(need at least 10 points per segment)",
                     n, frac_a, frac_b));
  return geweke_z_segments(series.head(na), series.tail(nb));
}

struct PsrfResult {
  double value = 1.0;
  bool degenerate = false;  // within-chain variance is exactly zero
  bool pass = true;

  static constexpr double kThreshold = 1.1;
};

// Potential scale reduction factor over two or more equal-length chains:
// sqrt(((n-1)/n W + B/n) / W) with W the mean within-chain variance and B
// the between-chain variance of the chain means (times n).
inline PsrfResult psrf(const std::vector<Eigen::VectorXd>& chains) {
  const int m = static_cast<int>(chains.size());
  if (m < 2) throw Error("psrf: need at least two chains");
  const int n = static_cast<int>(chains[0].size());
  if (n < 10) throw Error("psrf: chains must have at least 10 values");
  for (const auto& ch : chains)
    if (ch.size() != n) throw Error("psrf: chains must have equal length");
  Eigen::VectorXd means(m), vars(m);
  for (int c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    vars[c] = (chains[c].array() - means[c]).square().sum() / (n - 1);
  }
  double w = vars.mean();
  double grand = means.mean();
  double b = n * (means.array() - grand).square().sum() / (m - 1);
  PsrfResult r;
  if (w <= 0.0) {
    r.degenerate = true;
    r.value = b <= 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    r.pass = b <= 0.0;
    return r;
  }
  double vhat = (n - 1.0) / n * w + b / n;
  r.value = std::sqrt(vhat / w);
  r.pass = r.value < PsrfResult::kThreshold;
  return r;
}

// Quantile with linear interpolation between order statistics
// (h = (n - 1) p), the convention most statistical software defaults to.
inline double percentile(const Eigen::VectorXd& sorted, double prob) {
  const int n = static_cast<int>(sorted.size());
  if (n < 1) throw Error("percentile: empty series");
  if (!(prob >= 0.0 && prob <= 1.0)) throw Error("percentile: probability out of [0, 1]");
  double h = (n - 1) * prob;
  int lo = static_cast<int>(std::floor(h));
  if (lo >= n - 1) return sorted[n - 1];
  double frac = h - lo;
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

struct SummaryStats {
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;   // (1 - level)/2 quantile
  double upper = 0.0;   // 1 - (1 - level)/2 quantile
};

// Mean, sample SD, and central interval endpoints of a draw series.
inline SummaryStats posterior_summary(const Eigen::VectorXd& series, double level = 0.95) {
  const int n = static_cast<int>(series.size());
  if (n < 1) throw Error("posterior_summary: empty series");
  if (!(level > 0.0 && level < 1.0)) throw Error("posterior_summary: level must be in (0, 1)");
  SummaryStats s;
  s.mean = series.mean();
  s.sd = n > 1 ? std::sqrt((series.array() - s.mean).square().sum() / (n - 1)) : 0.0;
  Eigen::VectorXd sorted = series;
  std::sort(sorted.data(), sorted.data() + n);
  double a = 0.5 * (1.0 - level);
  s.lower = percentile(sorted, a);
  s.upper = percentile(sorted, 1.0 - a);
  return s;
}

// Per-parameter convergence assessment of a multi-chain run: Geweke on the
// first chain (a single-chain diagnostic), PSRF across chains when two or
// more are available.
struct ConvergenceReport {
  std::vector<std::string> names;
  std::vector<GewekeResult> geweke;
  std::vector<PsrfResult> psrf_values;
  bool has_psrf = false;
  bool all_geweke_pass = true;
  bool all_psrf_pass = true;
};

inline ConvergenceReport assess_convergence(const std::vector<ChainRecord>& chains,
                                            const std::vector<std::string>& monitored) {
  if (chains.empty()) throw Error("assess_convergence: no chains");
  ConvergenceReport rep;
  rep.names = monitored;
  rep.has_psrf = chains.size() >= 2;
  for (const std::string& name : monitored) {
    Eigen::VectorXd first = chains[0].col(name);
    rep.geweke.push_back(geweke_z(first));
    rep.all_geweke_pass = rep.all_geweke_pass && rep.geweke.back().pass;
    if (rep.has_psrf) {
      std::vector<Eigen::VectorXd> series;
      series.reserve(chains.size());
      for (const auto& ch : chains) series.push_back(ch.col(name));
      rep.psrf_values.push_back(psrf(series));
      rep.all_psrf_pass = rep.all_psrf_pass && rep.psrf_values.back().pass;
    }
  }
  return rep;
}

}  // namespace higibbs
