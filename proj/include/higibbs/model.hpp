#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace higibbs {

// Shape of a two-level linear model with cluster-level covariates C (p of
// them, possibly partially observed), unit-level known covariates x1 (q1) and
// cluster-level known covariates x2 (q2). Interaction blocks are explicit
// index lists:
//   active_xc: (s, col) pairs, C_s * x[col] where x = [x1 | x2], col in [0, q1+q2)
//   active_cc: (s, t) pairs with s < t, C_s * C_t
// Both lists are kept in ascending lexicographic order; the fixed-effect
// vector is laid out [intercept | C_1..C_p | x | XC pairs | CC pairs].
struct HlmSpec {
  int p = 1;
  int q1 = 0;
  int q2 = 0;
  std::vector<std::pair<int, int>> active_xc;
  std::vector<std::pair<int, int>> active_cc;

  int q() const { return q1 + q2; }
  int fixed_dim() const {
    return 1 + p + q() + static_cast<int>(active_xc.size()) + static_cast<int>(active_cc.size());
  }
  int alpha_dim() const { return p * (1 + q2); }

  void validate() const {
    if (p < 1) throw Error(strf("HlmSpec: p = %d, need at least one C covariate", p));
    if (q1 < 0 || q2 < 0) throw Error("HlmSpec: q1 and q2 must be nonnegative");
    for (auto [s, col] : active_xc) {
      if (s < 0 || s >= p) throw Error(strf("HlmSpec: XC pair has C index %d outside [0, %d)", s, p));
      if (col < 0 || col >= q())
        throw Error(strf("HlmSpec: XC pair has x column %d outside [0, %d)", col, q()));
    }
    for (auto [s, t] : active_cc) {
      if (s < 0 || t >= p || s >= t)
        throw Error(strf("HlmSpec: CC pair (%d, %d) must satisfy 0 <= s < t < p", s, t));
    }
    if (!std::is_sorted(active_xc.begin(), active_xc.end()) ||
        std::adjacent_find(active_xc.begin(), active_xc.end()) != active_xc.end())
      throw Error("HlmSpec: active_xc must be strictly ascending");
    if (!std::is_sorted(active_cc.begin(), active_cc.end()) ||
        std::adjacent_find(active_cc.begin(), active_cc.end()) != active_cc.end())
      throw Error("HlmSpec: active_cc must be strictly ascending");
  }
};

// Long-format two-level data. Units are grouped by cluster: cluster j owns
// rows [cluster_start[j], cluster_start[j+1]). Missingness is carried as
// flags next to the values; masked cells may still hold data (simulation
// keeps the truth in place so masking is reversible) and must never be read
// by the engine.
struct Dataset {
  Eigen::VectorXd y;               // N
  std::vector<std::uint8_t> y_miss;  // N
  Eigen::MatrixXd x1;              // N x q1
  Eigen::MatrixXd x2;              // J x q2
  Eigen::MatrixXd c;               // J x p
  std::vector<std::uint8_t> c_miss;  // J*p, row-major: [j*p + k]
  std::vector<int> cluster_start;  // J+1 offsets into the unit arrays

  int J() const { return static_cast<int>(cluster_start.size()) - 1; }
  int N() const { return static_cast<int>(y.size()); }
  int n(int j) const { return cluster_start[j + 1] - cluster_start[j]; }
  bool y_observed(int i) const { return y_miss[i] == 0; }
  bool c_observed(int j, int k) const { return c_miss[j * c.cols() + k] == 0; }
  bool cluster_complete(int j) const {
    for (int k = 0; k < c.cols(); ++k)
      if (!c_observed(j, k)) return false;
    return true;
  }

  void validate(const HlmSpec& spec) const {
    spec.validate();
    if (cluster_start.size() < 2) throw Error("Dataset: no clusters");
    if (cluster_start.front() != 0 || cluster_start.back() != N())
      throw Error("Dataset: cluster offsets do not span the unit arrays");
    for (int j = 0; j < J(); ++j)
      if (n(j) < 1) throw Error(strf("Dataset: cluster %d is empty", j));
    if (static_cast<int>(y_miss.size()) != N()) throw Error("Dataset: y_miss length mismatch");
    if (x1.rows() != N() || x1.cols() != spec.q1)
      throw Error(strf("Dataset: x1 is %ldx%ld, expected %dx%d", static_cast<long>(x1.rows()),
                       static_cast<long>(x1.cols()), N(), spec.q1));
    if (x2.rows() != J() || x2.cols() != spec.q2)
      throw Error(strf("Dataset: x2 is %ldx%ld, expected %dx%d", static_cast<long>(x2.rows()),
                       static_cast<long>(x2.cols()), J(), spec.q2));
    if (c.rows() != J() || c.cols() != spec.p)
      throw Error(strf("Dataset: c is %ldx%ld, expected %dx%d", static_cast<long>(c.rows()),
                       static_cast<long>(c.cols()), J(), spec.p));
    if (c_miss.size() != static_cast<std::size_t>(J() * spec.p))
      throw Error("Dataset: c_miss length mismatch");
    if (!x1.allFinite() || !x2.allFinite())
      throw Error("Dataset: known covariates x1, x2 must have no missing entries");
    for (int i = 0; i < N(); ++i)
      if (y_observed(i) && !std::isfinite(y[i]))
        throw Error(strf("Dataset: observed outcome at unit %d is not finite", i));
    for (int j = 0; j < J(); ++j)
      for (int k = 0; k < spec.p; ++k)
        if (c_observed(j, k) && !std::isfinite(c(j, k)))
          throw Error(strf("Dataset: observed C%d in cluster %d is not finite", k + 1, j));
    for (int k = 0; k < spec.p; ++k) {
      bool any = false;
      for (int j = 0; j < J(); ++j) any = any || c_observed(j, k);
      if (!any) throw Error(strf("Dataset: covariate C%d has no observed value in any cluster", k + 1));
    }
  }
};

// Model parameters: fixed effects beta (layout per HlmSpec), variance
// components tau (between-cluster) and sigma2 (within), and the covariate
// model's alpha (component-major blocks of length 1+q2) and T (p x p).
struct Parameters {
  Eigen::VectorXd beta;
  double tau = 1.0;
  double sigma2 = 1.0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd T;

  void validate(const HlmSpec& spec) const {
    if (beta.size() != spec.fixed_dim())
      throw Error(strf("Parameters: beta has length %ld, expected %d",
                       static_cast<long>(beta.size()), spec.fixed_dim()));
    if (!(tau > 0.0) || !(sigma2 > 0.0))
      throw Error(strf("Parameters: tau = %g and sigma2 = %g must be positive", tau, sigma2));
    if (alpha.size() != spec.alpha_dim())
      throw Error(strf("Parameters: alpha has length %ld, expected %d",
                       static_cast<long>(alpha.size()), spec.alpha_dim()));
    if (T.rows() != spec.p || T.cols() != spec.p) throw Error("Parameters: T has wrong shape");
  }
};

// Fixed-effect design vector for one unit:
// [1, c_1..c_p, x, c_s * x_col over active_xc, c_s * c_t over active_cc].
// x1_row may be any 1-D Eigen expression of length q1 (x2_row: q2; c_row: p).
template <class D1, class D2, class D3>
void build_design(const HlmSpec& spec, const Eigen::MatrixBase<D1>& x1_row,
                  const Eigen::MatrixBase<D2>& x2_row, const Eigen::MatrixBase<D3>& c_row,
                  Eigen::Ref<Eigen::VectorXd> out) {
  int pos = 0;
  out[pos++] = 1.0;
  for (int k = 0; k < spec.p; ++k) out[pos++] = c_row(k);
  for (int k = 0; k < spec.q1; ++k) out[pos++] = x1_row(k);
  for (int k = 0; k < spec.q2; ++k) out[pos++] = x2_row(k);
  for (auto [s, col] : spec.active_xc) {
    double x = col < spec.q1 ? x1_row(col) : x2_row(col - spec.q1);
    out[pos++] = c_row(s) * x;
  }
  for (auto [s, t] : spec.active_cc) out[pos++] = c_row(s) * c_row(t);
}

// Convenience form taking the stacked x = [x1 | x2] for one unit.
inline Eigen::VectorXd build_design_vector(const HlmSpec& spec, const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& c) {
  if (x.size() != spec.q()) throw Error(strf("build_design_vector: x has length %ld, expected %d",
                                             static_cast<long>(x.size()), spec.q()));
  if (c.size() != spec.p) throw Error(strf("build_design_vector: c has length %ld, expected %d",
                                           static_cast<long>(c.size()), spec.p));
  Eigen::VectorXd out(spec.fixed_dim());
  build_design(spec, x.head(spec.q1).transpose(), x.tail(spec.q2).transpose(), c.transpose(), out);
  return out;
}

// Design matrix of the covariate model for cluster j: p x p(1+q2), row k
// holding [1, x2_j'] in block k, so covariate_design * alpha stacks the
// componentwise means intercept_k + slope_k' x2_j.
inline Eigen::MatrixXd covariate_design(const Eigen::VectorXd& x2_j, int p) {
  const int m = 1 + static_cast<int>(x2_j.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p * m);
  for (int k = 0; k < p; ++k) {
    w(k, k * m) = 1.0;
    for (int r = 0; r < x2_j.size(); ++r) w(k, k * m + 1 + r) = x2_j[r];
  }
  return w;
}

// Mean of C_j under the covariate model, componentwise alpha_k' [1, x2_j].
template <class D>
Eigen::VectorXd covariate_mean(const Eigen::VectorXd& alpha, const Eigen::MatrixBase<D>& x2_row,
                               int p) {
  const int m = 1 + static_cast<int>(x2_row.size());
  Eigen::VectorXd mu(p);
  for (int k = 0; k < p; ++k) {
    double v = alpha[k * m];
    for (int r = 0; r < x2_row.size(); ++r) v += alpha[k * m + 1 + r] * x2_row(r);
    mu[k] = v;
  }
  return mu;
}

// Residual covariance of C over clusters with fully observed C_j, after
// regressing each component on [1, x2_j]; denominator m - 1 - q2. Used as
// the default prior scale matrix. Ridge-regularized when numerically
// singular (eps = 1e-6 * trace / p, with an absolute floor for the
// all-residuals-zero case).
inline Eigen::MatrixXd complete_case_covariance(const Dataset& d) {
  const int p = static_cast<int>(d.c.cols());
  const int q2 = static_cast<int>(d.x2.cols());
  std::vector<int> rows;
  for (int j = 0; j < d.J(); ++j)
    if (d.cluster_complete(j)) rows.push_back(j);
  const int m = static_cast<int>(rows.size());
  const int need = std::max(p + 1, q2 + 2);
  if (m < need)
    throw Error(strf(
        "complete_case_covariance: only %d clusters have fully observed C (need %d); "
        "supply the prior scale matrix explicitly",
        m, need));
  Eigen::MatrixXd g(m, 1 + q2);
  Eigen::MatrixXd cc(m, p);
  for (int r = 0; r < m; ++r) {
    g(r, 0) = 1.0;
    g.row(r).tail(q2) = d.x2.row(rows[r]);
    cc.row(r) = d.c.row(rows[r]);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd resid = cc - g * qr.solve(cc);
  Eigen::MatrixXd t = resid.transpose() * resid / static_cast<double>(m - 1 - q2);
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(lmax, 1e-300)) {
    double eps = 1e-6 * t.trace() / p;
    if (!(eps > 0.0)) eps = 1e-8;
    t += eps * Eigen::MatrixXd::Identity(p, p);
  }
  return t;
}

// Canonical parameter names, matching the recorded chain column layout:
// beta0.., tau, sigma2, alpha<k>_<r> (k = component 1..p, r = 0 intercept /
// 1..q2 slope), T<s>_<t> upper triangle (1-based, diagonal included).
inline std::vector<std::string> parameter_names(const HlmSpec& spec) {
  std::vector<std::string> names;
  for (int k = 0; k < spec.fixed_dim(); ++k) names.push_back(strf("beta%d", k));
  names.push_back("tau");
  names.push_back("sigma2");
  for (int k = 0; k < spec.p; ++k)
    for (int r = 0; r <= spec.q2; ++r) names.push_back(strf("alpha%d_%d", k + 1, r));
  for (int s = 0; s < spec.p; ++s)
    for (int t = s; t < spec.p; ++t) names.push_back(strf("T%d_%d", s + 1, t + 1));
  return names;
}

// The convergence-monitored subset: fixed effects plus the two variance
// components (the covariate-model nuisance block is excluded).
inline std::vector<std::string> monitored_parameters(const HlmSpec& spec) {
  std::vector<std::string> names;
  for (int k = 0; k < spec.fixed_dim(); ++k) names.push_back(strf("beta%d", k));
  names.push_back("tau");
  names.push_back("sigma2");
  return names;
}

// Human-readable labels for the fixed-effect positions, e.g.
// Intercept, C1, C2, X1, C1*X1, C1*C2. Used by reports.
inline std::vector<std::string> fixed_effect_labels(const HlmSpec& spec) {
  std::vector<std::string> lab;
  lab.push_back("Intercept");
  for (int k = 0; k < spec.p; ++k) lab.push_back(strf("C%d", k + 1));
  for (int k = 0; k < spec.q(); ++k) lab.push_back(strf("X%d", k + 1));
  for (auto [s, col] : spec.active_xc) lab.push_back(strf("C%d*X%d", s + 1, col + 1));
  for (auto [s, t] : spec.active_cc) lab.push_back(strf("C%d*C%d", s + 1, t + 1));
  return lab;
}

}  // namespace higibbs
