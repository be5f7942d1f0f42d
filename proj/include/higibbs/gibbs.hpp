#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace higibbs {

// Conjugate prior settings. The inverse-gamma pair (shape, scale) applies to
// both tau and sigma2 and enters the conditional rate as 1/scale; the
// inverse-Wishart prior on T defaults to dof = p + 2 with the complete-case
// residual covariance as scale matrix when none is given.
struct PriorConfig {
  double ig_shape = 1.0;
  double ig_scale = 0.5;
  double iw_dof = 0.0;          // <= 0: use p + 2
  Eigen::MatrixXd iw_scale;     // empty: complete-case estimate from the data

  void validate() const {
    if (!(ig_shape > 0.0) || !(ig_scale > 0.0))
      throw Error("PriorConfig: inverse-gamma shape and scale must be positive");
  }
};

struct ResolvedPriors {
  double ig_shape = 1.0;
  double ig_rate = 2.0;   // 1 / ig_scale
  double iw_dof = 3.0;
  Eigen::MatrixXd iw_scale;
};

inline ResolvedPriors resolve_priors(const PriorConfig& pc, const Dataset& d,
                                     const HlmSpec& spec) {
  pc.validate();
  ResolvedPriors r;
  r.ig_shape = pc.ig_shape;
  r.ig_rate = 1.0 / pc.ig_scale;
  r.iw_dof = pc.iw_dof > 0.0 ? pc.iw_dof : spec.p + 2.0;
  if (!(r.iw_dof > spec.p - 1.0))
    throw Error(strf("PriorConfig: inverse-Wishart dof %g must exceed p - 1 = %d", r.iw_dof,
                     spec.p - 1));
  if (pc.iw_scale.size() > 0) {
    if (pc.iw_scale.rows() != spec.p || pc.iw_scale.cols() != spec.p)
      throw Error("PriorConfig: inverse-Wishart scale has wrong shape");
    detail::require_symmetric(pc.iw_scale, "PriorConfig");
    Eigen::LLT<Eigen::MatrixXd> llt(pc.iw_scale);
    if (llt.info() != Eigen::Success)
      throw Error("PriorConfig: inverse-Wishart scale is not positive definite");
    r.iw_scale = pc.iw_scale;
  } else {
    r.iw_scale = complete_case_covariance(d);
  }
  return r;
}

struct GibbsConfig {
  int burn_in = 2500;
  int kept = 2500;
  int n_chains = 2;
  std::uint64_t seed = 1;
  bool record_u = false;
  bool record_imputed = false;

  void validate() const {
    if (burn_in < 0) throw Error("GibbsConfig: burn_in must be nonnegative");
    if (kept < 1) throw Error("GibbsConfig: kept must be positive");
    if (n_chains < 1) throw Error("GibbsConfig: need at least one chain");
  }
};

struct ConditionalMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Linear predictor of one unit split against covariate C_k:
// predictor = offset + slope * c_k, where offset collects every term free of
// C_k (including the cluster effect u_j) and slope collects the coefficient
// multiplying C_k (its main effect plus active interactions touching k).
struct PredictorSplit {
  double offset = 0.0;
  double slope = 0.0;
};

template <class D1, class D2, class D3>
PredictorSplit split_predictor(const HlmSpec& spec, const Eigen::VectorXd& beta,
                               const Eigen::MatrixBase<D1>& x1_row,
                               const Eigen::MatrixBase<D2>& x2_row,
                               const Eigen::MatrixBase<D3>& c_row, double u_j, int k) {
  PredictorSplit ps;
  int pos = 0;
  ps.offset = beta[pos++] + u_j;
  for (int s = 0; s < spec.p; ++s) {
    if (s == k)
      ps.slope += beta[pos++];
    else
      ps.offset += beta[pos++] * c_row(s);
  }
  for (int r = 0; r < spec.q1; ++r) ps.offset += beta[pos++] * x1_row(r);
  for (int r = 0; r < spec.q2; ++r) ps.offset += beta[pos++] * x2_row(r);
  for (auto [s, col] : spec.active_xc) {
    double x = col < spec.q1 ? x1_row(col) : x2_row(col - spec.q1);
    if (s == k)
      ps.slope += beta[pos] * x;
    else
      ps.offset += beta[pos] * x * c_row(s);
    ++pos;
  }
  for (auto [s, t] : spec.active_cc) {
    if (s == k)
      ps.slope += beta[pos] * c_row(t);
    else if (t == k)
      ps.slope += beta[pos] * c_row(s);
    else
      ps.offset += beta[pos] * c_row(s) * c_row(t);
    ++pos;
  }
  return ps;
}

// Gaussian conditional of component k of C_j given the other components,
// under C_j ~ N(mu, T). c_row supplies the conditioning values (its k-th
// entry is ignored); p = 1 returns the marginal.
template <class D>
ConditionalMoments conditional_prior_c(int k, const Eigen::MatrixBase<D>& c_row,
                                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& T) {
  const int p = static_cast<int>(T.rows());
  if (k < 0 || k >= p) throw Error(strf("conditional_prior_c: component %d out of range", k));
  if (p == 1) {
    if (!(T(0, 0) > 0.0)) throw Error("conditional_prior_c: T is not positive");
    return {mu[0], T(0, 0)};
  }
  Eigen::MatrixXd t_oo(p - 1, p - 1);
  Eigen::VectorXd t_ko(p - 1), dev(p - 1);
  int a = 0;
  for (int s = 0; s < p; ++s) {
    if (s == k) continue;
    t_ko[a] = T(k, s);
    dev[a] = c_row(s) - mu[s];
    int b = 0;
    for (int t = 0; t < p; ++t) {
      if (t == k) continue;
      t_oo(a, b++) = T(s, t);
    }
    ++a;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(t_oo);
  if (llt.info() != Eigen::Success)
    throw Error("conditional_prior_c: conditioning block of T is not positive definite");
  Eigen::VectorXd w = llt.solve(t_ko);
  ConditionalMoments cm;
  cm.mean = mu[k] + w.dot(dev);
  cm.var = T(k, k) - w.dot(t_ko);
  if (!(cm.var > 0.0))
    throw Error(strf("conditional_prior_c: conditional variance %g is not positive", cm.var));
  return cm;
}

// Exact conditional posterior of one missing C_kj: Gaussian prior
// (conditional of the covariate model) times the outcome likelihood of the
// cluster's units, each linear in c_k. y_j, x1_j hold the cluster's
// completed outcomes and level-1 covariates; c_row the current covariate
// values (entry k arbitrary).
template <class DY, class DX1, class DX2, class DC>
ConditionalMoments missing_c_posterior(const HlmSpec& spec, const Eigen::VectorXd& beta,
                                       double sigma2, const Eigen::MatrixBase<DY>& y_j,
                                       const Eigen::MatrixBase<DX1>& x1_j,
                                       const Eigen::MatrixBase<DX2>& x2_row,
                                       const Eigen::MatrixBase<DC>& c_row, double u_j, int k,
                                       const ConditionalMoments& prior) {
  if (!(prior.var > 0.0)) throw Error("missing_c_posterior: prior variance must be positive");
  if (!(sigma2 > 0.0)) throw Error("missing_c_posterior: sigma2 must be positive");
  double sum_sq = 0.0, sum_cross = 0.0;
  for (Eigen::Index i = 0; i < y_j.size(); ++i) {
    PredictorSplit ps = split_predictor(spec, beta, x1_j.row(i), x2_row, c_row, u_j, k);
    sum_sq += ps.slope * ps.slope;
    sum_cross += ps.slope * (y_j(i) - ps.offset - ps.slope * prior.mean);
  }
  double prec = 1.0 / prior.var + sum_sq / sigma2;
  ConditionalMoments post;
  post.var = 1.0 / prec;
  post.mean = prior.mean + post.var * sum_cross / sigma2;
  return post;
}

// Full latent state of one chain: parameters, cluster effects, and completed
// copies of the outcome and covariates (observed cells fixed, masked cells
// holding the current imputations).
struct ChainState {
  Parameters params;
  Eigen::VectorXd u;   // J
  Eigen::VectorXd y;   // N, completed
  Eigen::MatrixXd c;   // J x p, completed
};

// Kept draws of one chain, one named column per recorded scalar.
struct ChainRecord {
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // kept x names.size()

  int col_index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw Error(strf("ChainRecord: no column named '%s'", name.c_str()));
  }
  Eigen::VectorXd col(const std::string& name) const { return draws.col(col_index(name)); }
};

// One full Gibbs cycle updates, in order:
//   u, tau, beta, sigma2, missing y, alpha, T, missing C (ascending k).
// Every conditional is exact (conjugate or Gaussian), so there are no
// accept/reject moves. Each update conditions on the current state, i.e.
// quantities updated earlier in the same cycle enter at their new values.
class GibbsSampler {
 public:
  GibbsSampler(const HlmSpec& spec, const Dataset& data, const ResolvedPriors& priors)
      : spec_(spec), data_(&data), pri_(priors), design_(spec.fixed_dim()) {
    spec_.validate();
    data.validate(spec_);
    const int m = 1 + spec_.q2;
    ww_sum_ = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd w(m);
    for (int j = 0; j < data.J(); ++j) {
      w[0] = 1.0;
      w.tail(spec_.q2) = data.x2.row(j);
      ww_sum_.selfadjointView<Eigen::Lower>().rankUpdate(w);
    }
    ww_sum_ = ww_sum_.selfadjointView<Eigen::Lower>();
    for (int i = 0; i < data.N(); ++i)
      if (!data.y_observed(i)) y_missing_.push_back(i);
    c_missing_.resize(data.J());
    for (int j = 0; j < data.J(); ++j)
      for (int k = 0; k < spec_.p; ++k)
        if (!data.c_observed(j, k)) c_missing_[j].push_back(k);
  }

  const Dataset& data() const { return *data_; }

  // Step 1: u_j | rest ~ N(d^-1 sigma^-2 sum_i r_ij, d^-1),
  // d = n_j / sigma2 + 1 / tau, r_ij the fixed-effect residual.
  void step_u(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    for (int j = 0; j < d.J(); ++j) {
      double rsum = 0.0;
      for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i)
        rsum += s.y[i] - fitted(s, i, j);
      double prec = d.n(j) / s.params.sigma2 + 1.0 / s.params.tau;
      s.u[j] = draw_normal(rsum / s.params.sigma2 / prec, 1.0 / prec, rng);
    }
  }

  // Step 2: tau | u ~ IG(J/2 + a0, sum_j u_j^2 / 2 + 1/b0).
  void step_tau(ChainState& s, RngStream& rng) {
    double shape = 0.5 * data_->J() + pri_.ig_shape;
    double rate = 0.5 * s.u.squaredNorm() + pri_.ig_rate;
    s.params.tau = draw_inverse_gamma(shape, rate, rng);
  }

  // Step 3: beta | rest ~ N((X'X)^-1 X'(y - u), sigma2 (X'X)^-1) over all
  // units, with the completed y and C. A singular cross-product matrix is a
  // modeling error and is reported with the offending design column.
  void step_beta(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    const int kdim = spec_.fixed_dim();
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(kdim, kdim);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(kdim);
    for (int j = 0; j < d.J(); ++j) {
      for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
        build_design(spec_, d.x1.row(i), d.x2.row(j), s.c.row(j), design_);
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(design_);
        xty += design_ * (s.y[i] - s.u[j]);
      }
    }
    xtx = xtx.selfadjointView<Eigen::Lower>();
    Eigen::LLT<Eigen::MatrixXd> llt(xtx);
    if (llt.info() != Eigen::Success) throw_singular_design(xtx);
    Eigen::VectorXd mean = llt.solve(xty);
    Eigen::MatrixXd cov =
        s.params.sigma2 * llt.solve(Eigen::MatrixXd::Identity(kdim, kdim));
    cov = 0.5 * (cov + cov.transpose()).eval();
    s.params.beta = draw_mvn(mean, cov, rng);
  }

  // Step 4: sigma2 | rest ~ IG(N/2 + a0, sum e^2 / 2 + 1/b0) with
  // e_ij = y_ij - x_ij'beta - u_j.
  void step_sigma2(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    double ss = 0.0;
    for (int j = 0; j < d.J(); ++j) {
      for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
        double e = s.y[i] - fitted(s, i, j) - s.u[j];
        ss += e * e;
      }
    }
    double shape = 0.5 * d.N() + pri_.ig_shape;
    s.params.sigma2 = draw_inverse_gamma(shape, 0.5 * ss + pri_.ig_rate, rng);
  }

  // Step 5: each missing y_ij ~ N(x_ij'beta + u_j, sigma2), ascending unit.
  void step_impute_y(ChainState& s, RngStream& rng) {
    for (int i : y_missing_) {
      int j = cluster_of(i);
      s.y[i] = draw_normal(fitted(s, i, j) + s.u[j], s.params.sigma2, rng);
    }
  }

  // Step 6: alpha | rest ~ N(A^-1 b, A^-1) with A = sum_j W_j' T^-1 W_j and
  // b = sum_j W_j' T^-1 C_j. W_j = I_p (x) [1, x2_j'] makes
  // A = T^-1 (x) sum_j w_j w_j' with w_j = [1, x2_j']'.
  void step_alpha(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    const int p = spec_.p, m = 1 + spec_.q2, dim = p * m;
    Eigen::LLT<Eigen::MatrixXd> tllt(s.params.T);
    if (tllt.info() != Eigen::Success)
      throw Error("step_alpha: T is not positive definite");
    Eigen::MatrixXd tinv = tllt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd a(dim, dim);
    for (int k = 0; k < p; ++k)
      for (int l = 0; l < p; ++l) a.block(k * m, l * m, m, m) = tinv(k, l) * ww_sum_;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd w(m), v(p);
    for (int j = 0; j < d.J(); ++j) {
      w[0] = 1.0;
      w.tail(spec_.q2) = d.x2.row(j);
      v.noalias() = tinv * s.c.row(j).transpose();
      for (int k = 0; k < p; ++k) b.segment(k * m, m) += v[k] * w;
    }
    Eigen::LLT<Eigen::MatrixXd> allt(a);
    if (allt.info() != Eigen::Success)
      throw Error("step_alpha: covariate-model design is singular (x2 collinear)");
    Eigen::VectorXd mean = allt.solve(b);
    Eigen::MatrixXd cov = allt.solve(Eigen::MatrixXd::Identity(dim, dim));
    cov = 0.5 * (cov + cov.transpose()).eval();
    s.params.alpha = draw_mvn(mean, cov, rng);
  }

  // Step 7: T | rest ~ IW(V0 + J, S0 + sum_j (C_j - W_j alpha)(...)').
  void step_T(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    Eigen::MatrixXd scatter = pri_.iw_scale;
    for (int j = 0; j < d.J(); ++j) {
      Eigen::VectorXd dev =
          s.c.row(j).transpose() - covariate_mean(s.params.alpha, d.x2.row(j), spec_.p);
      scatter.selfadjointView<Eigen::Lower>().rankUpdate(dev);
    }
    scatter = scatter.selfadjointView<Eigen::Lower>();
    s.params.T = draw_inverse_wishart(pri_.iw_dof + d.J(), scatter, rng);
  }

  // Step 8: each missing C_kj in ascending k, from the exact conditional:
  // Gaussian conditional prior of component k given the other components at
  // their current values, combined with the cluster's outcome likelihood.
  // In-place updates make later components condition on earlier draws from
  // the same cycle.
  void step_impute_c(ChainState& s, RngStream& rng) {
    const Dataset& d = *data_;
    for (int j = 0; j < d.J(); ++j) {
      if (c_missing_[j].empty()) continue;
      Eigen::VectorXd mu = covariate_mean(s.params.alpha, d.x2.row(j), spec_.p);
      for (int k : c_missing_[j]) {
        ConditionalMoments prior = conditional_prior_c(k, s.c.row(j), mu, s.params.T);
        ConditionalMoments post = missing_c_posterior(
            spec_, s.params.beta, s.params.sigma2,
            s.y.segment(d.cluster_start[j], d.n(j)),
            d.x1.middleRows(d.cluster_start[j], d.n(j)), d.x2.row(j), s.c.row(j), s.u[j], k,
            prior);
        s.c(j, k) = draw_normal(post.mean, post.var, rng);
      }
    }
  }

  void cycle(ChainState& s, RngStream& rng) {
    step_u(s, rng);
    step_tau(s, rng);
    step_beta(s, rng);
    step_sigma2(s, rng);
    step_impute_y(s, rng);
    step_alpha(s, rng);
    step_T(s, rng);
    step_impute_c(s, rng);
  }

  // Run burn_in + kept cycles from the given state, recording the parameter
  // vector (and optionally u and the imputed cells) after burn-in. Any
  // numerical failure aborts with the cycle index and step name attached.
  ChainRecord run(ChainState state, const GibbsConfig& cfg, RngStream& rng) {
    cfg.validate();
    state.params.validate(spec_);
    ChainRecord rec;
    rec.names = record_names(cfg);
    rec.draws.resize(cfg.kept, static_cast<Eigen::Index>(rec.names.size()));
    static const char* kStepNames[] = {"u", "tau", "beta", "sigma2", "impute_y",
                                       "alpha", "T", "impute_c"};
    for (int t = 0; t < cfg.burn_in + cfg.kept; ++t) {
      int sidx = 0;
      try {
        step_u(state, rng); ++sidx;
        step_tau(state, rng); ++sidx;
        step_beta(state, rng); ++sidx;
        step_sigma2(state, rng); ++sidx;
        step_impute_y(state, rng); ++sidx;
        step_alpha(state, rng); ++sidx;
        step_T(state, rng); ++sidx;
        step_impute_c(state, rng);
      } catch (const Error& e) {
        throw Error(strf("cycle %d, step %s: %s", t, kStepNames[sidx], e.what()));
      }
      if (!state.params.beta.allFinite() || !std::isfinite(state.params.tau) ||
          !std::isfinite(state.params.sigma2) || !state.params.alpha.allFinite() ||
          !state.params.T.allFinite())
        throw Error(strf("cycle %d: parameters are no longer finite", t));
      if (t >= cfg.burn_in) record_row(state, cfg, rec.draws.row(t - cfg.burn_in));
    }
    return rec;
  }

 private:
  int cluster_of(int unit) const {
    const auto& cs = data_->cluster_start;
    return static_cast<int>(std::upper_bound(cs.begin(), cs.end(), unit) - cs.begin()) - 1;
  }

  double fitted(ChainState& s, int i, int j) {
    build_design(spec_, data_->x1.row(i), data_->x2.row(j), s.c.row(j), design_);
    return design_.dot(s.params.beta);
  }

  [[noreturn]] void throw_singular_design(const Eigen::MatrixXd& xtx) const {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
    qr.setThreshold(1e-10);
    std::vector<std::string> labels = fixed_effect_labels(spec_);
    Eigen::Index rank = qr.rank();
    int col = static_cast<int>(qr.colsPermutation().indices()[std::min(
        rank, static_cast<Eigen::Index>(spec_.fixed_dim() - 1))]);
    throw Error(strf(
        "step_beta: design cross-product is singular (rank %ld of %d); column '%s' "
        "(position %d) is collinear with the preceding columns",
        static_cast<long>(rank), spec_.fixed_dim(), labels[col].c_str(), col));
  }

  std::vector<std::string> record_names(const GibbsConfig& cfg) const {
    std::vector<std::string> names = parameter_names(spec_);
    if (cfg.record_u)
      for (int j = 0; j < data_->J(); ++j) names.push_back(strf("u%d", j + 1));
    if (cfg.record_imputed) {
      for (int i : y_missing_) names.push_back(strf("yimp%d", i + 1));
      for (int j = 0; j < data_->J(); ++j)
        for (int k : c_missing_[j]) names.push_back(strf("cimp%d_%d", j + 1, k + 1));
    }
    return names;
  }

  template <class Row>
  void record_row(const ChainState& s, const GibbsConfig& cfg, Row row) const {
    int pos = 0;
    for (int k = 0; k < spec_.fixed_dim(); ++k) row[pos++] = s.params.beta[k];
    row[pos++] = s.params.tau;
    row[pos++] = s.params.sigma2;
    for (int k = 0; k < spec_.alpha_dim(); ++k) row[pos++] = s.params.alpha[k];
    for (int a = 0; a < spec_.p; ++a)
      for (int b = a; b < spec_.p; ++b) row[pos++] = s.params.T(a, b);
    if (cfg.record_u)
      for (int j = 0; j < data_->J(); ++j) row[pos++] = s.u[j];
    if (cfg.record_imputed) {
      for (int i : y_missing_) row[pos++] = s.y[i];
      for (int j = 0; j < data_->J(); ++j)
        for (int k : c_missing_[j]) row[pos++] = s.c(j, k);
    }
  }

  HlmSpec spec_;
  const Dataset* data_;
  ResolvedPriors pri_;
  Eigen::VectorXd design_;
  Eigen::MatrixXd ww_sum_;
  std::vector<int> y_missing_;
  std::vector<std::vector<int>> c_missing_;
};

// Deterministic starting-point fills for the missing cells. Neither uses
// random numbers, so chains differ only through their streams and fills.
//   donor_match: fill each missing cell with the observed value whose
//     regression-fitted mean is closest (predictive mean matching with a
//     single donor; ties broken by the lower index).
//   column_mean: fill with the observed mean of the variable.
enum class InitFill { donor_match, column_mean };

namespace detail {

inline Eigen::VectorXd ls_fit(const Eigen::MatrixXd& g, const Eigen::VectorXd& z) {
  return Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(g).solve(z);
}

}  // namespace detail

inline ChainState initial_state(const Dataset& d, const HlmSpec& spec, InitFill fill) {
  d.validate(spec);
  ChainState s;
  s.y = d.y;
  s.c = d.c;
  s.u = Eigen::VectorXd::Zero(d.J());
  const int J = d.J(), N = d.N(), p = spec.p, q2 = spec.q2;

  // Cluster-level regressor matrix [1, x2] used by both fills and the
  // covariate-model start.
  Eigen::MatrixXd g2(J, 1 + q2);
  g2.col(0).setOnes();
  g2.rightCols(q2) = d.x2;

  for (int k = 0; k < p; ++k) {
    std::vector<int> obs, mis;
    for (int j = 0; j < J; ++j) (d.c_observed(j, k) ? obs : mis).push_back(j);
    if (mis.empty()) continue;
    double mean = 0.0;
    for (int j : obs) mean += d.c(j, k);
    mean /= static_cast<double>(obs.size());
    if (fill == InitFill::column_mean) {
      for (int j : mis) s.c(j, k) = mean;
      continue;
    }
    Eigen::MatrixXd go(obs.size(), 1 + q2);
    Eigen::VectorXd zo(obs.size());
    for (std::size_t r = 0; r < obs.size(); ++r) {
      go.row(r) = g2.row(obs[r]);
      zo[r] = d.c(obs[r], k);
    }
    Eigen::VectorXd coef = detail::ls_fit(go, zo);
    Eigen::VectorXd fit = g2 * coef;
    for (int j : mis) {
      int donor = obs[0];
      double best = std::abs(fit[j] - fit[obs[0]]);
      for (int jo : obs) {
        double dd = std::abs(fit[j] - fit[jo]);
        if (dd < best) {
          best = dd;
          donor = jo;
        }
      }
      s.c(j, k) = d.c(donor, k);
    }
  }

  {
    std::vector<int> obs, mis;
    for (int i = 0; i < N; ++i) (d.y_observed(i) ? obs : mis).push_back(i);
    if (!mis.empty()) {
      if (obs.empty()) throw Error("initial_state: no observed outcome values");
      double mean = 0.0;
      for (int i : obs) mean += d.y[i];
      mean /= static_cast<double>(obs.size());
      if (fill == InitFill::column_mean) {
        for (int i : mis) s.y[i] = mean;
      } else {
        // Unit-level regressors [1, x1, x2(cluster)].
        Eigen::MatrixXd gu(N, 1 + spec.q());
        for (int j = 0; j < J; ++j)
          for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
            gu(i, 0) = 1.0;
            gu.row(i).segment(1, spec.q1) = d.x1.row(i);
            gu.row(i).tail(q2) = d.x2.row(j);
          }
        Eigen::MatrixXd go(obs.size(), gu.cols());
        Eigen::VectorXd zo(obs.size());
        for (std::size_t r = 0; r < obs.size(); ++r) {
          go.row(r) = gu.row(obs[r]);
          zo[r] = d.y[obs[r]];
        }
        Eigen::VectorXd coef = detail::ls_fit(go, zo);
        Eigen::VectorXd fit = gu * coef;
        for (int i : mis) {
          int donor = obs[0];
          double best = std::abs(fit[i] - fit[obs[0]]);
          for (int io : obs) {
            double dd = std::abs(fit[i] - fit[io]);
            if (dd < best) {
              best = dd;
              donor = io;
            }
          }
          s.y[i] = d.y[donor];
        }
      }
    }
  }

  // Parameter start from a complete-data least-squares fit on the filled
  // data, with the residual variance split into within and between parts.
  const int kdim = spec.fixed_dim();
  Eigen::MatrixXd x(N, kdim);
  for (int j = 0; j < J; ++j)
    for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
      Eigen::VectorXd row(kdim);
      build_design(spec, d.x1.row(i), d.x2.row(j), s.c.row(j), row);
      x.row(i) = row;
    }
  s.params.beta = detail::ls_fit(x, s.y);
  Eigen::VectorXd resid = s.y - x * s.params.beta;

  double within_ss = 0.0, between_ss = 0.0, rbar = resid.mean();
  double nsq = 0.0;
  Eigen::VectorXd rj(J);
  for (int j = 0; j < J; ++j) {
    rj[j] = resid.segment(d.cluster_start[j], d.n(j)).mean();
    within_ss += (resid.segment(d.cluster_start[j], d.n(j)).array() - rj[j]).square().sum();
    between_ss += d.n(j) * (rj[j] - rbar) * (rj[j] - rbar);
    nsq += static_cast<double>(d.n(j)) * d.n(j);
  }
  double total_var = resid.squaredNorm() / std::max(N - 1, 1);
  double sig = N > J ? within_ss / (N - J) : 0.5 * total_var;
  sig = std::max(sig, std::max(1e-3 * total_var, 1e-8));
  double tau = sig;  // fallback when the between decomposition is unavailable
  if (J > 1) {
    double msb = between_ss / (J - 1);
    double n0 = (N - nsq / N) / (J - 1);
    if (n0 > 0.0) tau = (msb - sig) / n0;
  }
  tau = std::max(tau, std::max(1e-3 * sig, 1e-8));
  s.params.sigma2 = sig;
  s.params.tau = tau;

  // Covariate model start: componentwise least squares on [1, x2] over the
  // filled covariates; T from the residual covariance, ridged if needed.
  s.params.alpha.resize(spec.alpha_dim());
  Eigen::MatrixXd cres(J, p);
  for (int k = 0; k < p; ++k) {
    Eigen::VectorXd coef = detail::ls_fit(g2, s.c.col(k));
    s.params.alpha.segment(k * (1 + q2), 1 + q2) = coef;
    cres.col(k) = s.c.col(k) - g2 * coef;
  }
  int denom = J - 1 - q2;
  Eigen::MatrixXd t = denom > 0
                          ? Eigen::MatrixXd(cres.transpose() * cres / denom)
                          : Eigen::MatrixXd(Eigen::MatrixXd::Identity(p, p));
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
  double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-10 * std::max(lmax, 1e-300)) {
    double eps = 1e-6 * t.trace() / p;
    if (!(eps > 0.0)) eps = 1e-8;
    t += eps * Eigen::MatrixXd::Identity(p, p);
  }
  s.params.T = t;
  return s;
}

inline InitFill chain_fill(int chain, int n_chains) {
  if (n_chains == 1) return InitFill::column_mean;
  return chain % 2 == 0 ? InitFill::donor_match : InitFill::column_mean;
}

// Run cfg.n_chains chains with per-chain streams (seed, stream_base + chain)
// and alternating starting fills. Chains are exchangeable runs of the same
// sampler; results depend only on (seed, stream ids, data).
inline std::vector<ChainRecord> run_chains(const Dataset& d, const HlmSpec& spec,
                                           const PriorConfig& priors, const GibbsConfig& cfg,
                                           std::uint64_t stream_base = 0) {
  cfg.validate();
  ResolvedPriors rp = resolve_priors(priors, d, spec);
  GibbsSampler sampler(spec, d, rp);
  std::vector<ChainRecord> out;
  out.reserve(cfg.n_chains);
  for (int c = 0; c < cfg.n_chains; ++c) {
    ChainState init = initial_state(d, spec, chain_fill(c, cfg.n_chains));
    RngStream rng(cfg.seed, stream_base + static_cast<std::uint64_t>(c));
    out.push_back(sampler.run(std::move(init), cfg, rng));
  }
  return out;
}

// Single-chain convenience entry.
inline ChainRecord run_chain(const Dataset& d, const HlmSpec& spec, const PriorConfig& priors,
                             const GibbsConfig& cfg, InitFill fill, std::uint64_t stream_id) {
  ResolvedPriors rp = resolve_priors(priors, d, spec);
  GibbsSampler sampler(spec, d, rp);
  RngStream rng(cfg.seed, stream_id);
  return sampler.run(initial_state(d, spec, fill), cfg, rng);
}

}  // namespace higibbs
