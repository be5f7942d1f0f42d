// Acceptance suite: one criterion per invocation (argv[1] in 1..9, or 0 for
// all). Criterion 8 additionally needs the CLI binary path in argv[2]. Each
// criterion prints its evidence and one final PASS/FAIL line; the process
// exits nonzero on failure. Every randomized quantity uses seed 1 -- fixed up
// front, never tuned to the outcome.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "higibbs/diagnostics.hpp"
#include "higibbs/gibbs.hpp"
#include "higibbs/io.hpp"
#include "higibbs/simulation.hpp"

using namespace higibbs;
namespace fs = std::filesystem;

namespace {

int g_checks = 0, g_failures = 0;

void check(bool ok, const std::string& what) {
  ++g_checks;
  if (!ok) ++g_failures;
  std::printf("  %s | %s\n", ok ? " ok" : "BAD", what.c_str());
}

bool within(double got, double want, double tol, const std::string& what) {
  bool ok = std::abs(got - want) <= tol;
  check(ok, strf("%s: got %.6g, want %.6g (tol %.3g)", what.c_str(), got, want, tol));
  return ok;
}

bool in_window(double got, double lo, double hi, const std::string& what) {
  bool ok = got >= lo && got <= hi;
  check(ok, strf("%s: %.4g, window [%.4g, %.4g]", what.c_str(), got, lo, hi));
  return ok;
}

double mcse_of_mean(const Eigen::VectorXd& series) {
  return std::sqrt(higibbs::detail::batch_means_var(series));
}

// ---------------------------------------------------------------------------
// Criterion 1: exact conditional moments, step by step.
//
// A fixed 5-cluster instance; every expected moment below is derived from
// scratch (explicit design rows, explicit least-squares algebra), not through
// the library's own helpers.

struct Fixed1 {
  HlmSpec spec;
  Dataset d;
  Parameters par;
  Eigen::VectorXd u;
  ResolvedPriors pri;
};

Fixed1 fixed_instance() {
  Fixed1 f;
  f.spec.p = 2;
  f.spec.q1 = 1;
  f.spec.q2 = 1;
  f.spec.active_xc = {{0, 0}};
  f.spec.active_cc = {{0, 1}};

  f.d.cluster_start = {0, 2, 4, 6, 7, 8};
  f.d.y.resize(8);
  f.d.y << 9.5, 4.2, 11.8, 7.3, 6.1, 10.4, 8.8, 3.9;
  f.d.y_miss.assign(8, 0);
  f.d.x1.resize(8, 1);
  f.d.x1 << 0.5, -1.2, 0.8, 1.5, -0.3, 0.9, 1.1, -0.7;
  f.d.x2.resize(5, 1);
  f.d.x2 << 1.8, 2.4, 1.1, 2.9, 0.6;
  f.d.c.resize(5, 2);
  f.d.c << 2.1, 0.7, 1.4, 2.2, 3.0, 1.1, 2.6, -0.4, 0.9, 1.6;
  f.d.c_miss.assign(10, 0);

  f.par.beta.resize(7);
  f.par.beta << 0.8, 1.1, -0.6, 0.9, 0.5, 0.4, -0.3;
  f.par.tau = 3.2;
  f.par.sigma2 = 5.0;
  f.par.alpha.resize(4);
  f.par.alpha << 0.7, 0.6, -0.4, 0.8;
  f.par.T.resize(2, 2);
  f.par.T << 1.3, -0.45, -0.45, 0.95;
  f.u.resize(5);
  f.u << 0.4, -0.2, 0.1, -0.5, 0.3;

  PriorConfig pc;
  pc.iw_dof = 4.0;
  pc.iw_scale.resize(2, 2);
  pc.iw_scale << 1.5, 0.3, 0.3, 1.0;
  f.pri = resolve_priors(pc, f.d, f.spec);
  return f;
}

// Independent design row for the fixed instance's shape:
// [1, c1, c2, x1, x2, c1*x1, c1*c2].
Eigen::VectorXd row_of(const Fixed1& f, int i, int j) {
  Eigen::VectorXd r(7);
  double x1 = f.d.x1(i, 0), x2 = f.d.x2(j, 0), c1 = f.d.c(j, 0), c2 = f.d.c(j, 1);
  r << 1.0, c1, c2, x1, x2, c1 * x1, c1 * c2;
  return r;
}

ChainState state_of(const Fixed1& f) {
  ChainState s;
  s.params = f.par;
  s.u = f.u;
  s.y = f.d.y;
  s.c = f.d.c;
  return s;
}

bool criterion1() {
  const int n = 100000;
  Fixed1 f = fixed_instance();
  GibbsSampler sampler(f.spec, f.d, f.pri);

  {  // cluster effects: N(mean_j, v_j) per cluster
    ChainState s = state_of(f);
    RngStream rng(1, 101);
    Eigen::MatrixXd draws(n, 5);
    for (int t = 0; t < n; ++t) {
      sampler.step_u(s, rng);
      draws.row(t) = s.u.transpose();
    }
    for (int j = 0; j < 5; ++j) {
      int nj = f.d.cluster_start[j + 1] - f.d.cluster_start[j];
      double rsum = 0.0;
      for (int i = f.d.cluster_start[j]; i < f.d.cluster_start[j + 1]; ++i)
        rsum += f.d.y[i] - row_of(f, i, j).dot(f.par.beta);
      double prec = nj / f.par.sigma2 + 1.0 / f.par.tau;
      double m = rsum / f.par.sigma2 / prec, v = 1.0 / prec;
      double got_m = draws.col(j).mean();
      double got_v = (draws.col(j).array() - got_m).square().sum() / (n - 1);
      within(got_m, m, 4.0 * std::sqrt(v / n), strf("step u: cluster %d mean", j + 1));
      within(got_v, v, 4.0 * v * std::sqrt(2.0 / (n - 1)),
             strf("step u: cluster %d variance", j + 1));
    }
  }
  {  // between variance: reciprocal draws are Gamma(1 + J/2, 2 + sum u^2 / 2)
    ChainState s = state_of(f);
    RngStream rng(1, 102);
    double shape = 1.0 + 2.5, rate = 2.0 + 0.5 * f.u.squaredNorm();
    Eigen::VectorXd rec(n);
    for (int t = 0; t < n; ++t) {
      s.u = f.u;
      sampler.step_tau(s, rng);
      rec[t] = 1.0 / s.params.tau;
    }
    double m = shape / rate, v = shape / (rate * rate);
    double got_m = rec.mean();
    double got_v = (rec.array() - got_m).square().sum() / (n - 1);
    within(got_m, m, 4.0 * std::sqrt(v / n), "step tau: reciprocal mean");
    within(got_v, v, 4.0 * v * std::sqrt((2.0 + 6.0 / shape) / n),
           "step tau: reciprocal variance");
  }
  {  // fixed effects: N(solve, sigma2 (X'X)^-1)
    ChainState s = state_of(f);
    RngStream rng(1, 103);
    Eigen::MatrixXd x(8, 7);
    Eigen::VectorXd z(8);
    for (int j = 0; j < 5; ++j)
      for (int i = f.d.cluster_start[j]; i < f.d.cluster_start[j + 1]; ++i) {
        x.row(i) = row_of(f, i, j);
        z[i] = f.d.y[i] - f.u[j];
      }
    Eigen::MatrixXd cov = f.par.sigma2 * (x.transpose() * x).inverse();
    Eigen::VectorXd mean = (x.transpose() * x).ldlt().solve(x.transpose() * z);
    Eigen::MatrixXd draws(n, 7);
    for (int t = 0; t < n; ++t) {
      sampler.step_beta(s, rng);
      draws.row(t) = s.params.beta.transpose();
    }
    for (int k = 0; k < 7; ++k) {
      double got_m = draws.col(k).mean();
      double got_v = (draws.col(k).array() - got_m).square().sum() / (n - 1);
      within(got_m, mean[k], 4.0 * std::sqrt(cov(k, k) / n), strf("step beta: mean %d", k));
      within(got_v, cov(k, k), 4.0 * cov(k, k) * std::sqrt(2.0 / (n - 1)),
             strf("step beta: variance %d", k));
    }
    Eigen::VectorXd d0 = draws.col(0).array() - draws.col(0).mean();
    Eigen::VectorXd d1 = draws.col(1).array() - draws.col(1).mean();
    within(d0.dot(d1) / (n - 1), cov(0, 1),
           4.0 * std::sqrt((cov(0, 0) * cov(1, 1) + cov(0, 1) * cov(0, 1)) / n),
           "step beta: covariance (0,1)");
  }
  {  // within variance: reciprocal draws are Gamma(1 + N/2, 2 + SSE/2)
    ChainState s = state_of(f);
    RngStream rng(1, 104);
    double sse = 0.0;
    for (int j = 0; j < 5; ++j)
      for (int i = f.d.cluster_start[j]; i < f.d.cluster_start[j + 1]; ++i) {
        double e = f.d.y[i] - row_of(f, i, j).dot(f.par.beta) - f.u[j];
        sse += e * e;
      }
    double shape = 1.0 + 4.0, rate = 2.0 + 0.5 * sse;
    Eigen::VectorXd rec(n);
    for (int t = 0; t < n; ++t) {
      sampler.step_sigma2(s, rng);
      rec[t] = 1.0 / s.params.sigma2;
      s.params.sigma2 = f.par.sigma2;  // keep the conditioning frozen
    }
    double m = shape / rate, v = shape / (rate * rate);
    double got_m = rec.mean();
    double got_v = (rec.array() - got_m).square().sum() / (n - 1);
    within(got_m, m, 4.0 * std::sqrt(v / n), "step sigma2: reciprocal mean");
    within(got_v, v, 4.0 * v * std::sqrt((2.0 + 6.0 / shape) / n),
           "step sigma2: reciprocal variance");
  }
  {  // outcome imputation: N(fit + u, sigma2) at the masked cell
    Fixed1 fm = f;
    fm.d.y_miss[3] = 1;  // cluster 2, second unit
    GibbsSampler sm(fm.spec, fm.d, fm.pri);
    ChainState s = state_of(fm);
    RngStream rng(1, 105);
    double m = row_of(fm, 3, 1).dot(f.par.beta) + f.u[1], v = f.par.sigma2;
    Eigen::VectorXd draws(n);
    for (int t = 0; t < n; ++t) {
      sm.step_impute_y(s, rng);
      draws[t] = s.y[3];
    }
    double got_m = draws.mean();
    double got_v = (draws.array() - got_m).square().sum() / (n - 1);
    within(got_m, m, 4.0 * std::sqrt(v / n), "step impute-y: mean");
    within(got_v, v, 4.0 * v * std::sqrt(2.0 / (n - 1)), "step impute-y: variance");
    check(s.y[2] == f.d.y[2], "step impute-y: observed cell untouched");
  }
  {  // covariate-model coefficients: N(A^-1 b, A^-1) with explicit W matrices
    ChainState s = state_of(f);
    RngStream rng(1, 106);
    Eigen::MatrixXd tinv = f.par.T.inverse();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(4);
    for (int j = 0; j < 5; ++j) {
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 4);
      w(0, 0) = 1.0;
      w(0, 1) = f.d.x2(j, 0);
      w(1, 2) = 1.0;
      w(1, 3) = f.d.x2(j, 0);
      a += w.transpose() * tinv * w;
      b += w.transpose() * tinv * f.d.c.row(j).transpose();
    }
    Eigen::MatrixXd cov = a.inverse();
    Eigen::VectorXd mean = a.ldlt().solve(b);
    Eigen::MatrixXd draws(n, 4);
    for (int t = 0; t < n; ++t) {
      sampler.step_alpha(s, rng);
      draws.row(t) = s.params.alpha.transpose();
    }
    for (int k = 0; k < 4; ++k) {
      double got_m = draws.col(k).mean();
      double got_v = (draws.col(k).array() - got_m).square().sum() / (n - 1);
      within(got_m, mean[k], 4.0 * std::sqrt(cov(k, k) / n), strf("step alpha: mean %d", k));
      within(got_v, cov(k, k), 4.0 * cov(k, k) * std::sqrt(2.0 / (n - 1)),
             strf("step alpha: variance %d", k));
    }
  }
  {  // covariate covariance: precision draws are Wishart(dof + J, S_post^-1)
    ChainState s = state_of(f);
    RngStream rng(1, 107);
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(2, 2);
    for (int j = 0; j < 5; ++j) {
      Eigen::Vector2d mu(f.par.alpha[0] + f.par.alpha[1] * f.d.x2(j, 0),
                         f.par.alpha[2] + f.par.alpha[3] * f.d.x2(j, 0));
      Eigen::Vector2d dev = f.d.c.row(j).transpose() - mu;
      scatter += dev * dev.transpose();
    }
    double dof = 4.0 + 5.0;
    Eigen::MatrixXd spost = f.pri.iw_scale + scatter;
    Eigen::MatrixXd sig = spost.inverse();
    Eigen::MatrixXd w00(n, 1), w01(n, 1), w11(n, 1);
    for (int t = 0; t < n; ++t) {
      s.params.alpha = f.par.alpha;
      sampler.step_T(s, rng);
      Eigen::Matrix2d w = s.params.T.inverse();
      w00(t, 0) = w(0, 0);
      w01(t, 0) = w(0, 1);
      w11(t, 0) = w(1, 1);
    }
    auto entry = [&](Eigen::MatrixXd& col, int i, int jj, const char* tag) {
      double want = dof * sig(i, jj);
      double var = dof * (sig(i, jj) * sig(i, jj) + sig(i, i) * sig(jj, jj));
      within(col.col(0).mean(), want, 4.0 * std::sqrt(var / n),
             strf("step T: precision mean %s", tag));
    };
    entry(w00, 0, 0, "(0,0)");
    entry(w01, 0, 1, "(0,1)");
    entry(w11, 1, 1, "(1,1)");
    for (auto [colp, i] : {std::pair<Eigen::MatrixXd*, int>{&w00, 0}, {&w11, 1}}) {
      // diagonal of a Wishart is a scaled chi-squared: variance 2 dof sig_ii^2,
      // and the sampling error of a sample variance needs its fourth moment
      double m = colp->col(0).mean();
      double got_v = (colp->col(0).array() - m).square().sum() / (n - 1);
      double want_v = 2.0 * dof * sig(i, i) * sig(i, i);
      double se = sig(i, i) * sig(i, i) * std::sqrt((8.0 * dof * dof + 48.0 * dof) / n);
      within(got_v, want_v, 4.0 * se, strf("step T: precision variance (%d,%d)", i, i));
    }
  }
  {  // covariate imputation vs 1-D grid quadrature, 1% relative
    Fixed1 fm = f;
    fm.d.c_miss[3 * 2 + 0] = 1;  // cluster 4, first covariate
    GibbsSampler sm(fm.spec, fm.d, fm.pri);
    ChainState s = state_of(fm);
    RngStream rng(1, 108);

    // prior conditional from explicit partitioned-Gaussian algebra
    double mu1 = f.par.alpha[0] + f.par.alpha[1] * f.d.x2(3, 0);
    double mu2 = f.par.alpha[2] + f.par.alpha[3] * f.d.x2(3, 0);
    double pm = mu1 + f.par.T(0, 1) / f.par.T(1, 1) * (f.d.c(3, 1) - mu2);
    double pv = f.par.T(0, 0) - f.par.T(0, 1) * f.par.T(0, 1) / f.par.T(1, 1);

    const int grid = 8001;
    double lo = pm - 12.0 * std::sqrt(pv), hi = pm + 12.0 * std::sqrt(pv);
    double h = (hi - lo) / (grid - 1);
    double s0 = 0, s1 = 0, s2 = 0;
    int i = f.d.cluster_start[3];  // the single unit of cluster 4
    for (int g = 0; g < grid; ++g) {
      double c1 = lo + g * h;
      double x1 = f.d.x1(i, 0), x2 = f.d.x2(3, 0), c2 = f.d.c(3, 1);
      double fit = f.par.beta[0] + f.par.beta[1] * c1 + f.par.beta[2] * c2 +
                   f.par.beta[3] * x1 + f.par.beta[4] * x2 + f.par.beta[5] * c1 * x1 +
                   f.par.beta[6] * c1 * c2 + f.u[3];
      double logf = -0.5 * (c1 - pm) * (c1 - pm) / pv -
                    0.5 * (f.d.y[i] - fit) * (f.d.y[i] - fit) / f.par.sigma2;
      double wq = (g == 0 || g == grid - 1) ? 1.0 : (g % 2 == 1 ? 4.0 : 2.0);
      double val = wq * std::exp(logf);
      s0 += val;
      s1 += val * c1;
      s2 += val * c1 * c1;
    }
    double qmean = s1 / s0, qsd = std::sqrt(s2 / s0 - qmean * qmean);

    Eigen::VectorXd draws(n);
    for (int t = 0; t < n; ++t) {
      sm.step_impute_c(s, rng);
      draws[t] = s.c(3, 0);
    }
    double got_m = draws.mean();
    double got_sd = std::sqrt((draws.array() - got_m).square().sum() / (n - 1));
    within(got_m, qmean, 0.01 * std::abs(qmean), "step impute-c: mean vs quadrature (1%)");
    within(got_sd, qsd, 0.01 * qsd, "step impute-c: sd vs quadrature (1%)");
    check(s.c(3, 1) == f.d.c(3, 1), "step impute-c: observed cell untouched");
  }
  return g_failures == 0;
}

// ---------------------------------------------------------------------------
// Criterion 2: small-instance joint posterior against a brute-force grid
// oracle. Complete data, p=1, no interactions: the (beta, tau, sigma2) block
// is integrated on a 2-D grid over (log tau, log sigma2), with beta profiled
// analytically under its flat prior; the covariate block has closed-form
// posterior moments.

struct GridResult {
  double b0, b1, tau, sig2;
  double edge_ratio;  // max boundary log-weight minus overall max
};

GridResult grid_oracle(const Eigen::VectorXd& y, const Eigen::VectorXd& c, int J, int nj,
                       int pts) {
  const double tau_lo = std::log(0.02), tau_hi = std::log(1.0e6);
  const double sg_lo = std::log(0.05), sg_hi = std::log(2.0e3);
  Eigen::MatrixXd x(J * nj, 2);
  for (int j = 0; j < J; ++j)
    for (int i = 0; i < nj; ++i) {
      x(j * nj + i, 0) = 1.0;
      x(j * nj + i, 1) = c[j];
    }
  std::vector<double> logw(pts * pts);
  std::vector<Eigen::Vector2d> betas(pts * pts);
  std::vector<double> taus(pts), sigs(pts);
  double max_log = -1e300, max_edge = -1e300;
  for (int a = 0; a < pts; ++a) taus[a] = std::exp(tau_lo + (tau_hi - tau_lo) * a / (pts - 1));
  for (int b = 0; b < pts; ++b) sigs[b] = std::exp(sg_lo + (sg_hi - sg_lo) * b / (pts - 1));
  for (int a = 0; a < pts; ++a) {
    for (int b = 0; b < pts; ++b) {
      double tau = taus[a], sg = sigs[b];
      // V_j = sg I + tau 1 1' per cluster; accumulate the flat-beta profile.
      Eigen::Matrix2d xtvx = Eigen::Matrix2d::Zero();
      Eigen::Vector2d xtvy = Eigen::Vector2d::Zero();
      double logdet = 0.0, yvy = 0.0;
      for (int j = 0; j < J; ++j) {
        Eigen::MatrixXd vj = sg * Eigen::MatrixXd::Identity(nj, nj) +
                             tau * Eigen::MatrixXd::Ones(nj, nj);
        Eigen::LLT<Eigen::MatrixXd> llt(vj);
        Eigen::MatrixXd xj = x.block(j * nj, 0, nj, 2);
        Eigen::VectorXd yj = y.segment(j * nj, nj);
        Eigen::MatrixXd vix = llt.solve(xj);
        Eigen::VectorXd viy = llt.solve(yj);
        xtvx += xj.transpose() * vix;
        xtvy += xj.transpose() * viy;
        yvy += yj.dot(viy);
        for (int r = 0; r < nj; ++r) logdet += 2.0 * std::log(llt.matrixL()(r, r));
      }
      Eigen::Vector2d bhat = xtvx.ldlt().solve(xtvy);
      double quad = yvy - xtvy.dot(bhat);
      double lw = -0.5 * logdet - 0.5 * std::log(xtvx.determinant()) - 0.5 * quad;
      lw += -2.0 * std::log(tau) - 2.0 / tau;  // prior: shape 1, rate 2
      lw += -2.0 * std::log(sg) - 2.0 / sg;
      lw += std::log(tau) + std::log(sg);  // log-scale Jacobian
      logw[a * pts + b] = lw;
      betas[a * pts + b] = bhat;
      if (lw > max_log) max_log = lw;
      if ((a == 0 || a == pts - 1 || b == 0 || b == pts - 1) && lw > max_edge) max_edge = lw;
    }
  }
  double z = 0, eb0 = 0, eb1 = 0, et = 0, es = 0;
  for (int a = 0; a < pts; ++a)
    for (int b = 0; b < pts; ++b) {
      double w = std::exp(logw[a * pts + b] - max_log);
      z += w;
      eb0 += w * betas[a * pts + b][0];
      eb1 += w * betas[a * pts + b][1];
      et += w * taus[a];
      es += w * sigs[b];
    }
  return {eb0 / z, eb1 / z, et / z, es / z, max_edge - max_log};
}

bool criterion2() {
  const int J = 5, nj = 2;
  HlmSpec spec;
  spec.p = 1;
  Dataset d;
  d.cluster_start = {0, 2, 4, 6, 8, 10};
  d.y.resize(10);
  d.y << 3.1, 4.0, 0.8, -0.2, 5.6, 6.3, 2.2, 1.7, -1.4, -0.9;
  d.y_miss.assign(10, 0);
  d.x1.resize(10, 0);
  d.x2.resize(5, 0);
  d.c.resize(5, 1);
  d.c << 1.2, -0.6, 2.3, 0.4, -1.5;
  d.c_miss.assign(5, 0);

  GridResult fine = grid_oracle(d.y, d.c.col(0), J, nj, 400);
  GridResult coarse = grid_oracle(d.y, d.c.col(0), J, nj, 200);
  check(fine.edge_ratio < -30.0, strf("oracle grid bounds hold the mass (edge log-weight %.1f)",
                                      fine.edge_ratio));

  PriorConfig pc;
  pc.iw_dof = 3.0;
  pc.iw_scale = Eigen::MatrixXd::Identity(1, 1);
  GibbsConfig cfg;
  cfg.burn_in = 5000;
  cfg.kept = 100000;
  cfg.n_chains = 1;
  cfg.seed = 1;
  std::vector<ChainRecord> chains = run_chains(d, spec, pc, cfg);
  const ChainRecord& rec = chains[0];

  auto compare = [&](const char* name, double oracle, double oracle2, const char* what) {
    Eigen::VectorXd series = rec.col(name);
    double mcse = mcse_of_mean(series);
    double grid_err = std::abs(oracle - oracle2);
    double tol = 3.0 * std::sqrt(mcse * mcse + grid_err * grid_err) + 1e-10;
    within(series.mean(), oracle, tol, what);
  };
  compare("beta0", fine.b0, coarse.b0, "posterior mean of beta0");
  compare("beta1", fine.b1, coarse.b1, "posterior mean of beta1");
  compare("tau", fine.tau, coarse.tau, "posterior mean of tau");
  compare("sigma2", fine.sig2, coarse.sig2, "posterior mean of sigma2");

  // Covariate block: closed forms. alpha | C is centered at the sample mean;
  // T marginal (flat alpha integrated out) is inverse gamma with
  // dof (iw_dof + J - 1) and scale (S0 + centered scatter), mean scale/(dof-2).
  double cbar = d.c.col(0).mean();
  double scatter = (d.c.col(0).array() - cbar).square().sum();
  double t_mean = (1.0 + scatter) / (3.0 + J - 1.0 - 2.0);
  {
    Eigen::VectorXd a = rec.col("alpha1_0");
    within(a.mean(), cbar, 3.0 * mcse_of_mean(a) + 1e-10, "posterior mean of alpha");
    Eigen::VectorXd t = rec.col("T1_1");
    within(t.mean(), t_mean, 3.0 * mcse_of_mean(t) + 1e-10, "posterior mean of T");
  }
  return g_failures == 0;
}

// ---------------------------------------------------------------------------
// Criteria 3-5, 7: replication studies at fixed scales and windows.

ReplicationReport run_study(Scenario sc, int clusters, int R) {
  SimulationDesign d = SimulationDesign::make(sc);
  d.clusters = clusters;
  GibbsConfig cfg;
  cfg.burn_in = 1000;
  cfg.kept = 1000;
  cfg.n_chains = 2;
  cfg.seed = 1;
  PriorConfig priors;
  return run_replications(d, R, cfg, priors);
}

void print_study(const ReplicationReport& rep) {
  for (std::size_t k = 0; k < rep.names.size(); ++k)
    std::printf("      %-8s truth %6.2f bias%% %8.3f ase %6.3f ese %6.3f coverage %.3f\n",
                rep.names[k].c_str(), rep.truth[k], rep.bias_pct[k], rep.ase[k], rep.ese[k],
                rep.coverage[k]);
  std::printf("      completed %d / %d, geweke rate %.3f, psrf rate %.3f\n", rep.completed,
              rep.replications, rep.geweke_pass_rate, rep.psrf_pass_rate);
}

bool criterion3() {
  ReplicationReport rep = run_study(Scenario::baseline, 200, 200);
  print_study(rep);
  check(rep.completed == rep.replications, "all replications completed");
  for (std::size_t k = 0; k < rep.names.size(); ++k) {
    const std::string& nm = rep.names[k];
    bool is_var = nm == "tau" || nm == "sigma2";
    double cap = is_var ? 8.0 : 5.0;
    in_window(rep.bias_pct[k], -cap, cap, strf("|%%bias| of %s", nm.c_str()));
    in_window(rep.coverage[k], 0.90, 0.99, strf("coverage of %s", nm.c_str()));
    double rel = std::abs(rep.ase[k] - rep.ese[k]) / rep.ese[k];
    in_window(rel, 0.0, 0.20, strf("|ASE-ESE|/ESE of %s", nm.c_str()));
  }
  return g_failures == 0;
}

bool criterion4() {
  ReplicationReport rep = run_study(Scenario::baseline, 36, 500);
  print_study(rep);
  check(rep.completed == rep.replications, "all replications completed");
  for (std::size_t k = 0; k < rep.names.size(); ++k) {
    const std::string& nm = rep.names[k];
    if (nm == "beta0") in_window(rep.bias_pct[k], 1.0, 12.0, "%bias of beta0");
    if (nm == "tau") in_window(rep.bias_pct[k], -8.0, 5.0, "%bias of tau");
    in_window(rep.coverage[k], 0.90, 0.99, strf("coverage of %s", nm.c_str()));
  }
  return g_failures == 0;
}

bool criterion5() {
  ReplicationReport rep = run_study(Scenario::baseline, 36, 500);
  std::printf("      geweke all-parameter pass rate %.3f, psrf pass rate %.3f\n",
              rep.geweke_pass_rate, rep.psrf_pass_rate);
  in_window(rep.geweke_pass_rate, 0.55, 0.80, "whole-vector geweke pass rate");
  in_window(rep.psrf_pass_rate, 0.95, 1.0, "psrf pass rate");
  return g_failures == 0;
}

bool criterion6() {
  const int J = 2000;
  double y_rate = 0, c1_mar = 0, c2_mar = 0, c1_mnar = 0, c2_mnar = 0;
  {
    SimulationDesign d = SimulationDesign::make(Scenario::baseline);
    d.clusters = J;
    RngStream rng(1, 600);
    Dataset complete = simulate_dataset(d, rng);
    Dataset masked = apply_missingness(complete, d, rng);
    for (int i = 0; i < masked.N(); ++i) y_rate += masked.y_miss[i];
    for (int j = 0; j < J; ++j) {
      c1_mar += masked.c_miss[j * 2 + 0];
      c2_mar += masked.c_miss[j * 2 + 1];
    }
    y_rate /= masked.N();
    c1_mar /= J;
    c2_mar /= J;
  }
  {
    SimulationDesign d = SimulationDesign::make(Scenario::mnar);
    d.clusters = J;
    RngStream rng(1, 601);
    Dataset complete = simulate_dataset(d, rng);
    Dataset masked = apply_missingness(complete, d, rng);
    for (int j = 0; j < J; ++j) {
      c1_mnar += masked.c_miss[j * 2 + 0];
      c2_mnar += masked.c_miss[j * 2 + 1];
    }
    c1_mnar /= J;
    c2_mnar /= J;
  }
  in_window(100.0 * y_rate, 17.0, 23.0, "outcome missing rate (%) under the random law");
  in_window(100.0 * c1_mar, 17.0, 23.0, "C1 missing rate (%) under the random law");
  in_window(100.0 * c2_mar, 17.0, 23.0, "C2 missing rate (%) under the random law");
  in_window(100.0 * c1_mnar, 17.0, 23.0, "C1 missing rate (%) under the value-driven law");
  in_window(100.0 * c2_mnar, 17.0, 23.0, "C2 missing rate (%) under the value-driven law");
  return g_failures == 0;
}

bool criterion7() {
  {
    SimulationDesign d = SimulationDesign::make(Scenario::lognormal_covariate);
    GibbsConfig cfg;
    cfg.burn_in = 1000;
    cfg.kept = 1000;
    cfg.n_chains = 2;
    cfg.seed = 1;
    ReplicationReport rep = run_replications(d, 300, cfg, PriorConfig{});
    std::printf("    lognormal-covariate scenario:\n");
    print_study(rep);
    check(rep.completed == rep.replications, "lognormal: all replications completed");
    for (std::size_t k = 0; k < rep.names.size(); ++k) {
      in_window(rep.coverage[k], 0.88, 1.0,
                strf("lognormal: coverage of %s", rep.names[k].c_str()));
      if (rep.names[k] == "tau")
        in_window(std::abs(rep.bias_pct[k]), 0.0, 15.0, "lognormal: |%bias| of tau");
    }
  }
  {
    SimulationDesign d = SimulationDesign::make(Scenario::mnar);
    GibbsConfig cfg;
    cfg.burn_in = 1000;
    cfg.kept = 1000;
    cfg.n_chains = 2;
    cfg.seed = 1;
    ReplicationReport rep = run_replications(d, 300, cfg, PriorConfig{});
    std::printf("    value-driven-missingness scenario:\n");
    print_study(rep);
    check(rep.completed == rep.replications, "mnar: all replications completed");
    for (std::size_t k = 0; k < rep.names.size(); ++k) {
      in_window(rep.coverage[k], 0.88, 1.0, strf("mnar: coverage of %s", rep.names[k].c_str()));
      if (rep.names[k] == "tau")
        in_window(std::abs(rep.bias_pct[k]), 0.0, 15.0, "mnar: |%bias| of tau");
    }
  }
  return g_failures == 0;
}

// ---------------------------------------------------------------------------
// Criterion 8: CLI determinism, end to end.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool files_identical(const fs::path& a, const fs::path& b) {
  return fs::exists(a) && fs::exists(b) && slurp(a) == slurp(b);
}

bool criterion8(const std::string& cli) {
  if (cli.empty()) {
    check(false, "CLI path argument required for this criterion");
    return false;
  }
  fs::path work = fs::temp_directory_path() / "higibbs_accept8";
  fs::remove_all(work);
  fs::create_directories(work);

  {  // deterministic demo dataset through the library's own writer
    SimulationDesign d = SimulationDesign::make(Scenario::baseline);
    RngStream rng(1, 800);
    Dataset masked = apply_missingness(simulate_dataset(d, rng), d, rng);
    LoadedData ld;
    ld.data = masked;
    for (int j = 0; j < masked.J(); ++j) ld.cluster_labels.push_back(strf("cl%02d", j + 1));
    ld.x2_names = {"x"};
    ld.c_names = {"c1", "c2"};
    ColumnSchema schema;
    schema.outcome = "y";
    schema.cluster = "cluster";
    schema.level2 = {"x"};
    schema.partial = {"c1", "c2"};
    save_dataset((work / "data.csv").string(), ld, schema);
    std::ofstream s(work / "schema.cfg");
    s << "outcome = y\ncluster = cluster\nlevel2 = x\npartial = c1, c2\n";
    std::ofstream m(work / "model.cfg");
    m << "interactions = c1*c2\n";
    std::ofstream c(work / "sim.cfg");
    c << "scenario = baseline\nclusters = 12\nreplications = 3\nburn_in = 100\nkept = 100\n"
         "chains = 2\nseed = 4\n";
  }

  auto run = [&](const std::string& args, const std::string& log) {
    std::string cmd = "\"" + cli + "\" " + args + " > \"" + (work / log).string() + "\" 2>&1";
    int rc = std::system(cmd.c_str());
    return rc == 0;
  };
  std::string data = (work / "data.csv").string(), schema = (work / "schema.cfg").string(),
              model = (work / "model.cfg").string();

  std::string fit_args = "fit --data \"" + data + "\" --schema \"" + schema + "\" --model \"" +
                         model + "\" --seed 11 --chains 2 --burn-in 200 --kept 200 --out-dir \"";
  check(run(fit_args + (work / "fitA").string() + "\"", "fitA.log"), "fit run A exits cleanly");
  check(run(fit_args + (work / "fitB").string() + "\"", "fitB.log"), "fit run B exits cleanly");
  for (const char* f : {"estimates.tsv", "convergence.tsv", "report.txt", "chains/chain_1.tsv",
                        "chains/chain_2.tsv", "traces/tau_chain1.txt"})
    check(files_identical(work / "fitA" / f, work / "fitB" / f),
          strf("fit outputs byte-identical: %s", f));

  std::string sim_args = "simulate --config \"" + (work / "sim.cfg").string() + "\" --out-dir \"";
  check(run(sim_args + (work / "simA").string() + "\"", "simA.log"),
        "simulate run A exits cleanly");
  check(run(sim_args + (work / "simB").string() + "\"", "simB.log"),
        "simulate run B exits cleanly");
  for (const char* f : {"aggregate.tsv", "replications.tsv", "summary.txt"})
    check(files_identical(work / "simA" / f, work / "simB" / f),
          strf("simulate outputs byte-identical: %s", f));

  std::string chains = "\"" + (work / "fitA" / "chains" / "chain_1.tsv").string() + "\" \"" +
                       (work / "fitA" / "chains" / "chain_2.tsv").string() + "\"";
  check(run("diagnose " + chains + " --out-dir \"" + (work / "diagA").string() + "\"",
            "diagA.log"),
        "diagnose run A exits cleanly");
  check(run("diagnose " + chains + " --out-dir \"" + (work / "diagB").string() + "\"",
            "diagB.log"),
        "diagnose run B exits cleanly");
  check(files_identical(work / "diagA" / "convergence.tsv", work / "diagB" / "convergence.tsv"),
        "diagnose outputs byte-identical: convergence.tsv");
  return g_failures == 0;
}

// ---------------------------------------------------------------------------
// Criterion 9: property battery, 1000 randomized cases each.

int rand_int(RngStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

HlmSpec random_spec(RngStream& rng) {
  HlmSpec spec;
  spec.p = rand_int(rng, 1, 3);
  spec.q1 = rand_int(rng, 0, 2);
  spec.q2 = rand_int(rng, 0, 2);
  for (int s = 0; s < spec.p; ++s)
    for (int t = 0; t < spec.q(); ++t)
      if (rng.uniform() < 0.25) spec.active_xc.push_back({s, t});
  for (int s = 0; s < spec.p; ++s)
    for (int t = s + 1; t < spec.p; ++t)
      if (rng.uniform() < 0.25) spec.active_cc.push_back({s, t});
  spec.validate();
  return spec;
}

bool criterion9() {
  const int cases = 1000;
  {  // mask discipline: poisoning every masked cell changes nothing at all
    RngStream rng(1, 900);
    int agree = 0;
    for (int t = 0; t < cases; ++t) {
      HlmSpec spec = random_spec(rng);
      int J = spec.fixed_dim() + 4;
      Dataset d;
      d.cluster_start.resize(J + 1);
      d.cluster_start[0] = 0;
      for (int j = 0; j < J; ++j) d.cluster_start[j + 1] = d.cluster_start[j] + rand_int(rng, 1, 3);
      int N = d.cluster_start[J];
      d.y.resize(N);
      d.y_miss.assign(N, 0);
      d.x1.resize(N, spec.q1);
      d.x2.resize(J, spec.q2);
      d.c.resize(J, spec.p);
      d.c_miss.assign(static_cast<std::size_t>(J) * spec.p, 0);
      for (int i = 0; i < N; ++i) {
        d.y[i] = 2.0 * rng.normal();
        for (int k = 0; k < spec.q1; ++k) d.x1(i, k) = rng.normal();
      }
      for (int j = 0; j < J; ++j) {
        for (int k = 0; k < spec.q2; ++k) d.x2(j, k) = rng.normal();
        for (int k = 0; k < spec.p; ++k) d.c(j, k) = rng.normal();
      }
      for (int i = 0; i < N; ++i)
        if (rng.uniform() < 0.2) d.y_miss[i] = 1;
      for (int k = 0; k < spec.p; ++k) {
        int observed = J;
        for (int j = 0; j < J; ++j)
          if (rng.uniform() < 0.25 && observed > 1) {
            d.c_miss[j * spec.p + k] = 1;
            --observed;
          }
      }
      Dataset poisoned = d;
      double nan = std::numeric_limits<double>::quiet_NaN();
      for (int i = 0; i < N; ++i)
        if (poisoned.y_miss[i]) poisoned.y[i] = nan;
      for (int j = 0; j < J; ++j)
        for (int k = 0; k < spec.p; ++k)
          if (poisoned.c_miss[j * spec.p + k]) poisoned.c(j, k) = nan;

      PriorConfig priors;
      priors.iw_scale = Eigen::MatrixXd::Identity(spec.p, spec.p);
      GibbsConfig cfg;
      cfg.burn_in = 2;
      cfg.kept = 3;
      cfg.n_chains = 1;
      cfg.seed = 1 + t;
      bool same = false;
      try {
        std::vector<ChainRecord> a = run_chains(d, spec, priors, cfg);
        std::vector<ChainRecord> b = run_chains(poisoned, spec, priors, cfg);
        same = a[0].draws == b[0].draws;
      } catch (const Error& ea) {
        try {
          run_chains(poisoned, spec, priors, cfg);
        } catch (const Error& eb) {
          same = std::string(ea.what()) == eb.what();
        }
      }
      agree += same;
    }
    check(agree == cases, strf("mask discipline: %d/%d cases bit-identical", agree, cases));
  }
  {  // predictor split: offset + slope * c_k always equals the full mean
    RngStream rng(1, 901);
    int pass = 0;
    for (int t = 0; t < cases; ++t) {
      HlmSpec spec = random_spec(rng);
      Eigen::RowVectorXd x1(spec.q1), x2(spec.q2), c(spec.p);
      Eigen::VectorXd beta(spec.fixed_dim());
      for (int i = 0; i < spec.q1; ++i) x1[i] = rng.normal();
      for (int i = 0; i < spec.q2; ++i) x2[i] = rng.normal();
      for (int i = 0; i < spec.p; ++i) c[i] = rng.normal();
      for (int i = 0; i < beta.size(); ++i) beta[i] = rng.normal();
      double u = rng.normal();
      int k = rand_int(rng, 0, spec.p - 1);
      PredictorSplit ps = split_predictor(spec, beta, x1, x2, c, u, k);
      Eigen::VectorXd xs(spec.q());
      xs.head(spec.q1) = x1.transpose();
      xs.tail(spec.q2) = x2.transpose();
      double direct = build_design_vector(spec, xs, c.transpose()).dot(beta) + u;
      pass += std::abs(ps.offset + ps.slope * c[k] - direct) < 1e-12 * (1.0 + std::abs(direct));
    }
    check(pass == cases, strf("predictor-split identity: %d/%d cases", pass, cases));
  }
  {  // scale-reduction factor is invariant under affine maps
    RngStream rng(1, 902);
    int pass = 0;
    for (int t = 0; t < cases; ++t) {
      int len = rand_int(rng, 20, 200);
      Eigen::VectorXd a(len), b(len);
      for (int i = 0; i < len; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.5 * rng.uniform();
      }
      double scale = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + 5.0 * rng.uniform());
      double shift = 4.0 * rng.normal();
      double v0 = psrf({a, b}).value;
      Eigen::VectorXd ta = (a.array() * scale + shift).matrix();
      Eigen::VectorXd tb = (b.array() * scale + shift).matrix();
      double v1 = psrf({ta, tb}).value;
      pass += std::abs(v1 - v0) <= 1e-9 * (1.0 + std::abs(v0));
    }
    check(pass == cases, strf("psrf affine invariance: %d/%d cases", pass, cases));
  }
  {  // design vector is linear in each covariate coordinate separately
    RngStream rng(1, 903);
    int pass = 0;
    for (int t = 0; t < cases; ++t) {
      HlmSpec spec = random_spec(rng);
      Eigen::VectorXd x(spec.q());
      Eigen::VectorXd ca(spec.p), cb(spec.p);
      for (int i = 0; i < spec.q(); ++i) x[i] = rng.normal();
      for (int i = 0; i < spec.p; ++i) ca[i] = rng.normal();
      cb = ca;
      int k = rand_int(rng, 0, spec.p - 1);
      cb[k] = rng.normal();
      double lam = rng.uniform();
      Eigen::VectorXd cmix = ca;
      cmix[k] = lam * ca[k] + (1.0 - lam) * cb[k];
      Eigen::VectorXd da = build_design_vector(spec, x, ca);
      Eigen::VectorXd db = build_design_vector(spec, x, cb);
      Eigen::VectorXd dm = build_design_vector(spec, x, cmix);
      pass += ((lam * da + (1.0 - lam) * db) - dm).lpNorm<Eigen::Infinity>() < 1e-12;
    }
    check(pass == cases, strf("design multilinearity: %d/%d cases", pass, cases));
  }
  return g_failures == 0;
}

struct Criterion {
  int id;
  const char* title;
  bool (*fn)();
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..9 | 0 for all> [cli-path]\n");
    return 2;
  }
  const int which = std::atoi(argv[1]);
  const std::string cli = argc > 2 ? argv[2] : "";

  const Criterion table[] = {
      {1, "exact conditional moments for every sampler step", &criterion1},
      {2, "small-instance posterior equals the brute-force oracle", &criterion2},
      {3, "baseline replication study at J=200 (bias, coverage, ASE/ESE)", &criterion3},
      {4, "small-sample replication study at J=36 (bias, coverage)", &criterion4},
      {5, "convergence diagnostic pass rates at J=36", &criterion5},
      {6, "missingness calibration near 20% per variable", &criterion6},
      {7, "robustness scenarios (skewed covariate, value-driven masking)", &criterion7},
      {8, "CLI end-to-end determinism", nullptr},
      {9, "property battery over randomized cases", &criterion9},
  };

  bool all_ok = true;
  for (const Criterion& c : table) {
    if (which != 0 && which != c.id) continue;
    g_checks = 0;
    g_failures = 0;
    std::printf("criterion %d: %s\n", c.id, c.title);
    bool ok = c.id == 8 ? criterion8(cli) : c.fn();
    std::printf("%s | criterion %d: %s (%d/%d checks)\n", ok ? "PASS" : "FAIL", c.id, c.title,
                g_checks - g_failures, g_checks);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
