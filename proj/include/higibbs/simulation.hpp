#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "common.hpp"
#include "diagnostics.hpp"
#include "gibbs.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace higibbs {

// One missingness law for one variable. MAR draws a cluster-level logit
// from N(intercept + slope * x2[driver], noise_var) and masks cells
// Bernoulli(inv_logit(logit)); MNAR sets the logit deterministically from a
// C covariate of the same cluster, intercept + slope * c[driver]. The
// outcome is masked per unit, a covariate once per cluster.
struct MissingnessLaw {
  enum class Kind { mar, mnar };
  Kind kind = Kind::mar;
  double intercept = 0.0;
  double slope = 0.0;
  double noise_var = 0.0;  // MAR only
  int driver = 0;          // MAR: x2 column; MNAR: c column
};

enum class Scenario { baseline, lognormal_covariate, mnar, extra_interactions };

inline const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::baseline: return "baseline";
    case Scenario::lognormal_covariate: return "lognormal";
    case Scenario::mnar: return "mnar";
    case Scenario::extra_interactions: return "extra_interactions";
  }
  throw Error("scenario_name: unknown scenario");
}

inline Scenario scenario_from_name(const std::string& s) {
  if (s == "baseline") return Scenario::baseline;
  if (s == "lognormal") return Scenario::lognormal_covariate;
  if (s == "mnar") return Scenario::mnar;
  if (s == "extra_interactions") return Scenario::extra_interactions;
  throw Error(strf("unknown scenario '%s' (expected baseline, lognormal, mnar, "
                   "or extra_interactions)", s.c_str()));
}

// Complete generating recipe for one synthetic two-level dataset: the model
// shape, the true parameter values, cluster count and size, and the
// missingness laws for the outcome and each C covariate.
struct SimulationDesign {
  Scenario scenario = Scenario::baseline;
  int clusters = 36;
  int cluster_size = 4;
  HlmSpec spec;
  Parameters truth;
  std::optional<MissingnessLaw> y_law;
  std::vector<std::optional<MissingnessLaw>> c_laws;

  // Scenario presets. All share one cluster-level known covariate
  // X ~ N(2, 1), two partially observed covariates (C1, C2) with
  // means (0.75 + 0.7 X, -0.5 + X), variances (1.25, 1) and covariance
  // -0.5, effects all 1, tau = 4, sigma2 = 16, and a C1*C2 interaction.
  //   baseline            C joint normal, MAR masks on y, C1, C2
  //   lognormal           C1 = exp(N(0.5 + 0.1 X, 0.2)), C2 | C1 normal
  //   mnar                baseline data, C masks driven by the C1 value
  //   extra_interactions  adds C1*X and C2*X effects (all betas still 1)
  static SimulationDesign make(Scenario sc, int clusters = 36, int cluster_size = 4) {
    SimulationDesign d;
    d.scenario = sc;
    d.clusters = clusters;
    d.cluster_size = cluster_size;
    d.spec.p = 2;
    d.spec.q1 = 0;
    d.spec.q2 = 1;
    d.spec.active_cc = {{0, 1}};
    if (sc == Scenario::extra_interactions) d.spec.active_xc = {{0, 0}, {1, 0}};
    d.truth.beta = Eigen::VectorXd::Ones(d.spec.fixed_dim());
    d.truth.tau = 4.0;
    d.truth.sigma2 = 16.0;
    d.truth.alpha.resize(4);
    d.truth.alpha << 0.75, 0.7, -0.5, 1.0;
    d.truth.T.resize(2, 2);
    d.truth.T << 1.25, -0.5, -0.5, 1.0;

    d.y_law = MissingnessLaw{MissingnessLaw::Kind::mar, -1.9, 0.1, 1.0, 0};
    d.c_laws.resize(2);
    if (sc == Scenario::mnar) {
      d.c_laws[0] = MissingnessLaw{MissingnessLaw::Kind::mnar, -5.0, 1.3, 0.0, 0};
      d.c_laws[1] = MissingnessLaw{MissingnessLaw::Kind::mnar, -10.5, 3.0, 0.0, 0};
    } else {
      d.c_laws[0] = MissingnessLaw{MissingnessLaw::Kind::mar, 0.8, -1.5, 0.0, 0};
      d.c_laws[1] = MissingnessLaw{MissingnessLaw::Kind::mar, -2.8, 0.5, 0.0, 0};
    }
    return d;
  }

  void validate() const {
    spec.validate();
    truth.validate(spec);
    if (clusters < 1 || cluster_size < 1)
      throw Error("SimulationDesign: clusters and cluster_size must be positive");
    if (static_cast<int>(c_laws.size()) != spec.p)
      throw Error("SimulationDesign: need one (possibly empty) law slot per C covariate");
    for (const auto& law : c_laws)
      if (law && law->kind == MissingnessLaw::Kind::mnar &&
          (law->driver < 0 || law->driver >= spec.p))
        throw Error("SimulationDesign: MNAR driver must index a C covariate");
  }
};

// Draw one complete dataset (no masks). Per cluster, in a fixed order:
// x2, C, u, then the unit-level noise; the order is part of the
// reproducibility contract.
inline Dataset simulate_dataset(const SimulationDesign& d, RngStream& rng) {
  d.validate();
  const int J = d.clusters, nj = d.cluster_size, p = d.spec.p;
  Dataset out;
  out.x2.resize(J, d.spec.q2);
  out.x1.resize(J * nj, d.spec.q1);
  out.c.resize(J, p);
  out.y.resize(J * nj);
  out.y_miss.assign(J * nj, 0);
  out.c_miss.assign(static_cast<std::size_t>(J) * p, 0);
  out.cluster_start.resize(J + 1);
  for (int j = 0; j <= J; ++j) out.cluster_start[j] = j * nj;

  Eigen::VectorXd beta = d.truth.beta;
  for (int j = 0; j < J; ++j) {
    double x = draw_normal(2.0, 1.0, rng);
    out.x2(j, 0) = x;
    if (d.scenario == Scenario::lognormal_covariate) {
      out.c(j, 0) = std::exp(draw_normal(0.5 + 0.1 * x, 0.2, rng));
      out.c(j, 1) = draw_normal(1.0 + 0.1 * out.c(j, 0) + 0.3 * x, 1.0, rng);
    } else {
      Eigen::VectorXd mu = covariate_mean(d.truth.alpha, out.x2.row(j), p);
      out.c.row(j) = draw_mvn(mu, d.truth.T, rng).transpose();
    }
    double u = draw_normal(0.0, d.truth.tau, rng);
    for (int i = out.cluster_start[j]; i < out.cluster_start[j + 1]; ++i) {
      Eigen::VectorXd design(d.spec.fixed_dim());
      build_design(d.spec, out.x1.row(i), out.x2.row(j), out.c.row(j), design);
      out.y[i] = draw_normal(design.dot(beta) + u, d.truth.sigma2, rng);
    }
  }
  return out;
}

// Apply the design's missingness laws to a complete dataset. Values are left
// in place and only the flags are set, so masking is reversible; laws are
// applied variable by variable (y, then C in ascending index) with a fixed
// draw order. MNAR logits read the true covariate values.
inline Dataset apply_missingness(const Dataset& complete, const SimulationDesign& d,
                                 RngStream& rng) {
  d.validate();
  Dataset out = complete;
  const int p = d.spec.p;
  if (d.y_law) {
    const MissingnessLaw& law = *d.y_law;
    if (law.kind != MissingnessLaw::Kind::mar)
      throw Error("apply_missingness: the outcome law must be MAR");
    for (int j = 0; j < out.J(); ++j) {
      double logit =
          draw_normal(law.intercept + law.slope * out.x2(j, law.driver), law.noise_var, rng);
      double prob = inv_logit(logit);
      for (int i = out.cluster_start[j]; i < out.cluster_start[j + 1]; ++i)
        if (rng.uniform() < prob) out.y_miss[i] = 1;
    }
  }
  for (int k = 0; k < p; ++k) {
    if (!d.c_laws[k]) continue;
    const MissingnessLaw& law = *d.c_laws[k];
    for (int j = 0; j < out.J(); ++j) {
      double logit;
      if (law.kind == MissingnessLaw::Kind::mar)
        logit = draw_normal(law.intercept + law.slope * out.x2(j, law.driver), law.noise_var,
                            rng);
      else
        logit = law.intercept + law.slope * complete.c(j, law.driver);
      if (rng.uniform() < inv_logit(logit)) out.c_miss[j * p + k] = 1;
    }
  }
  return out;
}

// Drop all masks, recovering the complete dataset a masked copy was built
// from (masking preserves values).
inline Dataset unmask(const Dataset& d) {
  Dataset out = d;
  std::fill(out.y_miss.begin(), out.y_miss.end(), 0);
  std::fill(out.c_miss.begin(), out.c_miss.end(), 0);
  return out;
}

// Per-replication record: pooled-chain point estimates and intervals for the
// monitored parameters, convergence flags, or the failure that aborted it.
struct ReplicationResult {
  bool failed = false;
  std::string error;
  Eigen::VectorXd est, se, lower, upper;
  bool geweke_all = false;
  bool psrf_all = false;
  bool covered_computed = false;
};

// Aggregates over completed replications, paper-style:
//   bias_pct  (mean estimate - truth) / truth * 100
//   ase       mean posterior SD
//   ese       SD of the point estimates across replications
//   coverage  fraction of central 95% intervals containing the truth
// Convergence pass rates are reported alongside; replications that failed
// outright are excluded from all aggregates and counted.
struct ReplicationReport {
  std::vector<std::string> names;
  Eigen::VectorXd truth;
  Eigen::VectorXd bias_pct, ase, ese, coverage;
  double geweke_pass_rate = 0.0;
  double psrf_pass_rate = 0.0;
  int replications = 0;
  int completed = 0;
  int failed = 0;
  bool ese_degenerate = false;  // single completed replication: no spread
  std::vector<ReplicationResult> rows;
};

// Truth vector in monitored order (betas, tau, sigma2).
inline Eigen::VectorXd monitored_truth(const SimulationDesign& d) {
  Eigen::VectorXd t(d.spec.fixed_dim() + 2);
  t.head(d.spec.fixed_dim()) = d.truth.beta;
  t[d.spec.fixed_dim()] = d.truth.tau;
  t[d.spec.fixed_dim() + 1] = d.truth.sigma2;
  return t;
}

namespace detail {

inline ReplicationResult run_one_replication(const SimulationDesign& d, const GibbsConfig& cfg,
                                             const PriorConfig& priors, std::uint64_t seed,
                                             int rep) {
  ReplicationResult res;
  try {
    std::uint64_t rep_seed = mix64(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(rep + 1));
    RngStream data_rng(rep_seed, 0);
    Dataset complete = simulate_dataset(d, data_rng);
    Dataset masked = apply_missingness(complete, d, data_rng);
    GibbsConfig rep_cfg = cfg;
    rep_cfg.seed = rep_seed;
    std::vector<ChainRecord> chains = run_chains(masked, d.spec, priors, rep_cfg, 1);

    std::vector<std::string> monitored = monitored_parameters(d.spec);
    const int np = static_cast<int>(monitored.size());
    res.est.resize(np);
    res.se.resize(np);
    res.lower.resize(np);
    res.upper.resize(np);
    for (int k = 0; k < np; ++k) {
      // Pool kept draws across chains for the point estimate and interval.
      Eigen::VectorXd pooled(chains.size() * chains[0].draws.rows());
      Eigen::Index at = 0;
      for (const auto& ch : chains) {
        pooled.segment(at, ch.draws.rows()) = ch.col(monitored[k]);
        at += ch.draws.rows();
      }
      SummaryStats st = posterior_summary(pooled);
      res.est[k] = st.mean;
      res.se[k] = st.sd;
      res.lower[k] = st.lower;
      res.upper[k] = st.upper;
    }
    ConvergenceReport conv = assess_convergence(chains, monitored);
    res.geweke_all = conv.all_geweke_pass;
    res.psrf_all = conv.has_psrf ? conv.all_psrf_pass : true;
    res.covered_computed = true;
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

}  // namespace detail

// Run R independent replications of simulate -> mask -> fit, each owning RNG
// streams derived from (cfg.seed, replication index), optionally on a worker
// pool. Results are aggregated in replication order, so the report does not
// depend on scheduling.
inline ReplicationReport run_replications(const SimulationDesign& d, int replications,
                                          const GibbsConfig& cfg, const PriorConfig& priors,
                                          int workers = 1) {
  d.validate();
  cfg.validate();
  if (replications < 1) throw Error("run_replications: need at least one replication");
  if (cfg.kept < 50)
    throw Error(
        "run_replications: convergence diagnostics need at least 50 kept draws per chain");
  if (workers < 1) workers = 1;
  workers = std::min(workers, replications);

  std::vector<ReplicationResult> rows(replications);
  if (workers == 1) {
    for (int r = 0; r < replications; ++r)
      rows[r] = detail::run_one_replication(d, cfg, priors, cfg.seed, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        int r = next.fetch_add(1);
        if (r >= replications) return;
        rows[r] = detail::run_one_replication(d, cfg, priors, cfg.seed, r);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int wkr = 0; wkr < workers; ++wkr) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ReplicationReport rep;
  rep.names = monitored_parameters(d.spec);
  rep.truth = monitored_truth(d);
  rep.replications = replications;
  rep.rows = std::move(rows);
  const int np = static_cast<int>(rep.names.size());
  Eigen::VectorXd est_sum = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd se_sum = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd cover = Eigen::VectorXd::Zero(np);
  int done = 0, geweke_ok = 0, psrf_ok = 0;
  for (const auto& row : rep.rows) {
    if (row.failed) {
      ++rep.failed;
      continue;
    }
    ++done;
    est_sum += row.est;
    se_sum += row.se;
    for (int k = 0; k < np; ++k)
      if (rep.truth[k] >= row.lower[k] && rep.truth[k] <= row.upper[k]) cover[k] += 1.0;
    if (row.geweke_all) ++geweke_ok;
    if (row.psrf_all) ++psrf_ok;
  }
  rep.completed = done;
  if (done == 0) throw Error("run_replications: every replication failed");
  Eigen::VectorXd mean_est = est_sum / done;
  rep.bias_pct.resize(np);
  for (int k = 0; k < np; ++k) {
    if (rep.truth[k] == 0.0)
      throw Error("run_replications: %bias is undefined for a zero true value");
    rep.bias_pct[k] = (mean_est[k] - rep.truth[k]) / rep.truth[k] * 100.0;
  }
  rep.ase = se_sum / done;
  rep.coverage = cover / done;
  rep.ese.resize(np);
  rep.ese_degenerate = done < 2;
  for (int k = 0; k < np; ++k) {
    if (done < 2) {
      rep.ese[k] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (const auto& row : rep.rows)
      if (!row.failed) acc += (row.est[k] - mean_est[k]) * (row.est[k] - mean_est[k]);
    rep.ese[k] = std::sqrt(acc / (done - 1));
  }
  rep.geweke_pass_rate = static_cast<double>(geweke_ok) / done;
  rep.psrf_pass_rate = static_cast<double>(psrf_ok) / done;
  return rep;
}

}  // namespace higibbs
