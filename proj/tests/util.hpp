// Shared helpers for the test suite: deterministic random model shapes and
// datasets built on the library's own streams (fixed seeds per test).
#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "higibbs/gibbs.hpp"
#include "higibbs/model.hpp"
#include "higibbs/rng.hpp"

namespace testutil {

inline int rand_int(higibbs::RngStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

// Random model shape with up to 4 partial covariates and random interaction
// subsets (kept in canonical order).
inline higibbs::HlmSpec random_spec(higibbs::RngStream& rng, int max_p = 4, int max_q = 2) {
  higibbs::HlmSpec spec;
  spec.p = rand_int(rng, 1, max_p);
  spec.q1 = rand_int(rng, 0, max_q);
  spec.q2 = rand_int(rng, 0, max_q);
  for (int s = 0; s < spec.p; ++s)
    for (int col = 0; col < spec.q(); ++col)
      if (rng.uniform() < 0.3) spec.active_xc.emplace_back(s, col);
  for (int s = 0; s < spec.p; ++s)
    for (int t = s + 1; t < spec.p; ++t)
      if (rng.uniform() < 0.3) spec.active_cc.emplace_back(s, t);
  spec.validate();
  return spec;
}

// Independent evaluation of the model mean: explicit term-by-term sum of the
// hierarchical regression, written without build_design.
inline double reference_mean(const higibbs::HlmSpec& spec, const Eigen::VectorXd& beta,
                             const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                             const Eigen::VectorXd& c, double u) {
  auto xval = [&](int col) { return col < spec.q1 ? x1[col] : x2[col - spec.q1]; };
  double val = beta[0];
  for (int s = 0; s < spec.p; ++s) val += beta[1 + s] * c[s];
  for (int r = 0; r < spec.q(); ++r) val += beta[1 + spec.p + r] * xval(r);
  int base = 1 + spec.p + spec.q();
  for (std::size_t i = 0; i < spec.active_xc.size(); ++i) {
    auto [s, col] = spec.active_xc[i];
    val += beta[base + static_cast<int>(i)] * c[s] * xval(col);
  }
  base += static_cast<int>(spec.active_xc.size());
  for (std::size_t i = 0; i < spec.active_cc.size(); ++i) {
    auto [s, t] = spec.active_cc[i];
    val += beta[base + static_cast<int>(i)] * c[s] * c[t];
  }
  return val + u;
}

// Complete random dataset for a given shape (no missing cells).
inline higibbs::Dataset random_dataset(const higibbs::HlmSpec& spec, int J, int max_nj,
                                       higibbs::RngStream& rng) {
  higibbs::Dataset d;
  d.cluster_start.resize(J + 1);
  d.cluster_start[0] = 0;
  for (int j = 0; j < J; ++j)
    d.cluster_start[j + 1] = d.cluster_start[j] + rand_int(rng, 1, max_nj);
  const int N = d.cluster_start[J];
  d.y.resize(N);
  d.y_miss.assign(N, 0);
  d.x1.resize(N, spec.q1);
  d.x2.resize(J, spec.q2);
  d.c.resize(J, spec.p);
  d.c_miss.assign(static_cast<std::size_t>(J) * spec.p, 0);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < spec.q1; ++k) d.x1(i, k) = rng.normal();
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < spec.q2; ++k) d.x2(j, k) = rng.normal();
    for (int k = 0; k < spec.p; ++k) d.c(j, k) = rng.normal();
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Ones(spec.fixed_dim());
  for (int j = 0; j < J; ++j) {
    double u = higibbs::draw_normal(0.0, 1.0, rng);
    for (int i = d.cluster_start[j]; i < d.cluster_start[j + 1]; ++i) {
      Eigen::VectorXd design(spec.fixed_dim());
      higibbs::build_design(spec, d.x1.row(i), d.x2.row(j), d.c.row(j), design);
      d.y[i] = design.dot(beta) + u + higibbs::draw_normal(0.0, 1.0, rng);
    }
  }
  return d;
}

// Mask a fraction of the outcome cells and covariate cells uniformly at
// random, never leaving a covariate column fully missing.
inline void random_mask(higibbs::Dataset& d, double y_rate, double c_rate,
                        higibbs::RngStream& rng) {
  for (int i = 0; i < d.N(); ++i)
    if (rng.uniform() < y_rate) d.y_miss[i] = 1;
  const int p = static_cast<int>(d.c.cols());
  for (int k = 0; k < p; ++k) {
    int observed = d.J();
    for (int j = 0; j < d.J(); ++j)
      if (observed > 1 && rng.uniform() < c_rate) {
        d.c_miss[j * p + k] = 1;
        --observed;
      }
  }
}

}  // namespace testutil
