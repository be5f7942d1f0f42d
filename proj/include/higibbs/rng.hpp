#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>

#include "common.hpp"

namespace higibbs {

// Deterministic random stream addressed by (seed, stream_id). Every consumer
// (chain, replication) owns its own stream so results do not depend on
// scheduling. Distributions are implemented on the raw engine rather than
// via std::*_distribution, whose output is not reproducible across standard
// library implementations.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
        static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
        0x9e3779b9u};
    eng_.seed(seq);
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = (eng_() >> 11) * 0x1.0p-53;
    } while (u <= 0.0);
    return u;
  }

  // Standard normal, Marsaglia polar method with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// N(mean, var). var = 0 degenerates to the mean exactly (state advances
// either way so downstream draws do not depend on the variance value).
inline double draw_normal(double mean, double var, RngStream& rng) {
  if (!(var >= 0.0)) throw Error(strf("draw_normal: negative variance %g", var));
  return mean + std::sqrt(var) * rng.normal();
}

// Gamma(shape, rate) by Marsaglia-Tsang squeeze; shape < 1 via the boost
// G(a) = G(a+1) * U^(1/a).
inline double draw_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw Error(strf("draw_gamma: shape %g and rate %g must be positive", shape, rate));
  if (shape < 1.0) {
    double g = draw_gamma(shape + 1.0, rate, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.normal();
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

// Inverse gamma with mean rate / (shape - 1) for shape > 1: the reciprocal of
// Gamma(shape, rate).
inline double draw_inverse_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw Error(strf("draw_inverse_gamma: shape %g and rate %g must be positive", shape, rate));
  return 1.0 / draw_gamma(shape, rate, rng);
}

inline double draw_chi_squared(double dof, RngStream& rng) {
  return draw_gamma(0.5 * dof, 0.5, rng);
}

namespace detail {

// Symmetry check relative to the matrix scale.
inline void require_symmetric(const Eigen::MatrixXd& a, const char* who) {
  double scale = a.cwiseAbs().maxCoeff();
  double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * (1.0 + scale)) throw Error(strf("%s: matrix is not symmetric", who));
}

}  // namespace detail

// Multivariate normal via eigendecomposition. Accepts positive semidefinite
// covariances (degenerate directions collapse to the mean); rejects
// indefinite input. Eigenvalues in [-tol, 0) are clamped to zero, with
// tol = 1e-10 * max|eigenvalue|.
inline Eigen::VectorXd draw_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                RngStream& rng) {
  const Eigen::Index k = mean.size();
  if (cov.rows() != k || cov.cols() != k)
    throw Error(strf("draw_mvn: covariance is %ldx%ld but mean has length %ld",
                     static_cast<long>(cov.rows()), static_cast<long>(cov.cols()),
                     static_cast<long>(k)));
  detail::require_symmetric(cov, "draw_mvn");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("draw_mvn: eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues();
  double lmax = lam.cwiseAbs().maxCoeff();
  double tol = 1e-10 * std::max(lmax, 1e-300);
  Eigen::VectorXd z(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (lam[i] < -tol)
      throw Error(strf("draw_mvn: covariance is indefinite (eigenvalue %g)", lam[i]));
    lam[i] = std::max(lam[i], 0.0);
    z[i] = rng.normal();
  }
  return mean + es.eigenvectors() * (lam.cwiseSqrt().asDiagonal() * z);
}

// Inverse Wishart with scale matrix Psi and mean Psi / (dof - p - 1) for
// dof > p + 1. Sampled as the inverse of Wishart(dof, Psi^-1) via the
// Bartlett factorization.
inline Eigen::MatrixXd draw_inverse_wishart(double dof, const Eigen::MatrixXd& scale,
                                            RngStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p) throw Error("draw_inverse_wishart: scale matrix must be square");
  if (!(dof > static_cast<double>(p) - 1.0))
    throw Error(strf("draw_inverse_wishart: dof %g must exceed p - 1 = %ld", dof,
                     static_cast<long>(p - 1)));
  detail::require_symmetric(scale, "draw_inverse_wishart");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success)
    throw Error("draw_inverse_wishart: scale matrix is not positive definite");
  Eigen::MatrixXd inv_scale = llt.solve(Eigen::MatrixXd::Identity(p, p));
  inv_scale = 0.5 * (inv_scale + inv_scale.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt_inv(inv_scale);
  if (llt_inv.info() != Eigen::Success)
    throw Error("draw_inverse_wishart: scale inverse is not positive definite");
  Eigen::MatrixXd m = llt_inv.matrixL();

  // Bartlett lower factor: chi on the diagonal, standard normals below.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = rng.normal();
    a(i, i) = std::sqrt(draw_chi_squared(dof - static_cast<double>(i), rng));
  }
  Eigen::MatrixXd f = m * a;           // chol factor of W ~ Wishart(dof, Psi^-1)
  Eigen::MatrixXd w = f * f.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt_w(w);
  if (llt_w.info() != Eigen::Success)
    throw Error("draw_inverse_wishart: sampled Wishart draw is singular");
  Eigen::MatrixXd x = llt_w.solve(Eigen::MatrixXd::Identity(p, p));
  return 0.5 * (x + x.transpose());
}

}  // namespace higibbs
