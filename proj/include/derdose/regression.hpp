// Least squares and binary-response GLM fitting on small dense designs.
#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <limits>
#include <string_view>
#include <type_traits>

#include <Eigen/Dense>

#include "derdose/numerics.hpp"

namespace derdose {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Columns are regressors, rows are subjects. An intercept, when present, is a
/// column of ones (see with_intercept).
template <typename Scalar>
using DesignMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class FitStatus {
  Ok,
  RankDeficient,
  Separation,
  OneClassOnly,
  IterationLimit,
};

enum class Link { Probit, Logit };

std::string_view to_string(FitStatus status);
std::string_view to_string(Link link);

template <typename Scalar>
struct FitResult {
  VectorX<Scalar> coefficients;
  FitStatus status = FitStatus::Ok;
  bool converged = false;
  int iterations = 0;
  // Largest absolute coefficient change on the final iteration (GLM only).
  Scalar last_step = 0;
  // OLS only.
  VectorX<Scalar> residuals;
  Scalar residual_variance = 0;
  // GLM only.
  Scalar deviance = 0;
  // Some fitted probability hit the numerical 0/1 boundary (RCompatible).
  bool boundary = false;

  bool ok() const { return status == FitStatus::Ok; }
};

/// Guarded: the stopping and failure rules documented on fit_glm_binary.
/// RCompatible: mirrors R's glm.fit for the binomial family (start at
/// mu = (y + 0.5) / 2, linear predictor clamped by the link, 25 iterations,
/// relative deviance change below 1e-8). Diverging fits keep their last
/// finite coefficients and report Ok, as R returns them with a warning.
enum class IrlsVariant { Guarded, RCompatible };

std::string_view to_string(IrlsVariant variant);

struct GlmOptions {
  IrlsVariant variant = IrlsVariant::Guarded;
  int max_iterations = 100;
  double coefficient_tolerance = 1e-8;
  // Any |coefficient| beyond this is treated as divergence (separation).
  double divergence_bound = 30.0;
  // Fitted probabilities are kept inside [clamp, 1 - clamp].
  double probability_clamp = 1e-10;

  static GlmOptions r_compatible() {
    GlmOptions o;
    o.variant = IrlsVariant::RCompatible;
    o.max_iterations = 25;
    return o;
  }
};

/// Design matrix with a leading intercept column followed by `cols`.
template <typename First, typename... Rest>
DesignMatrix<typename First::Scalar> with_intercept(
    const Eigen::MatrixBase<First>& first, const Eigen::MatrixBase<Rest>&... rest) {
  using Scalar = typename First::Scalar;
  DesignMatrix<Scalar> x(first.rows(), 2 + static_cast<Eigen::Index>(sizeof...(Rest)));
  x.col(0).setOnes();
  x.col(1) = first;
  Eigen::Index j = 2;
  ((x.col(j++) = rest), ...);
  return x;
}

namespace detail {

template <typename Derived>
Eigen::Index intercept_column(const Eigen::MatrixBase<Derived>& x) {
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if ((x.col(j).array() == typename Derived::Scalar(1)).all()) return j;
  }
  return -1;
}

template <typename Scalar>
Scalar clamp_probability(Scalar p, double eps) {
  return std::clamp(p, Scalar(eps), Scalar(1) - Scalar(eps));
}

template <typename Scalar>
Scalar inverse_link(Link link, Scalar eta) {
  return link == Link::Probit ? std_normal_cdf(eta) : expit(eta);
}

template <typename Scalar>
Scalar link_function(Link link, Scalar mu) {
  if (link == Link::Probit) return Scalar(std_normal_quantile(static_cast<double>(mu)));
  return std::log(mu / (Scalar(1) - mu));
}

}  // namespace detail

/// Ordinary least squares by column-pivoted Householder QR.
///
/// A pivot smaller than 1e-10 times the norm of its column marks the design as
/// rank deficient (e.g. a dose grid with a single level). Residual variance
/// uses the n - p denominator.
template <typename DerivedX, typename DerivedY>
FitResult<typename DerivedX::Scalar> fit_ols(const Eigen::MatrixBase<DerivedX>& x,
                                             const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit_ols: row count mismatch");
  if (n <= p) throw std::invalid_argument("fit_ols: need more rows than columns");
  if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_ols: non-finite input");

  FitResult<Scalar> fit;
  fit.iterations = 1;
  Eigen::ColPivHouseholderQR<DesignMatrix<Scalar>> qr(x);
  const auto& r = qr.matrixR();
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = 0; k < p; ++k) {
    const Scalar col_norm = x.col(perm[k]).norm();
    if (!(std::abs(r(k, k)) > Scalar(1e-10) * col_norm)) {
      fit.status = FitStatus::RankDeficient;
      fit.coefficients = VectorX<Scalar>::Zero(p);
      return fit;
    }
  }
  fit.coefficients = qr.solve(y.derived().template cast<Scalar>());
  fit.residuals = y - x * fit.coefficients;
  fit.residual_variance = fit.residuals.squaredNorm() / Scalar(n - p);
  fit.converged = true;
  return fit;
}

/// Bernoulli log-likelihood of `beta` under the given link, with fitted
/// probabilities clamped to [clamp, 1 - clamp].
template <typename DerivedX, typename DerivedY, typename DerivedB>
typename DerivedX::Scalar binary_log_likelihood(const Eigen::MatrixBase<DerivedX>& x,
                                                const Eigen::MatrixBase<DerivedY>& y,
                                                const Eigen::MatrixBase<DerivedB>& beta,
                                                Link link, double clamp = 1e-10) {
  using Scalar = typename DerivedX::Scalar;
  const VectorX<Scalar> eta = x * beta;
  Scalar ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const Scalar mu = detail::clamp_probability(detail::inverse_link(link, eta[i]), clamp);
    ll += y[i] > Scalar(0.5) ? std::log(mu) : std::log1p(-mu);
  }
  return ll;
}

/// Gradient of binary_log_likelihood with respect to beta.
template <typename DerivedX, typename DerivedY, typename DerivedB>
VectorX<typename DerivedX::Scalar> binary_score(const Eigen::MatrixBase<DerivedX>& x,
                                                const Eigen::MatrixBase<DerivedY>& y,
                                                const Eigen::MatrixBase<DerivedB>& beta,
                                                Link link, double clamp = 1e-10) {
  using Scalar = typename DerivedX::Scalar;
  const VectorX<Scalar> eta = x * beta;
  VectorX<Scalar> u(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const Scalar mu = detail::clamp_probability(detail::inverse_link(link, eta[i]), clamp);
    const Scalar dmu = link == Link::Probit ? std_normal_pdf(eta[i]) : mu * (Scalar(1) - mu);
    u[i] = dmu * (y[i] - mu) / (mu * (Scalar(1) - mu));
  }
  return x.transpose() * u;
}

namespace detail {

// Link functions exactly as R's binomial family evaluates them.
struct RBinomialLink {
  static constexpr double kEps = std::numeric_limits<double>::epsilon();
  // -qnorm(.Machine$double.eps)
  static constexpr double kProbitThreshold = 8.125890664701906;
  static constexpr double kLogitThreshold = 30.0;

  static double inverse(Link link, double eta) {
    if (link == Link::Probit) {
      return std_normal_cdf(std::clamp(eta, -kProbitThreshold, kProbitThreshold));
    }
    if (eta < -kLogitThreshold) return kEps;
    if (eta > kLogitThreshold) return 1.0 - kEps;
    return 1.0 / (1.0 + std::exp(-eta));
  }

  static double derivative(Link link, double eta) {
    if (link == Link::Probit) return std::max(std_normal_pdf(eta), kEps);
    if (eta > kLogitThreshold || eta < -kLogitThreshold) return kEps;
    const double e = std::exp(eta);
    return e / ((1.0 + e) * (1.0 + e));
  }

  static double forward(Link link, double mu) {
    return link == Link::Probit ? std_normal_quantile(mu) : std::log(mu / (1.0 - mu));
  }
};

inline double r_binomial_deviance(double y, double mu) {
  return y > 0.5 ? -2.0 * std::log(mu) : -2.0 * std::log1p(-mu);
}

template <typename DerivedX, typename DerivedY>
FitResult<double> fit_glm_binary_r(const Eigen::MatrixBase<DerivedX>& x,
                                   const Eigen::MatrixBase<DerivedY>& y, Link link,
                                   const GlmOptions& opt) {
  using R = RBinomialLink;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  FitResult<double> fit;
  fit.coefficients = VectorX<double>::Zero(p);

  VectorX<double> eta(n);
  VectorX<double> mu(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eta[i] = R::forward(link, (y[i] + 0.5) / 2.0);
    mu[i] = R::inverse(link, eta[i]);
  }
  const auto deviance_of = [&](const VectorX<double>& m) {
    double d = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) d += r_binomial_deviance(y[i], m[i]);
    return d;
  };
  double dev_old = deviance_of(mu);

  DesignMatrix<double> xw(n, p);
  VectorX<double> zw(n);
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = R::derivative(link, eta[i]);
      const double w = d / std::sqrt(mu[i] * (1.0 - mu[i]));
      xw.row(i) = w * x.row(i);
      zw[i] = w * (eta[i] + (y[i] - mu[i]) / d);
    }
    Eigen::ColPivHouseholderQR<DesignMatrix<double>> qr(xw);
    qr.setThreshold(1e-11);
    if (qr.rank() < p) {
      fit.status = FitStatus::RankDeficient;
      fit.iterations = iter;
      return fit;
    }
    const VectorX<double> next = qr.solve(zw);
    fit.last_step = (next - fit.coefficients).cwiseAbs().maxCoeff();
    fit.coefficients = next;
    fit.iterations = iter;
    eta.noalias() = x * next;
    for (Eigen::Index i = 0; i < n; ++i) mu[i] = R::inverse(link, eta[i]);
    const double dev = deviance_of(mu);
    fit.deviance = dev;
    if (!std::isfinite(dev) || !next.allFinite()) {
      fit.status = FitStatus::Separation;
      return fit;
    }
    if (std::abs(dev - dev_old) / (std::abs(dev) + 0.1) < 1e-8) {
      fit.converged = true;
      break;
    }
    dev_old = dev;
  }
  const double eps = 10.0 * R::kEps;
  fit.boundary = ((mu.array() > 1.0 - eps) || (mu.array() < eps)).any();
  return fit;
}

}  // namespace detail

/// Maximum-likelihood probit or logit regression by iteratively reweighted
/// least squares.
///
/// Starts from beta = 0 with the intercept (if any) at link(mean(y)). Stops
/// when the largest coefficient change drops below the tolerance. Failures are
/// reported through FitResult::status rather than thrown: a constant response
/// gives OneClassOnly, a coefficient leaving the divergence bound gives
/// Separation, and running out of iterations gives IterationLimit.
template <typename DerivedX, typename DerivedY>
FitResult<typename DerivedX::Scalar> fit_glm_binary(const Eigen::MatrixBase<DerivedX>& x,
                                                    const Eigen::MatrixBase<DerivedY>& y,
                                                    Link link, const GlmOptions& opt = {}) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = DesignMatrix<Scalar>;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) throw std::invalid_argument("fit_glm_binary: row count mismatch");
  if (n <= p) throw std::invalid_argument("fit_glm_binary: need more rows than columns");
  if (!x.allFinite()) throw std::invalid_argument("fit_glm_binary: non-finite design");

  Scalar ones = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != Scalar(0) && y[i] != Scalar(1)) {
      throw std::invalid_argument("fit_glm_binary: response must be 0/1");
    }
    ones += y[i];
  }

  FitResult<Scalar> fit;
  fit.coefficients = VectorX<Scalar>::Zero(p);
  if (ones == Scalar(0) || ones == Scalar(n)) {
    fit.status = FitStatus::OneClassOnly;
    return fit;
  }
  if (opt.variant == IrlsVariant::RCompatible) {
    if constexpr (std::is_same_v<Scalar, double>) {
      return detail::fit_glm_binary_r(x, y, link, opt);
    } else {
      throw std::invalid_argument("fit_glm_binary: R-compatible IRLS needs double");
    }
  }
  if (const Eigen::Index j = detail::intercept_column(x); j >= 0) {
    fit.coefficients[j] = detail::link_function(link, ones / Scalar(n));
  }

  VectorX<Scalar> eta(n);
  VectorX<Scalar> w(n);
  VectorX<Scalar> wz(n);
  const auto finish = [&](FitStatus status) {
    fit.status = status;
    fit.deviance = -2 * binary_log_likelihood(x, y, fit.coefficients, link, opt.probability_clamp);
    return fit;
  };
  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    eta.noalias() = x * fit.coefficients;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar mu =
          detail::clamp_probability(detail::inverse_link(link, eta[i]), opt.probability_clamp);
      const Scalar var = mu * (Scalar(1) - mu);
      const Scalar dmu = link == Link::Probit ? std_normal_pdf(eta[i]) : var;
      // Working response z = eta + (y - mu) / dmu, folded into w * z so a
      // vanishing density never divides.
      w[i] = dmu * dmu / var;
      wz[i] = w[i] * eta[i] + dmu * (y[i] - mu) / var;
    }
    const Matrix xtwx = x.transpose() * w.asDiagonal() * x;
    const VectorX<Scalar> xtwz = x.transpose() * wz;
    Eigen::LDLT<Matrix> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= Scalar(0)).any()) {
      fit.status = FitStatus::RankDeficient;
      fit.iterations = iter;
      return fit;
    }
    const VectorX<Scalar> next = ldlt.solve(xtwz);
    fit.iterations = iter;
    fit.last_step = (next - fit.coefficients).cwiseAbs().maxCoeff();
    fit.coefficients = next;
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > Scalar(opt.divergence_bound)) {
      return finish(FitStatus::Separation);
    }
    if (fit.last_step < Scalar(opt.coefficient_tolerance)) {
      fit.converged = true;
      return finish(FitStatus::Ok);
    }
  }
  return finish(FitStatus::IterationLimit);
}

}  // namespace derdose
