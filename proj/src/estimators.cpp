#include "derdose/estimators.hpp"

#include <cmath>
#include <stdexcept>

#include "derdose/errors.hpp"

namespace derdose {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::DR:
      return "DR";
    case Method::DerCf:
      return "DER_CF";
    case Method::DerUnadjusted:
      return "DER_UNADJ";
  }
  return "?";
}

std::string_view to_string(Adjustment adjustment) {
  return adjustment == Adjustment::Cf ? "cf" : "unadj";
}

MarginalDrEstimate estimate_dr(const TrialDataset& data, const GlmOptions& glm) {
  MarginalDrEstimate est;
  est.method = Method::DR;
  const auto fit = fit_glm_binary(with_intercept(data.dose), data.response, Link::Probit, glm);
  if (!fit.ok()) return est;
  est.alpha0 = fit.coefficients[0];
  est.alpha_d = fit.coefficients[1];
  est.valid = true;
  return est;
}

double recover_rho2(double beta_eta_star, double sigma_eta2) {
  const double s = beta_eta_star * beta_eta_star * sigma_eta2;
  return s / (1.0 + s);
}

CfFitBundle fit_der_bundle(const TrialDataset& data, Adjustment adjustment, Link link,
                           const GlmOptions& glm) {
  CfFitBundle b;
  b.adjustment = adjustment;
  b.link = link;
  const Eigen::Index n = data.size();
  b.de_fit = fit_ols(with_intercept(data.dose), data.exposure);
  if (!b.de_fit.ok()) return b;
  b.eta_hat = b.de_fit.residuals;
  b.sigma_eta2_hat = b.eta_hat.squaredNorm() / static_cast<double>(n - 2);
  if (adjustment == Adjustment::Cf) {
    b.er_fit = fit_glm_binary(with_intercept(data.exposure, b.eta_hat), data.response, link, glm);
    if (b.er_fit.ok()) b.rho2_hat = recover_rho2(b.er_fit.coefficients[2], b.sigma_eta2_hat);
  } else {
    b.er_fit = fit_glm_binary(with_intercept(data.exposure), data.response, link, glm);
  }
  return b;
}

CfFitBundle fit_cf_bundle(const TrialDataset& data, const GlmOptions& glm) {
  return fit_der_bundle(data, Adjustment::Cf, Link::Probit, glm);
}

namespace {

void require_probit(const CfFitBundle& bundle, Adjustment expected) {
  if (bundle.link != Link::Probit || bundle.adjustment != expected) {
    throw std::invalid_argument("marginal conversion needs a probit bundle of matching adjustment");
  }
}

}  // namespace

MarginalDrEstimate convert_cf_to_marginal(const CfFitBundle& bundle) {
  require_probit(bundle, Adjustment::Cf);
  MarginalDrEstimate est;
  est.method = Method::DerCf;
  if (!bundle.valid()) return est;
  const double scale = std::sqrt(1.0 - bundle.rho2_hat);
  const Eigen::Vector3d beta = bundle.er_fit.coefficients * scale;
  const double slope_sum = beta[1] + beta[2];
  const double denom =
      std::sqrt(1.0 - bundle.rho2_hat + slope_sum * slope_sum * bundle.sigma_eta2_hat);
  est.alpha0 = (beta[0] + beta[1] * bundle.gamma0()) / denom;
  est.alpha_d = beta[1] * bundle.gamma_d() / denom;
  est.valid = std::isfinite(est.alpha0) && std::isfinite(est.alpha_d);
  return est;
}

MarginalDrEstimate convert_unadjusted_to_marginal(const CfFitBundle& bundle) {
  require_probit(bundle, Adjustment::Unadjusted);
  MarginalDrEstimate est;
  est.method = Method::DerUnadjusted;
  if (!bundle.valid()) return est;
  const double b0 = bundle.er_fit.coefficients[0];
  const double bc = bundle.er_fit.coefficients[1];
  const double denom = std::sqrt(1.0 + bc * bc * bundle.sigma_eta2_hat);
  est.alpha0 = (b0 + bc * bundle.gamma0()) / denom;
  est.alpha_d = bc * bundle.gamma_d() / denom;
  est.valid = std::isfinite(est.alpha0) && std::isfinite(est.alpha_d);
  return est;
}

MarginalDrEstimate convert_to_marginal(const CfFitBundle& bundle) {
  return bundle.adjustment == Adjustment::Cf ? convert_cf_to_marginal(bundle)
                                             : convert_unadjusted_to_marginal(bundle);
}

MarginalDrEstimate estimate_der_cf(const TrialDataset& data, const GlmOptions& glm) {
  return convert_cf_to_marginal(fit_cf_bundle(data, glm));
}

MarginalDrEstimate estimate_der_unadjusted(const TrialDataset& data, const GlmOptions& glm) {
  return convert_unadjusted_to_marginal(
      fit_der_bundle(data, Adjustment::Unadjusted, Link::Probit, glm));
}

double predict_response_modelbased(const MarginalDrEstimate& est, double dose) {
  if (!est.valid) throw std::invalid_argument("predict_response_modelbased: invalid estimate");
  return std_normal_cdf(est.alpha0 + est.alpha_d * dose);
}

double predict_response_empirical(const CfFitBundle& bundle, double dose) {
  if (!bundle.valid()) throw std::invalid_argument("predict_response_empirical: invalid bundle");
  const Eigen::VectorXd& beta = bundle.er_fit.coefficients;
  const bool adjusted = bundle.adjustment == Adjustment::Cf;
  const double mean_exposure = bundle.gamma0() + bundle.gamma_d() * dose;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < bundle.eta_hat.size(); ++i) {
    const double eta = bundle.eta_hat[i];
    double lp = beta[0] + beta[1] * (mean_exposure + eta);
    if (adjusted) lp += beta[2] * eta;
    sum += bundle.link == Link::Probit ? std_normal_cdf(lp) : expit(lp);
  }
  return sum / static_cast<double>(bundle.eta_hat.size());
}

Eigen::VectorXd predict_response_empirical(const CfFitBundle& bundle,
                                           const Eigen::VectorXd& doses) {
  return doses.unaryExpr([&](double d) { return predict_response_empirical(bundle, d); });
}

LinearEstimates estimate_linear(const TrialDataset& data) {
  LinearEstimates out;
  const auto dr = fit_ols(with_intercept(data.dose), data.response);
  const auto de = fit_ols(with_intercept(data.dose), data.exposure);
  if (!dr.ok() || !de.ok()) return out;
  const auto er = fit_ols(with_intercept(data.exposure), data.response);
  const auto er_cf = fit_ols(with_intercept(data.exposure, de.residuals), data.response);
  if (!er.ok() || !er_cf.ok()) return out;
  out.dr_slope = dr.coefficients[1];
  out.der_unadjusted = de.coefficients[1] * er.coefficients[1];
  out.der_cf = de.coefficients[1] * er_cf.coefficients[1];
  out.valid = true;
  return out;
}

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw NonPositiveVariance(std::string(name) + " must be > 0");
}

}  // namespace

double linear_variance_ratio_unadjusted(double beta_c, double gamma_d, double sigma_d2,
                                        double sigma_eta2, double sigma_eps2) {
  require_positive(sigma_d2, "sigma_d2");
  require_positive(sigma_eta2, "sigma_eta2");
  require_positive(sigma_eps2, "sigma_eps2");
  const double er = beta_c * beta_c * sigma_eta2 + sigma_eps2;
  const double de = gamma_d * gamma_d * sigma_d2 + sigma_eta2;
  return 1.0 - sigma_eta2 * sigma_eps2 / (er * de);
}

double linear_der_product_variance(double beta_c, double gamma_d, double sigma_d2,
                                   double sigma_eta2, double sigma_eps2, int n) {
  require_positive(sigma_d2, "sigma_d2");
  require_positive(sigma_eta2, "sigma_eta2");
  require_positive(sigma_eps2, "sigma_eps2");
  const double sigma_c2 = gamma_d * gamma_d * sigma_d2 + sigma_eta2;
  return (beta_c * beta_c * sigma_eta2 / sigma_d2 + gamma_d * gamma_d * sigma_eps2 / sigma_c2) /
         n;
}

double linear_dr_slope_variance(double beta_c, double sigma_d2, double sigma_eta2,
                                double sigma_eps2, int n) {
  require_positive(sigma_d2, "sigma_d2");
  require_positive(sigma_eta2, "sigma_eta2");
  require_positive(sigma_eps2, "sigma_eps2");
  return (beta_c * beta_c * sigma_eta2 + sigma_eps2) / (sigma_d2 * n);
}

double linear_der_cf_variance(double beta_c, double gamma_d, double sigma_d2,
                              double sigma_eta2, double sigma_eps2, int n) {
  require_positive(sigma_d2, "sigma_d2");
  require_positive(sigma_eta2, "sigma_eta2");
  require_positive(sigma_eps2, "sigma_eps2");
  const double var_gamma = sigma_eta2 / (n * sigma_d2);
  const double var_beta_tilde = sigma_eps2 / (n * sigma_d2 * gamma_d * gamma_d);
  return beta_c * beta_c * var_gamma + gamma_d * gamma_d * var_beta_tilde;
}

}  // namespace derdose
