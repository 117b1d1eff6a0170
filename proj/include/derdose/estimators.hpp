// Dose-response estimation: direct DR probit, and sequential DE + ER
// (dose-exposure-response) with or without a control-function residual.
#pragma once

#include <limits>
#include <string_view>

#include <Eigen/Dense>

#include "derdose/dgp.hpp"
#include "derdose/regression.hpp"

namespace derdose {

enum class Method { DR, DerCf, DerUnadjusted };
enum class Adjustment { Cf, Unadjusted };

std::string_view to_string(Method method);
std::string_view to_string(Adjustment adjustment);

/// Marginal probit DR parameters, Phi(alpha0 + alpha_d * dose).
struct MarginalDrEstimate {
  double alpha0 = std::numeric_limits<double>::quiet_NaN();
  double alpha_d = std::numeric_limits<double>::quiet_NaN();
  Method method = Method::DR;
  bool valid = false;
};

/// Fitted DE and ER models of one trial.
///
/// DE: exposure ~ 1 + dose by OLS; eta_hat are its residuals and
/// sigma_eta2_hat their variance with n - 2 degrees of freedom.
/// ER: response ~ 1 + exposure (+ eta_hat when adjusted) under `link`.
struct CfFitBundle {
  FitResult<double> de_fit;
  Eigen::VectorXd eta_hat;
  double sigma_eta2_hat = 0.0;
  FitResult<double> er_fit;
  double rho2_hat = 0.0;
  Adjustment adjustment = Adjustment::Cf;
  Link link = Link::Probit;

  bool valid() const { return de_fit.ok() && er_fit.ok(); }
  double gamma0() const { return de_fit.coefficients[0]; }
  double gamma_d() const { return de_fit.coefficients[1]; }
};

/// Probit of response on dose.
MarginalDrEstimate estimate_dr(const TrialDataset& data, const GlmOptions& glm = {});

/// (beta_eta^2 s2) / (1 + beta_eta^2 s2); the squared eta coefficient recovers
/// the share of ER noise explained by eta.
double recover_rho2(double beta_eta_star, double sigma_eta2);

/// Two-step DE/ER fit. With Adjustment::Cf the ER model carries the DE
/// residual as a control function and rho2_hat is recovered from its
/// coefficient; unadjusted fits leave rho2_hat at 0.
CfFitBundle fit_der_bundle(const TrialDataset& data, Adjustment adjustment,
                           Link link = Link::Probit, const GlmOptions& glm = {});

/// Probit control-function fit, fit_der_bundle(data, Cf, Probit).
CfFitBundle fit_cf_bundle(const TrialDataset& data, const GlmOptions& glm = {});

/// Marginal DR parameters from a probit control-function bundle.
///
/// The ER coefficients are first rescaled by sqrt(1 - rho2_hat); then
/// (alpha0, alpha_d) = (b0 + bc g0, bc gd) / sqrt(1 - rho2_hat + (bc + be)^2 s2).
MarginalDrEstimate convert_cf_to_marginal(const CfFitBundle& bundle);

/// Marginal DR parameters from an unadjusted probit bundle:
/// (b0 + bc g0, bc gd) / sqrt(1 + bc^2 s2).
MarginalDrEstimate convert_unadjusted_to_marginal(const CfFitBundle& bundle);

/// Dispatches on bundle.adjustment.
MarginalDrEstimate convert_to_marginal(const CfFitBundle& bundle);

MarginalDrEstimate estimate_der_cf(const TrialDataset& data, const GlmOptions& glm = {});
MarginalDrEstimate estimate_der_unadjusted(const TrialDataset& data,
                                           const GlmOptions& glm = {});

/// Phi(alpha0 + alpha_d * dose). `est` must be valid.
double predict_response_modelbased(const MarginalDrEstimate& est, double dose);

/// Average over subjects of g(b0 + bc * C_i(dose) + be * eta_i), where
/// C_i(dose) = g0 + gd * dose + eta_i and g is the bundle's inverse link.
/// Unadjusted bundles drop the be * eta_i term. `bundle` must be valid.
double predict_response_empirical(const CfFitBundle& bundle, double dose);

/// predict_response_empirical at every entry of `doses`.
Eigen::VectorXd predict_response_empirical(const CfFitBundle& bundle,
                                           const Eigen::VectorXd& doses);

// ---------------------------------------------------------------------------
// Linear DE and ER models.

/// Slope estimates of one continuous-response trial.
struct LinearEstimates {
  double dr_slope = 0.0;        // OLS of response on dose
  double der_unadjusted = 0.0;  // gamma_d_hat * beta_c_hat, ER fit on exposure
  double der_cf = 0.0;          // gamma_d_hat * beta_c_tilde, ER fit on exposure + eta_hat
  bool valid = false;
};

LinearEstimates estimate_linear(const TrialDataset& data);

/// Large-sample variance ratio of the unadjusted linear DER slope to the DR
/// slope: 1 - s_eta s_eps / ((bc^2 s_eta + s_eps)(gd^2 s_d + s_eta)).
double linear_variance_ratio_unadjusted(double beta_c, double gamma_d, double sigma_d2,
                                        double sigma_eta2, double sigma_eps2);

/// The control-function linear DER slope has the same variance as the DR
/// slope (they coincide trial by trial).
constexpr double linear_variance_ratio_cf() { return 1.0; }

/// Delta-method variance of gamma_d_hat * beta_c_hat for n subjects.
double linear_der_product_variance(double beta_c, double gamma_d, double sigma_d2,
                                   double sigma_eta2, double sigma_eps2, int n);

/// Variance of the OLS DR slope for n subjects.
double linear_dr_slope_variance(double beta_c, double sigma_d2, double sigma_eta2,
                                double sigma_eps2, int n);

/// Variance of gamma_d_hat * beta_c_tilde, using the 2SLS variance
/// s_eps / (n s_d gd^2) for beta_c_tilde.
double linear_der_cf_variance(double beta_c, double gamma_d, double sigma_d2,
                              double sigma_eta2, double sigma_eps2, int n);

}  // namespace derdose
