// Synthetic randomized dose-finding trials with confounded exposure.
#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "derdose/numerics.hpp"

namespace derdose {

/// How the DE/ER noise terms and intercepts are laid out.
///
/// Code: a shared confounder u enters both models with weight rho, giving
/// cor(eta, eps) = rho^2; the intercept offset sits in the exposure model.
/// Prose: eps = rho * e + sqrt(1 - rho^2) * e' with eta = sigma_eta * e, so
/// cor(eta, eps) = rho; the offset sits in the response model.
enum class DgpMode { Code, Prose };

enum class ResponseKind { Binary, Continuous };

std::string_view to_string(DgpMode mode);

struct ScenarioConfig {
  Eigen::VectorXd dose_levels;
  int n = 40;
  double rho = 0.0;
  double beta_c = 1.0;
  double gamma_d = 1.0;
  double shift = -3.0;
  double sigma_eta = 1.0;
  // Scale of the ER noise for continuous responses.
  double sigma_eps = 1.0;
  DgpMode mode = DgpMode::Code;
  ResponseKind response = ResponseKind::Binary;

  /// Throws ConfigError on an empty grid, n < 1, rho outside [0, 1) or a
  /// non-positive noise scale.
  void validate() const;
};

/// One simulated trial: dose, log-exposure and response per subject.
struct TrialDataset {
  Eigen::VectorXd dose;
  Eigen::VectorXd exposure;
  Eigen::VectorXd response;

  Eigen::Index size() const { return dose.size(); }
};

/// Dose grid of a named scenario: 1 -> (1..5), 2 -> (1..5)/1.5.
Eigen::VectorXd scenario_doses(int id);

/// Defaults for a named scenario.
ScenarioConfig scenario_config(int id);

/// Cyclic assignment of the grid to n subjects: grid[i % K].
Eigen::VectorXd assign_doses(const Eigen::VectorXd& grid, int n);

/// Simulates one trial. Draws three length-n normal vectors from `stream` in a
/// fixed order (shared confounder, exposure noise, response noise).
TrialDataset generate_trial(const ScenarioConfig& cfg, RngStream& stream);

/// Covariance between the DE residual eta and the unit-variance ER noise.
double latent_noise_covariance(const ScenarioConfig& cfg);

/// Correlation between eta and the ER noise: rho^2 (code) or rho (prose).
double latent_noise_correlation(const ScenarioConfig& cfg);

struct MarginalParameters {
  double alpha0 = 0.0;
  double alpha_d = 0.0;
};

/// Exact marginal probit DR parameters implied by the DGP.
///
/// The response is 1{lp + beta_c * eta + eps > 0}; integrating eta and eps out
/// divides (alpha0, alpha_d) by sd(beta_c * eta + eps), which grows with the
/// eta/eps covariance.
MarginalParameters marginal_dr_truth(const ScenarioConfig& cfg);

/// Phi(alpha0 + alpha_d * d) at every dose of the grid.
Eigen::VectorXd marginal_response_rates(const ScenarioConfig& cfg);

}  // namespace derdose
