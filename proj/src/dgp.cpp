#include "derdose/dgp.hpp"

#include <cmath>

#include "derdose/errors.hpp"

namespace derdose {

std::string_view to_string(DgpMode mode) {
  return mode == DgpMode::Code ? "code" : "prose";
}

void ScenarioConfig::validate() const {
  if (dose_levels.size() == 0) throw ConfigError("dose grid is empty");
  if (!dose_levels.allFinite()) throw ConfigError("dose grid has non-finite levels");
  if (n < 1) throw ConfigError("n must be positive");
  if (!(rho >= 0.0)) throw ConfigError("rho must be >= 0");
  if (!(rho < 1.0)) throw ConfigError("rho must be < 1");
  if (!(sigma_eta > 0.0)) throw ConfigError("sigma_eta must be > 0");
  if (!(sigma_eps > 0.0)) throw ConfigError("sigma_eps must be > 0");
  if (!std::isfinite(beta_c) || !std::isfinite(gamma_d) || !std::isfinite(shift)) {
    throw ConfigError("model coefficients must be finite");
  }
}

Eigen::VectorXd scenario_doses(int id) {
  const Eigen::VectorXd base = Eigen::VectorXd::LinSpaced(5, 1.0, 5.0);
  switch (id) {
    case 1:
      return base;
    case 2:
      return base / 1.5;
    default:
      throw UnknownScenario(id);
  }
}

ScenarioConfig scenario_config(int id) {
  ScenarioConfig cfg;
  cfg.dose_levels = scenario_doses(id);
  return cfg;
}

Eigen::VectorXd assign_doses(const Eigen::VectorXd& grid, int n) {
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = grid[i % grid.size()];
  return d;
}

TrialDataset generate_trial(const ScenarioConfig& cfg, RngStream& stream) {
  const Eigen::Index n = cfg.n;
  TrialDataset t;
  t.dose = assign_doses(cfg.dose_levels, cfg.n);
  const Eigen::VectorXd u = draw_std_normal(stream, n);
  const Eigen::VectorXd e_c = draw_std_normal(stream, n);
  const Eigen::VectorXd e_y = draw_std_normal(stream, n);

  Eigen::VectorXd eta;
  Eigen::VectorXd eps;
  double exposure_offset = 0.0;
  double response_offset = 0.0;
  if (cfg.mode == DgpMode::Code) {
    const double a = cfg.rho;
    const double b = std::sqrt(1.0 - a * a);
    eta = cfg.sigma_eta * (a * u + b * e_c);
    eps = a * u + b * e_y;
    exposure_offset = cfg.shift;
  } else {
    const double b = std::sqrt(1.0 - cfg.rho * cfg.rho);
    eta = cfg.sigma_eta * e_c;
    eps = cfg.rho * e_c + b * e_y;
    response_offset = cfg.shift;
  }

  t.exposure = (cfg.gamma_d * t.dose + eta).array() + exposure_offset;
  if (cfg.response == ResponseKind::Binary) {
    const Eigen::ArrayXd latent = response_offset + cfg.beta_c * t.exposure.array() + eps.array();
    t.response = (latent > 0.0).cast<double>().matrix();
  } else {
    t.response = (cfg.beta_c * t.exposure + cfg.sigma_eps * eps).array() + response_offset;
  }
  return t;
}

double latent_noise_covariance(const ScenarioConfig& cfg) {
  return cfg.sigma_eta * latent_noise_correlation(cfg);
}

double latent_noise_correlation(const ScenarioConfig& cfg) {
  return cfg.mode == DgpMode::Code ? cfg.rho * cfg.rho : cfg.rho;
}

MarginalParameters marginal_dr_truth(const ScenarioConfig& cfg) {
  const double var = cfg.beta_c * cfg.beta_c * cfg.sigma_eta * cfg.sigma_eta + 1.0 +
                     2.0 * cfg.beta_c * latent_noise_covariance(cfg);
  const double sd = std::sqrt(var);
  const double intercept = cfg.mode == DgpMode::Code ? cfg.beta_c * cfg.shift : cfg.shift;
  return {intercept / sd, cfg.beta_c * cfg.gamma_d / sd};
}

Eigen::VectorXd marginal_response_rates(const ScenarioConfig& cfg) {
  const MarginalParameters m = marginal_dr_truth(cfg);
  return cfg.dose_levels.unaryExpr(
      [&](double d) { return std_normal_cdf(m.alpha0 + m.alpha_d * d); });
}

}  // namespace derdose
