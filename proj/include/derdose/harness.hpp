// Monte Carlo engine comparing DR and DER estimators over replicated trials.
#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "derdose/dgp.hpp"
#include "derdose/estimators.hpp"

namespace derdose {

enum class TruthMode { Analytic, Fitted };
enum class PredictionForm { ModelBased, Empirical };

/// Pairwise drops a replication from every statistic of a cell when any
/// estimator in it failed. PerColumn drops it only from the failed
/// estimator's statistics.
enum class ExclusionPolicy { Pairwise, PerColumn };

std::string_view to_string(TruthMode mode);
std::string_view to_string(PredictionForm form);
std::string_view to_string(ExclusionPolicy policy);

/// Stream index reserved for the large reference trial.
inline constexpr std::uint64_t kGoldStreamIndex = ~std::uint64_t{0};
inline constexpr int kGoldSampleSize = 200000;

struct StudySpec {
  // n and rho are overridden per cell.
  ScenarioConfig scenario;
  std::vector<int> n_values{40, 80, 120};
  std::vector<double> rho_values{0.0, 0.3, 0.6, 0.9};
  int n_replications = 10000;
  std::uint64_t master_seed = 123;
  std::vector<Adjustment> adjustments{Adjustment::Unadjusted, Adjustment::Cf};
  Link prediction_link = Link::Probit;
  PredictionForm prediction_form = PredictionForm::ModelBased;
  TruthMode truth_mode = TruthMode::Analytic;
  ExclusionPolicy exclusion = ExclusionPolicy::Pairwise;
  IrlsVariant irls = IrlsVariant::RCompatible;
  // 0 picks std::thread::hardware_concurrency(). Results do not depend on it.
  int workers = 0;

  /// Throws ConfigError when a list is empty, reps < 2, some n is not a
  /// multiple of the grid size, or the scenario is invalid.
  void validate() const;

  GlmOptions glm_options() const {
    return irls == IrlsVariant::RCompatible ? GlmOptions::r_compatible() : GlmOptions{};
  }
};

struct TruthRecord {
  double alpha0 = 0.0;
  double alpha_d = 0.0;
  // Mean response at each dose of the grid.
  Eigen::VectorXd per_dose;
};

/// Reference values for bias. Analytic: exact marginal parameters and
/// Phi-rates. Fitted: a probit DR fit and per-dose response means on one
/// trial of kGoldSampleSize subjects drawn from (seed, kGoldStreamIndex).
/// Throws GoldStandardError if that fit fails.
TruthRecord compute_gold_standard(const ScenarioConfig& cfg, TruthMode mode,
                                  std::uint64_t seed, const GlmOptions& glm = {});

using ParamPair = std::array<double, 2>;

/// Summary of one (n, rho, adjustment) cell. Pairs are (alpha0, alpha_d).
struct AggregateReport {
  int n = 0;
  double rho = 0.0;
  Adjustment adjustment = Adjustment::Cf;

  ParamPair bias_dr{};
  ParamPair bias_der{};
  ParamPair variance_dr{};
  ParamPair variance_der{};
  // variance + bias^2
  ParamPair mse_dr{};
  ParamPair mse_der{};
  ParamPair ratio_variance_vs_dr{};
  ParamPair ratio_mse_vs_dr{};
  // Jackknife standard errors of the ratios above.
  ParamPair ratio_variance_se{};
  ParamPair ratio_mse_se{};
  // Monte Carlo standard errors of the DER bias.
  ParamPair bias_der_se{};

  Eigen::VectorXd per_dose_variance_ratio;
  Eigen::VectorXd per_dose_variance_ratio_se;

  int used_replications = 0;
  int excluded_replications = 0;
  int failed_dr = 0;
  int failed_der = 0;
};

/// Runs every (n, rho, adjustment) cell, ordered by n, then rho, then the
/// order of spec.adjustments. Replication r of every cell draws from stream
/// (master_seed, r), so reports are identical for any worker count.
std::vector<AggregateReport> run_study(const StudySpec& spec);

struct LinearCheckReport {
  int n = 0;
  double rho = 0.0;
  int used_replications = 0;

  double variance_dr = 0.0;
  double variance_der_unadjusted = 0.0;
  double variance_der_cf = 0.0;

  double ratio_unadjusted = 0.0;
  double ratio_unadjusted_se = 0.0;
  double ratio_unadjusted_analytic = 0.0;
  double ratio_cf = 0.0;
  double ratio_cf_se = 0.0;
  double ratio_cf_analytic = 1.0;

  // Large-sample variances from the closed forms.
  double variance_dr_analytic = 0.0;
  double variance_der_unadjusted_analytic = 0.0;
  double variance_der_cf_analytic = 0.0;

  // |der_cf - dr_slope| above identity_tolerance.
  int identity_violations = 0;
  double max_identity_gap = 0.0;
};

inline constexpr double kIdentityTolerance = 1e-10;

/// Continuous-response version of the study: linear DE and ER models, slope
/// estimators compared against the closed-form variances. The scenario's
/// response kind is forced to Continuous.
std::vector<LinearCheckReport> run_linear_check(const StudySpec& spec);

// Statistics helpers, exposed for testing.

/// Sample variance with denominator m - 1.
double sample_variance(const std::vector<double>& x);

/// Leave-one-out jackknife estimate and standard error of var(num) / var(den)
/// over paired samples.
struct JackknifeResult {
  double ratio = 0.0;
  double se = 0.0;
};
JackknifeResult jackknife_variance_ratio(const std::vector<double>& num,
                                         const std::vector<double>& den);

/// Jackknife of (var(num) + bias_num^2) / (var(den) + bias_den^2) where the
/// biases are means of num and den (inputs are errors relative to truth).
JackknifeResult jackknife_mse_ratio(const std::vector<double>& num,
                                    const std::vector<double>& den);

}  // namespace derdose
