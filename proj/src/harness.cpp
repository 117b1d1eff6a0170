#include "derdose/harness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <thread>

#include "derdose/errors.hpp"

namespace derdose {

std::string_view to_string(TruthMode mode) {
  return mode == TruthMode::Analytic ? "analytic" : "fitted";
}

std::string_view to_string(PredictionForm form) {
  return form == PredictionForm::ModelBased ? "modelbased" : "empirical";
}

std::string_view to_string(ExclusionPolicy policy) {
  return policy == ExclusionPolicy::Pairwise ? "pairwise" : "per-column";
}

void StudySpec::validate() const {
  scenario.validate();
  if (n_values.empty()) throw ConfigError("n list is empty");
  if (rho_values.empty()) throw ConfigError("rho list is empty");
  if (adjustments.empty()) throw ConfigError("adjustment list is empty");
  if (n_replications < 2) throw ConfigError("reps must be >= 2");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  const auto k = static_cast<int>(scenario.dose_levels.size());
  for (int n : n_values) {
    if (n <= 3) throw ConfigError("n must be > 3, got " + std::to_string(n));
    if (n % k != 0) {
      throw ConfigError("n = " + std::to_string(n) + " is not a multiple of the " +
                        std::to_string(k) + "-level dose grid");
    }
  }
  for (double rho : rho_values) {
    ScenarioConfig probe = scenario;
    probe.rho = rho;
    probe.validate();
  }
}

TruthRecord compute_gold_standard(const ScenarioConfig& cfg, TruthMode mode,
                                  std::uint64_t seed, const GlmOptions& glm) {
  TruthRecord truth;
  if (mode == TruthMode::Analytic) {
    const MarginalParameters m = marginal_dr_truth(cfg);
    truth.alpha0 = m.alpha0;
    truth.alpha_d = m.alpha_d;
    truth.per_dose = marginal_response_rates(cfg);
    return truth;
  }

  ScenarioConfig big = cfg;
  big.n = kGoldSampleSize;
  big.response = ResponseKind::Binary;
  RngStream stream(seed, kGoldStreamIndex);
  const TrialDataset data = generate_trial(big, stream);
  const MarginalDrEstimate dr = estimate_dr(data, glm);
  if (!dr.valid) throw GoldStandardError("reference probit fit failed at n = 200000");
  truth.alpha0 = dr.alpha0;
  truth.alpha_d = dr.alpha_d;

  const Eigen::Index k = cfg.dose_levels.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    sum[i % k] += data.response[i];
    count[i % k] += 1.0;
  }
  truth.per_dose = sum.cwiseQuotient(count);
  return truth;
}

double sample_variance(const std::vector<double>& x) {
  const auto m = static_cast<double>(x.size());
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= m;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / (m - 1.0);
}

namespace {

// Leave-one-out means and variances of x, computed from centered sums.
struct LeaveOneOut {
  std::vector<double> mean;
  std::vector<double> variance;
};

LeaveOneOut leave_one_out(const std::vector<double>& x) {
  const std::size_t m = x.size();
  double c = 0.0;
  for (double v : x) c += v;
  c /= static_cast<double>(m);
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : x) {
    s1 += v - c;
    s2 += (v - c) * (v - c);
  }
  LeaveOneOut out;
  out.mean.resize(m);
  out.variance.resize(m);
  const double k = static_cast<double>(m) - 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = x[i] - c;
    const double mi = (s1 - xi) / k;
    out.mean[i] = mi + c;
    out.variance[i] = (s2 - xi * xi - k * mi * mi) / (k - 1.0);
  }
  return out;
}

double jackknife_se(const std::vector<double>& theta) {
  const auto m = static_cast<double>(theta.size());
  double mean = 0.0;
  for (double t : theta) mean += t;
  mean /= m;
  double ss = 0.0;
  for (double t : theta) ss += (t - mean) * (t - mean);
  return std::sqrt((m - 1.0) / m * ss);
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace

JackknifeResult jackknife_variance_ratio(const std::vector<double>& num,
                                         const std::vector<double>& den) {
  JackknifeResult r;
  r.ratio = sample_variance(num) / sample_variance(den);
  if (num.size() < 3) return r;
  const LeaveOneOut a = leave_one_out(num);
  const LeaveOneOut b = leave_one_out(den);
  std::vector<double> theta(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) theta[i] = a.variance[i] / b.variance[i];
  r.se = jackknife_se(theta);
  return r;
}

JackknifeResult jackknife_mse_ratio(const std::vector<double>& num,
                                    const std::vector<double>& den) {
  JackknifeResult r;
  const double bn = mean_of(num);
  const double bd = mean_of(den);
  r.ratio = (sample_variance(num) + bn * bn) / (sample_variance(den) + bd * bd);
  if (num.size() < 3) return r;
  const LeaveOneOut a = leave_one_out(num);
  const LeaveOneOut b = leave_one_out(den);
  std::vector<double> theta(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) {
    theta[i] = (a.variance[i] + a.mean[i] * a.mean[i]) / (b.variance[i] + b.mean[i] * b.mean[i]);
  }
  r.se = jackknife_se(theta);
  return r;
}

namespace {

int resolve_workers(int requested, int reps) {
  int w = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  return std::clamp(w, 1, std::max(1, reps));
}

// Runs body(r) for r in [0, reps) over contiguous chunks, one per worker.
void parallel_for(int reps, int workers, const std::function<void(int)>& body) {
  if (workers <= 1) {
    for (int r = 0; r < reps; ++r) body(r);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      const int lo = static_cast<int>(static_cast<long long>(reps) * w / workers);
      const int hi = static_cast<int>(static_cast<long long>(reps) * (w + 1) / workers);
      pool.emplace_back([&, w, lo, hi] {
        try {
          for (int r = lo; r < hi; ++r) body(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Replicate {
  bool dr_ok = false;
  ParamPair dr{};
  Eigen::VectorXd dr_pred;
  std::vector<char> der_ok;
  std::vector<ParamPair> der;
  std::vector<Eigen::VectorXd> der_pred;
};

Eigen::VectorXd modelbased_curve(const MarginalDrEstimate& est, const Eigen::VectorXd& grid) {
  return grid.unaryExpr([&](double d) { return predict_response_modelbased(est, d); });
}

Replicate simulate_replicate(const StudySpec& spec, const ScenarioConfig& cfg, int r) {
  RngStream stream(spec.master_seed, static_cast<std::uint64_t>(r));
  const TrialDataset data = generate_trial(cfg, stream);
  const Eigen::VectorXd& grid = cfg.dose_levels;

  const GlmOptions glm = spec.glm_options();
  Replicate rep;
  const MarginalDrEstimate dr = estimate_dr(data, glm);
  rep.dr_ok = dr.valid;
  if (dr.valid) {
    rep.dr = {dr.alpha0, dr.alpha_d};
    rep.dr_pred = modelbased_curve(dr, grid);
  }

  const std::size_t a = spec.adjustments.size();
  rep.der_ok.assign(a, 0);
  rep.der.assign(a, ParamPair{});
  rep.der_pred.assign(a, Eigen::VectorXd());
  for (std::size_t j = 0; j < a; ++j) {
    const CfFitBundle bundle = fit_der_bundle(data, spec.adjustments[j], Link::Probit, glm);
    const MarginalDrEstimate est = convert_to_marginal(bundle);
    if (!est.valid) continue;
    rep.der[j] = {est.alpha0, est.alpha_d};
    if (spec.prediction_form == PredictionForm::ModelBased) {
      rep.der_pred[j] = modelbased_curve(est, grid);
    } else if (spec.prediction_link == Link::Probit) {
      rep.der_pred[j] = predict_response_empirical(bundle, grid);
    } else {
      const CfFitBundle logit = fit_der_bundle(data, spec.adjustments[j], Link::Logit, glm);
      if (!logit.valid()) continue;
      rep.der_pred[j] = predict_response_empirical(logit, grid);
    }
    rep.der_ok[j] = 1;
  }
  return rep;
}

AggregateReport aggregate(const std::vector<Replicate>& reps, std::size_t j,
                          const TruthRecord& truth, ExclusionPolicy policy) {
  AggregateReport out;
  const Eigen::Index k = truth.per_dose.size();
  const ParamPair target{truth.alpha0, truth.alpha_d};

  std::vector<std::size_t> both;
  std::vector<std::size_t> dr_rows;
  std::vector<std::size_t> der_rows;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const bool d = reps[r].dr_ok;
    const bool e = reps[r].der_ok[j] != 0;
    if (d) dr_rows.push_back(r);
    if (e) der_rows.push_back(r);
    if (d && e) both.push_back(r);
    out.failed_dr += d ? 0 : 1;
    out.failed_der += e ? 0 : 1;
  }
  out.used_replications = static_cast<int>(both.size());
  out.excluded_replications = static_cast<int>(reps.size() - both.size());
  if (policy == ExclusionPolicy::Pairwise) {
    dr_rows = both;
    der_rows = both;
  }

  const auto errors = [&](const std::vector<std::size_t>& rows, bool der, int p) {
    std::vector<double> e;
    e.reserve(rows.size());
    for (std::size_t r : rows) e.push_back((der ? reps[r].der[j][p] : reps[r].dr[p]) - target[p]);
    return e;
  };

  for (int p = 0; p < 2; ++p) {
    const std::vector<double> e_dr = errors(dr_rows, false, p);
    const std::vector<double> e_der = errors(der_rows, true, p);
    out.bias_dr[p] = mean_of(e_dr);
    out.bias_der[p] = mean_of(e_der);
    out.variance_dr[p] = sample_variance(e_dr);
    out.variance_der[p] = sample_variance(e_der);
    out.mse_dr[p] = out.variance_dr[p] + out.bias_dr[p] * out.bias_dr[p];
    out.mse_der[p] = out.variance_der[p] + out.bias_der[p] * out.bias_der[p];
    out.ratio_variance_vs_dr[p] = out.variance_der[p] / out.variance_dr[p];
    out.ratio_mse_vs_dr[p] = out.mse_der[p] / out.mse_dr[p];
    out.bias_der_se[p] = std::sqrt(out.variance_der[p] / static_cast<double>(e_der.size()));

    const std::vector<double> pn = errors(both, true, p);
    const std::vector<double> pd = errors(both, false, p);
    out.ratio_variance_se[p] = jackknife_variance_ratio(pn, pd).se;
    out.ratio_mse_se[p] = jackknife_mse_ratio(pn, pd).se;
  }

  out.per_dose_variance_ratio.resize(k);
  out.per_dose_variance_ratio_se.resize(k);
  for (Eigen::Index d = 0; d < k; ++d) {
    const auto preds = [&](const std::vector<std::size_t>& rows, bool der) {
      std::vector<double> v;
      v.reserve(rows.size());
      for (std::size_t r : rows) v.push_back(der ? reps[r].der_pred[j][d] : reps[r].dr_pred[d]);
      return v;
    };
    out.per_dose_variance_ratio[d] =
        sample_variance(preds(der_rows, true)) / sample_variance(preds(dr_rows, false));
    out.per_dose_variance_ratio_se[d] =
        jackknife_variance_ratio(preds(both, true), preds(both, false)).se;
  }
  return out;
}

}  // namespace

std::vector<AggregateReport> run_study(const StudySpec& spec) {
  spec.validate();
  const int workers = resolve_workers(spec.workers, spec.n_replications);
  std::map<double, TruthRecord> truths;
  std::vector<AggregateReport> reports;
  for (int n : spec.n_values) {
    for (double rho : spec.rho_values) {
      ScenarioConfig cfg = spec.scenario;
      cfg.n = n;
      cfg.rho = rho;
      cfg.response = ResponseKind::Binary;
      auto it = truths.find(rho);
      if (it == truths.end()) {
        it = truths.emplace(rho, compute_gold_standard(cfg, spec.truth_mode, spec.master_seed,
                                                          spec.glm_options())).first;
      }

      std::vector<Replicate> reps(spec.n_replications);
      parallel_for(spec.n_replications, workers,
                   [&](int r) { reps[r] = simulate_replicate(spec, cfg, r); });

      for (std::size_t j = 0; j < spec.adjustments.size(); ++j) {
        AggregateReport rep = aggregate(reps, j, it->second, spec.exclusion);
        rep.n = n;
        rep.rho = rho;
        rep.adjustment = spec.adjustments[j];
        reports.push_back(std::move(rep));
      }
    }
  }
  return reports;
}

std::vector<LinearCheckReport> run_linear_check(const StudySpec& spec) {
  spec.validate();
  const int workers = resolve_workers(spec.workers, spec.n_replications);
  const ScenarioConfig& base = spec.scenario;
  const Eigen::VectorXd& grid = base.dose_levels;
  const double sigma_d2 = (grid.array() - grid.mean()).square().mean();
  const double sigma_eta2 = base.sigma_eta * base.sigma_eta;
  const double sigma_eps2 = base.sigma_eps * base.sigma_eps;

  std::vector<LinearCheckReport> reports;
  for (int n : spec.n_values) {
    for (double rho : spec.rho_values) {
      ScenarioConfig cfg = base;
      cfg.n = n;
      cfg.rho = rho;
      cfg.response = ResponseKind::Continuous;

      std::vector<LinearEstimates> est(spec.n_replications);
      parallel_for(spec.n_replications, workers, [&](int r) {
        RngStream stream(spec.master_seed, static_cast<std::uint64_t>(r));
        est[r] = estimate_linear(generate_trial(cfg, stream));
      });

      LinearCheckReport rep;
      rep.n = n;
      rep.rho = rho;
      std::vector<double> dr;
      std::vector<double> unadj;
      std::vector<double> cf;
      for (const LinearEstimates& e : est) {
        if (!e.valid) continue;
        dr.push_back(e.dr_slope);
        unadj.push_back(e.der_unadjusted);
        cf.push_back(e.der_cf);
        const double gap = std::abs(e.der_cf - e.dr_slope);
        rep.max_identity_gap = std::max(rep.max_identity_gap, gap);
        if (gap > kIdentityTolerance) ++rep.identity_violations;
      }
      rep.used_replications = static_cast<int>(dr.size());
      rep.variance_dr = sample_variance(dr);
      rep.variance_der_unadjusted = sample_variance(unadj);
      rep.variance_der_cf = sample_variance(cf);
      const JackknifeResult ju = jackknife_variance_ratio(unadj, dr);
      const JackknifeResult jc = jackknife_variance_ratio(cf, dr);
      rep.ratio_unadjusted = ju.ratio;
      rep.ratio_unadjusted_se = ju.se;
      rep.ratio_cf = jc.ratio;
      rep.ratio_cf_se = jc.se;
      rep.ratio_unadjusted_analytic = linear_variance_ratio_unadjusted(
          cfg.beta_c, cfg.gamma_d, sigma_d2, sigma_eta2, sigma_eps2);
      rep.ratio_cf_analytic = linear_variance_ratio_cf();
      rep.variance_dr_analytic =
          linear_dr_slope_variance(cfg.beta_c, sigma_d2, sigma_eta2, sigma_eps2, n);
      rep.variance_der_unadjusted_analytic = linear_der_product_variance(
          cfg.beta_c, cfg.gamma_d, sigma_d2, sigma_eta2, sigma_eps2, n);
      rep.variance_der_cf_analytic =
          linear_der_cf_variance(cfg.beta_c, cfg.gamma_d, sigma_d2, sigma_eta2, sigma_eps2, n);
      reports.push_back(rep);
    }
  }
  return reports;
}

}  // namespace derdose
