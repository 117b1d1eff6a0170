#include <doctest.h>

#include <cmath>

#include "derdose/numerics.hpp"
#include "derdose/regression.hpp"

using namespace derdose;

namespace {

// Newton-Raphson on a two-parameter binary model in long double, written
// without reference to the library: logit has Hessian -sum p(1-p) x x';
// probit uses expected information sum phi^2 / (F(1-F)) x x'.
std::array<long double, 2> newton_oracle(const std::vector<double>& x, const std::vector<double>& y,
                                         bool probit) {
  long double a = 0, b = 0;
  for (int it = 0; it < 200; ++it) {
    long double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const long double eta = a + b * x[i];
      long double mu, dmu;
      if (probit) {
        mu = 0.5L * std::erfc(-eta / std::sqrt(2.0L));
        dmu = std::exp(-0.5L * eta * eta) / std::sqrt(2.0L * 3.14159265358979323846L);
      } else {
        mu = 1.0L / (1.0L + std::exp(-eta));
        dmu = mu * (1 - mu);
      }
      const long double v = mu * (1 - mu);
      const long double r = dmu * (y[i] - mu) / v;
      const long double w = dmu * dmu / v;
      g0 += r;
      g1 += r * x[i];
      h00 += w;
      h01 += w * x[i];
      h11 += w * x[i] * x[i];
    }
    const long double det = h00 * h11 - h01 * h01;
    const long double da = (h11 * g0 - h01 * g1) / det;
    const long double db = (h00 * g1 - h01 * g0) / det;
    a += da;
    b += db;
    if (std::fabs(da) + std::fabs(db) < 1e-18L) break;
  }
  return {a, b};
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

const std::vector<double> kX6{1, 2, 3, 4, 5, 6};
const std::vector<double> kY6{0, 0, 1, 0, 1, 1};

}  // namespace

TEST_CASE("ols matches the 2x2 normal equations") {
  const std::vector<double> x{0.5, 1.0, 2.0, 3.5, 4.0, 6.0, 7.5};
  const std::vector<double> y{1.1, 1.9, 2.7, 5.2, 5.1, 8.3, 9.9};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  const double b0 = (sxx * sy - sx * sxy) / det;
  const double b1 = (n * sxy - sx * sy) / det;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - b0 - b1 * x[i], 2);

  const auto fit = fit_ols(with_intercept(vec(x)), vec(y));
  REQUIRE(fit.ok());
  CHECK(fit.coefficients[0] == doctest::Approx(b0).epsilon(1e-12));
  CHECK(fit.coefficients[1] == doctest::Approx(b1).epsilon(1e-12));
  CHECK(fit.residual_variance == doctest::Approx(rss / (n - 2)).epsilon(1e-12));
  CHECK(std::abs(fit.residuals.sum()) < 1e-12);
}

TEST_CASE("ols is exact on a noiseless line") {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(10, -2.0, 5.0);
  const Eigen::VectorXd y = (3.0 - 0.25 * x.array()).matrix();
  const auto fit = fit_ols(with_intercept(x), y);
  CHECK(fit.coefficients[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(fit.coefficients[1] == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(fit.residual_variance < 1e-28);
}

TEST_CASE("ols flags rank deficiency and bad shapes") {
  const Eigen::VectorXd single = Eigen::VectorXd::Constant(8, 2.0);
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(8, 0.0, 1.0);
  CHECK(fit_ols(with_intercept(single), y).status == FitStatus::RankDeficient);
  CHECK_THROWS_AS(fit_ols(with_intercept(y.head(2)), y.head(2)), std::invalid_argument);
  CHECK_THROWS_AS(fit_ols(with_intercept(y), y.head(5)), std::invalid_argument);
}

TEST_CASE("ols works on float scalars") {
  const Eigen::VectorXf x = Eigen::VectorXf::LinSpaced(6, 1.0f, 6.0f);
  const Eigen::VectorXf y = (2.0f * x.array() + 1.0f).matrix();
  const auto fit = fit_ols(with_intercept(x), y);
  CHECK(fit.coefficients[1] == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("logit and probit fits match a Newton oracle") {
  const auto x = with_intercept(vec(kX6));
  const Eigen::VectorXd y = vec(kY6);
  for (bool probit : {false, true}) {
    const auto ref = newton_oracle(kX6, kY6, probit);
    const Link link = probit ? Link::Probit : Link::Logit;
    // The R-style deviance criterion stops earlier than the coefficient one.
    for (const auto& [opt, tol] : {std::pair{GlmOptions{}, 1e-8},
                                   std::pair{GlmOptions::r_compatible(), 1e-4}}) {
      const auto fit = fit_glm_binary(x, y, link, opt);
      REQUIRE(fit.ok());
      CHECK(fit.converged);
      CHECK(fit.coefficients[0] == doctest::Approx(static_cast<double>(ref[0])).epsilon(tol));
      CHECK(fit.coefficients[1] == doctest::Approx(static_cast<double>(ref[1])).epsilon(tol));
    }
  }
}

TEST_CASE("guarded fit satisfies the score equations") {
  RngStream rng(2024, 0);
  int fitted = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 20 + 5 * (t % 7);
    const Eigen::VectorXd z1 = draw_std_normal(rng, n);
    const Eigen::VectorXd z2 = draw_std_normal(rng, n);
    const Eigen::VectorXd e = draw_std_normal(rng, n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = (0.3 + 0.8 * z1[i] - 0.5 * z2[i] + e[i] > 0) ? 1.0 : 0.0;
    const auto x = with_intercept(z1, z2);
    for (Link link : {Link::Probit, Link::Logit}) {
      const auto fit = fit_glm_binary(x, y, link);
      if (!fit.ok()) continue;
      ++fitted;
      CHECK(binary_score(x, y, fit.coefficients, link).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
  CHECK(fitted >= 180);
}

TEST_CASE("score is the gradient of the log-likelihood") {
  RngStream rng(7, 1);
  const Eigen::VectorXd z = draw_std_normal(rng, 30);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  const auto x = with_intercept(z);
  const Eigen::Vector2d beta(-0.3, 0.7);
  for (Link link : {Link::Probit, Link::Logit}) {
    const Eigen::VectorXd g = binary_score(x, y, beta, link);
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-6;
      Eigen::Vector2d up = beta, dn = beta;
      up[k] += h;
      dn[k] -= h;
      const double fd =
          (binary_log_likelihood(x, y, up, link) - binary_log_likelihood(x, y, dn, link)) / (2 * h);
      CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(1.0, std::abs(g[k])));
    }
  }
}

TEST_CASE("flipping the response negates the coefficients") {
  const auto x = with_intercept(vec(kX6));
  const Eigen::VectorXd y = vec(kY6);
  const Eigen::VectorXd flipped = (1.0 - y.array()).matrix();
  for (Link link : {Link::Probit, Link::Logit}) {
    const auto a = fit_glm_binary(x, y, link);
    const auto b = fit_glm_binary(x, flipped, link);
    CHECK((a.coefficients + b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fits are deterministic") {
  const auto x = with_intercept(vec(kX6));
  const Eigen::VectorXd y = vec(kY6);
  for (const GlmOptions& opt : {GlmOptions{}, GlmOptions::r_compatible()}) {
    const auto a = fit_glm_binary(x, y, Link::Probit, opt);
    const auto b = fit_glm_binary(x, y, Link::Probit, opt);
    CHECK(a.coefficients == b.coefficients);
    CHECK(a.iterations == b.iterations);
  }
}

TEST_CASE("binary fit failure modes") {
  const auto x = with_intercept(vec(kX6));
  SUBCASE("one class") {
    const Eigen::VectorXd y = Eigen::VectorXd::Zero(6);
    CHECK(fit_glm_binary(x, y, Link::Probit).status == FitStatus::OneClassOnly);
    CHECK(fit_glm_binary(x, y, Link::Probit, GlmOptions::r_compatible()).status ==
          FitStatus::OneClassOnly);
  }
  SUBCASE("complete separation") {
    const Eigen::VectorXd y = vec({0, 0, 0, 1, 1, 1});
    CHECK(fit_glm_binary(x, y, Link::Probit).status == FitStatus::Separation);
    CHECK(fit_glm_binary(x, y, Link::Logit).status == FitStatus::Separation);
    // R keeps the diverged estimate and flags fitted probabilities at 0 or 1.
    const auto r = fit_glm_binary(x, y, Link::Probit, GlmOptions::r_compatible());
    CHECK(r.ok());
    CHECK(r.boundary);
    CHECK(r.coefficients[1] > 5.0);
  }
  SUBCASE("collinear design") {
    const Eigen::VectorXd d = vec(kX6);
    const auto xc = with_intercept(d, (2.0 * d).eval());
    const Eigen::VectorXd y = vec(kY6);
    CHECK(fit_glm_binary(xc, y, Link::Probit).status == FitStatus::RankDeficient);
    CHECK(fit_glm_binary(xc, y, Link::Probit, GlmOptions::r_compatible()).status ==
          FitStatus::RankDeficient);
  }
  SUBCASE("iteration limit") {
    GlmOptions opt;
    opt.max_iterations = 1;
    const auto fit = fit_glm_binary(x, vec(kY6), Link::Logit, opt);
    CHECK(fit.status == FitStatus::IterationLimit);
    CHECK_FALSE(fit.converged);
  }
  SUBCASE("non-binary response") {
    CHECK_THROWS_AS(fit_glm_binary(x, vec({0, 1, 2, 0, 1, 0}), Link::Probit),
                    std::invalid_argument);
  }
}

TEST_CASE("status names") {
  CHECK(to_string(FitStatus::Separation) == "separation");
  CHECK(to_string(Link::Logit) == "logit");
  CHECK(to_string(IrlsVariant::RCompatible) == "r-compat");
}
