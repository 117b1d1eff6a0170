// derdose: Monte Carlo comparison of DR and DER dose-response estimators.
//
// Exit codes: 0 success, 2 configuration error, 3 reference fit failure,
// 4 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "derdose/config.hpp"
#include "derdose/errors.hpp"
#include "derdose/harness.hpp"
#include "derdose/report.hpp"

namespace fs = std::filesystem;
using namespace derdose;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitGold = 3;
constexpr int kExitIo = 4;

struct Overrides {
  int scenario = 1;
  std::vector<int> n;
  std::vector<double> rho;
  int reps = 0;
  std::uint64_t seed = 0;
  std::string adjust;
  std::string link;
  std::string form;
  std::string truth;
  std::string dgp;
  std::string exclusion;
  std::string irls;
  int workers = -1;
};

struct Output {
  std::string dir = "out";
  bool force = false;
};

void add_study_options(CLI::App* cmd, Overrides& o, bool figure) {
  cmd->add_option("--scenario", o.scenario, "Named scenario (1 or 2)")->check(CLI::IsMember({1, 2}));
  cmd->add_option("--n", o.n, "Sample size; repeat for several")->take_all();
  cmd->add_option("--rho", o.rho, "Confounding level; repeat for several")->take_all();
  cmd->add_option("--reps", o.reps, "Replications per cell");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--adjust", o.adjust, "both, cf or unadj");
  cmd->add_option("--truth", o.truth, "analytic or fitted");
  cmd->add_option("--dgp", o.dgp, "code or prose");
  cmd->add_option("--exclusion", o.exclusion, "pairwise or per-column");
  cmd->add_option("--fit", o.irls, "IRLS variant: r-compat or guarded");
  cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  if (figure) {
    cmd->add_option("--link", o.link, "ER link for empirical predictions: probit or logit");
    cmd->add_option("--form", o.form, "modelbased or empirical");
  }
}

void add_output_options(CLI::App* cmd, Output& out) {
  cmd->add_option("--out", out.dir, "Output directory");
  cmd->add_flag("--force", out.force, "Overwrite existing outputs");
}

RunConfig resolve(Command command, const Overrides& o, bool n_given, bool rho_given,
                  bool seed_given) {
  RunConfig c = default_run_config(command, o.scenario);
  StudySpec& s = c.spec;
  if (n_given) s.n_values = o.n;
  if (rho_given) s.rho_values = o.rho;
  if (o.reps != 0) s.n_replications = o.reps;
  if (seed_given) s.master_seed = o.seed;
  if (!o.adjust.empty()) s.adjustments = parse_adjust(o.adjust);
  if (!o.link.empty()) s.prediction_link = parse_link(o.link);
  if (!o.form.empty()) s.prediction_form = parse_form(o.form);
  if (!o.truth.empty()) s.truth_mode = parse_truth(o.truth);
  if (!o.dgp.empty()) s.scenario.mode = parse_dgp(o.dgp);
  if (!o.exclusion.empty()) s.exclusion = parse_exclusion(o.exclusion);
  if (!o.irls.empty()) s.irls = parse_irls(o.irls);
  if (o.workers >= 0) s.workers = o.workers;
  if (s.prediction_link == Link::Logit && s.prediction_form == PredictionForm::ModelBased) {
    throw ConfigError("the logit link needs --form empirical");
  }
  s.validate();
  return c;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw IoError("failed writing " + path.string());
}

void prepare_dir(const fs::path& dir, const std::vector<std::string>& files, bool force) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (force) return;
  for (const auto& name : files) {
    if (fs::exists(dir / name)) {
      throw IoError((dir / name).string() + " exists; pass --force to overwrite");
    }
  }
}

std::string scenario_tag(const RunConfig& c) {
  return "s" + std::to_string(c.scenario_id);
}

std::string dgp_suffix(const RunConfig& c) {
  return c.spec.scenario.mode == DgpMode::Prose ? "_prose-dgp" : "";
}

void print_table(const std::vector<AggregateReport>& reports) {
  std::printf("%5s %5s %5s %9s %9s %9s %9s %15s %15s %15s %15s %6s\n", "n", "rho", "adj",
              "bDR_a0", "bDR_ad", "bDER_a0", "bDER_ad", "V_a0 (se)", "V_ad (se)", "M_a0 (se)",
              "M_ad (se)", "excl");
  for (const AggregateReport& r : reports) {
    std::printf("%5d %5.2f %5s %9.3f %9.3f %9.3f %9.3f %7.3f (%5.3f) %7.3f (%5.3f) %7.3f (%5.3f) "
                "%7.3f (%5.3f) %6d\n",
                r.n, r.rho, r.adjustment == Adjustment::Cf ? "Yes" : "No", r.bias_dr[0],
                r.bias_dr[1], r.bias_der[0], r.bias_der[1], r.ratio_variance_vs_dr[0],
                r.ratio_variance_se[0], r.ratio_variance_vs_dr[1], r.ratio_variance_se[1],
                r.ratio_mse_vs_dr[0], r.ratio_mse_se[0], r.ratio_mse_vs_dr[1], r.ratio_mse_se[1],
                r.excluded_replications);
  }
}

void print_figure(const std::vector<AggregateReport>& reports) {
  for (const AggregateReport& r : reports) {
    std::printf("n=%-4d rho=%-4.2f %-5s", r.n, r.rho,
                r.adjustment == Adjustment::Cf ? "cf" : "unadj");
    for (Eigen::Index k = 0; k < r.per_dose_variance_ratio.size(); ++k) {
      std::printf("  %.3f (%.3f)", r.per_dose_variance_ratio[k], r.per_dose_variance_ratio_se[k]);
    }
    std::printf("\n");
  }
}

void print_linear(const std::vector<LinearCheckReport>& reports) {
  for (const LinearCheckReport& r : reports) {
    std::printf("n=%-4d rho=%-4.2f unadj %.4f (se %.4f, closed form %.4f)  cf %.6f (se %.1e, "
                "closed form %.1f)  max |cf - dr| %.2e\n",
                r.n, r.rho, r.ratio_unadjusted, r.ratio_unadjusted_se, r.ratio_unadjusted_analytic,
                r.ratio_cf, r.ratio_cf_se, r.ratio_cf_analytic, r.max_identity_gap);
  }
}

void execute(const RunConfig& c, const std::string& label, const Output& out) {
  const fs::path dir(out.dir);
  std::vector<std::string> files;
  std::string data_name;
  std::string plot_name;
  switch (c.command) {
    case Command::Table:
      data_name = "table" + std::to_string(c.scenario_id) + dgp_suffix(c) + ".csv";
      break;
    case Command::Figure:
      data_name = "figure_" + scenario_tag(c) + "_" + std::string(to_string(c.spec.prediction_link)) +
                  "_" + std::string(to_string(c.spec.prediction_form)) + dgp_suffix(c) + ".csv";
      plot_name = fs::path(data_name).replace_extension(".gp").string();
      break;
    case Command::LinearCheck:
      data_name = "linear_check_" + scenario_tag(c) + ".csv";
      break;
  }
  files.push_back(data_name);
  if (!plot_name.empty()) files.push_back(plot_name);
  files.push_back("manifest.json");
  files.push_back("resolved.cfg");
  prepare_dir(dir, files, out.force);

  std::ostringstream data;
  if (c.command == Command::LinearCheck) {
    const auto reports = run_linear_check(c.spec);
    print_linear(reports);
    write_linear_csv(data, reports);
  } else {
    const auto reports = run_study(c.spec);
    if (c.command == Command::Table) {
      print_table(reports);
      write_table_csv(data, table_rows(reports, c.spec, c.scenario_id));
    } else {
      print_figure(reports);
      const auto rows = figure_rows(reports, c.spec.scenario.dose_levels);
      write_figure_csv(data, rows);
      const std::string image = fs::path(data_name).replace_extension(".png").string();
      const std::string title = "Scenario " + std::to_string(c.scenario_id) + ", " +
                                std::string(to_string(c.spec.prediction_link)) + " " +
                                std::string(to_string(c.spec.prediction_form)) +
                                (c.spec.scenario.mode == DgpMode::Prose ? " (prose-dgp)" : "");
      write_file(dir / plot_name, gnuplot_script(rows, data_name, image, title));
    }
  }
  write_file(dir / data_name, data.str());
  write_file(dir / "resolved.cfg", format_config(c));
  write_file(dir / "manifest.json", manifest_json(label, c, files));
  std::printf("wrote %s\n", (dir / data_name).string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dose-response estimation by DR and DER (dose-exposure-response) models"};
  app.require_subcommand(1);

  Overrides table_o, figure_o, linear_o;
  Output table_out, figure_out, linear_out, custom_out;
  std::string config_path;

  auto* table = app.add_subcommand("table", "Bias, variance and MSE table for a scenario");
  add_study_options(table, table_o, false);
  add_output_options(table, table_out);

  auto* figure = app.add_subcommand("figure", "Per-dose variance ratios and a plot script");
  add_study_options(figure, figure_o, true);
  add_output_options(figure, figure_out);

  auto* linear = app.add_subcommand("linear-check", "Linear DE/ER models against closed forms");
  add_study_options(linear, linear_o, false);
  add_output_options(linear, linear_out);

  auto* custom = app.add_subcommand("custom", "Run a study described by a config file");
  custom->add_option("config", config_path, "Config file")->required();
  add_output_options(custom, custom_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
    if (table->parsed()) {
      const RunConfig c = resolve(Command::Table, table_o, given(table, "--n"),
                                  given(table, "--rho"), given(table, "--seed"));
      execute(c, "table" + std::to_string(c.scenario_id), table_out);
    } else if (figure->parsed()) {
      const RunConfig c = resolve(Command::Figure, figure_o, given(figure, "--n"),
                                  given(figure, "--rho"), given(figure, "--seed"));
      execute(c, "figure", figure_out);
    } else if (linear->parsed()) {
      const RunConfig c = resolve(Command::LinearCheck, linear_o, given(linear, "--n"),
                                  given(linear, "--rho"), given(linear, "--seed"));
      execute(c, "linear-check", linear_out);
    } else {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot read " + config_path);
      execute(parse_config(in), "custom", custom_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GoldStandardError& e) {
    std::cerr << "reference fit failed: " << e.what() << '\n';
    return kExitGold;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  }
  return 0;
}
