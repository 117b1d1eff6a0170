// CSV tables, figure data and plot scripts built from harness reports.
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "derdose/harness.hpp"

namespace derdose {

/// Shortest-roundtrip is not required; 17 significant digits always recover
/// the double exactly.
std::string format_double(double x);

/// Strict parse of a whole field; throws std::invalid_argument otherwise.
double parse_double(const std::string& field);
int parse_int(const std::string& field);

struct TableRow {
  int n = 0;
  double rho = 0.0;
  bool cf_adjusted = false;
  ParamPair bias_dr{};
  ParamPair bias_der{};
  ParamPair var_dr{};
  ParamPair vratio{};
  ParamPair mseratio{};
  int excluded = 0;
  // Free-form labels joined by ';' (e.g. "not-in-paper", "prose-dgp").
  std::string note;

  bool operator==(const TableRow&) const = default;
};

inline const std::vector<std::string> kTableColumns{
    "n",         "rho",         "cf_adjusted", "bias_dr_a0",  "bias_dr_ad",
    "bias_der_a0", "bias_der_ad", "var_dr_a0",  "var_dr_ad",   "vratio_a0",
    "vratio_ad", "mseratio_a0", "mseratio_ad", "excluded",    "note"};

/// One row per report, in report order. `scenario_id` 1 flags the
/// (120, 0.9, adjusted) row, which has no printed counterpart.
std::vector<TableRow> table_rows(const std::vector<AggregateReport>& reports,
                                 const StudySpec& spec, int scenario_id);

void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows);

/// Throws ParseError on a bad header, field count or number.
std::vector<TableRow> read_table_csv(std::istream& in);

struct FigureRow {
  int n = 0;
  double rho = 0.0;
  bool adjusted = false;
  double dose = 0.0;
  double var_ratio = 0.0;

  bool operator==(const FigureRow&) const = default;
};

inline const std::vector<std::string> kFigureColumns{"n", "rho", "adjusted", "dose",
                                                      "var_ratio"};

/// Per-dose variance ratios of every report, doses in grid order.
std::vector<FigureRow> figure_rows(const std::vector<AggregateReport>& reports,
                                   const Eigen::VectorXd& dose_levels);

void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows);
std::vector<FigureRow> read_figure_csv(std::istream& in);

/// gnuplot script drawing one panel per n from `csv_name`, written to
/// `image_name` as PNG. Adjusted curves are drawn for every rho; unadjusted
/// ones only at rho = 0, where they are unbiased.
std::string gnuplot_script(const std::vector<FigureRow>& rows, const std::string& csv_name,
                           const std::string& image_name, const std::string& title);

inline const std::vector<std::string> kLinearColumns{
    "n",           "rho",         "reps_used",       "var_dr",          "var_der_unadj",
    "var_der_cf",  "vratio_unadj", "vratio_unadj_se", "vratio_unadj_eq", "vratio_cf",
    "vratio_cf_se", "vratio_cf_eq", "max_identity_gap", "identity_violations"};

void write_linear_csv(std::ostream& out, const std::vector<LinearCheckReport>& reports);

}  // namespace derdose
