// Run configuration files and output manifests.
#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "derdose/harness.hpp"

namespace derdose {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kArtifactVersion = "derdose 1.0.0";

enum class Command { Table, Figure, LinearCheck };

std::string_view to_string(Command command);

// Inverses of the to_string functions; throw ConfigError on unknown names.
Command parse_command(std::string_view s);
Link parse_link(std::string_view s);
PredictionForm parse_form(std::string_view s);
TruthMode parse_truth(std::string_view s);
DgpMode parse_dgp(std::string_view s);
ExclusionPolicy parse_exclusion(std::string_view s);
IrlsVariant parse_irls(std::string_view s);
/// "both" -> {Unadjusted, Cf}; "cf"; "unadj".
std::vector<Adjustment> parse_adjust(std::string_view s);
std::string_view adjust_label(const std::vector<Adjustment>& adjustments);

struct RunConfig {
  Command command = Command::Table;
  int scenario_id = 1;
  StudySpec spec;
};

/// Defaults for a command on a named scenario. Figures default to n = 40, 80.
RunConfig default_run_config(Command command, int scenario_id);

/// Flat key = value text. '#' starts a comment. Sections:
///
///   [run]       command = table | figure | linear-check
///   [study]     scenario, n, rho (comma lists), reps, seed, adjust
///               (both | cf | unadj), link, form, truth, exclusion, irls, workers
///   [scenario]  dgp (code | prose), beta_c, gamma_d, shift, sigma_eta,
///               sigma_eps, doses (comma list)
///
/// Keys before any section header belong to [study]. Anything not given
/// keeps its default. Throws ParseError for syntax errors and unknown or
/// repeated keys; ConfigError when the resolved study is invalid.
RunConfig parse_config(std::istream& in);

/// Every field written out, so parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& config);

/// JSON manifest: format and artifact versions, command label, output files,
/// seed and the resolved config.
std::string manifest_json(const std::string& command_label, const RunConfig& config,
                          const std::vector<std::string>& outputs);

}  // namespace derdose
