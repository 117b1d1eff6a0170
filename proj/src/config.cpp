#include "derdose/config.hpp"

#include <charconv>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "derdose/errors.hpp"
#include "derdose/report.hpp"

namespace derdose {

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Table:
      return "table";
    case Command::Figure:
      return "figure";
    case Command::LinearCheck:
      return "linear-check";
  }
  return "?";
}

namespace {

template <typename E, std::size_t N>
E lookup(std::string_view s, const std::pair<std::string_view, E> (&table)[N],
         std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  std::string options;
  for (const auto& entry : table) options += (options.empty() ? "" : ", ") + std::string(entry.first);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected " +
                    options + ")");
}

}  // namespace

Command parse_command(std::string_view s) {
  static const std::pair<std::string_view, Command> t[] = {
      {"table", Command::Table}, {"figure", Command::Figure}, {"linear-check", Command::LinearCheck}};
  return lookup(s, t, "command");
}

Link parse_link(std::string_view s) {
  static const std::pair<std::string_view, Link> t[] = {{"probit", Link::Probit},
                                                        {"logit", Link::Logit}};
  return lookup(s, t, "link");
}

PredictionForm parse_form(std::string_view s) {
  static const std::pair<std::string_view, PredictionForm> t[] = {
      {"modelbased", PredictionForm::ModelBased}, {"empirical", PredictionForm::Empirical}};
  return lookup(s, t, "estimator form");
}

TruthMode parse_truth(std::string_view s) {
  static const std::pair<std::string_view, TruthMode> t[] = {{"analytic", TruthMode::Analytic},
                                                             {"fitted", TruthMode::Fitted}};
  return lookup(s, t, "truth mode");
}

DgpMode parse_dgp(std::string_view s) {
  static const std::pair<std::string_view, DgpMode> t[] = {{"code", DgpMode::Code},
                                                           {"prose", DgpMode::Prose}};
  return lookup(s, t, "dgp mode");
}

ExclusionPolicy parse_exclusion(std::string_view s) {
  static const std::pair<std::string_view, ExclusionPolicy> t[] = {
      {"pairwise", ExclusionPolicy::Pairwise}, {"per-column", ExclusionPolicy::PerColumn}};
  return lookup(s, t, "exclusion policy");
}

IrlsVariant parse_irls(std::string_view s) {
  static const std::pair<std::string_view, IrlsVariant> t[] = {
      {"guarded", IrlsVariant::Guarded}, {"r-compat", IrlsVariant::RCompatible}};
  return lookup(s, t, "irls variant");
}

std::vector<Adjustment> parse_adjust(std::string_view s) {
  if (s == "both") return {Adjustment::Unadjusted, Adjustment::Cf};
  if (s == "cf") return {Adjustment::Cf};
  if (s == "unadj") return {Adjustment::Unadjusted};
  if (s == "cf,unadj") return {Adjustment::Cf, Adjustment::Unadjusted};
  throw ConfigError("unknown adjustment '" + std::string(s) + "' (expected both, cf, unadj)");
}

std::string_view adjust_label(const std::vector<Adjustment>& a) {
  if (a.size() == 2) return a[0] == Adjustment::Unadjusted ? "both" : "cf,unadj";
  if (a.size() == 1) return a[0] == Adjustment::Cf ? "cf" : "unadj";
  return "";
}

RunConfig default_run_config(Command command, int scenario_id) {
  RunConfig c;
  c.command = command;
  c.scenario_id = scenario_id;
  c.spec.scenario = scenario_config(scenario_id);
  if (command == Command::Figure) c.spec.n_values = {40, 80};
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

const std::map<std::string, std::vector<std::string>> kKeys{
    {"run", {"command"}},
    {"study",
     {"scenario", "n", "rho", "reps", "seed", "adjust", "link", "form", "truth", "exclusion",
      "irls", "workers"}},
    {"scenario", {"dgp", "beta_c", "gamma_d", "shift", "sigma_eta", "sigma_eps", "doses"}},
};

bool known_key(const std::string& section, const std::string& key) {
  for (const auto& k : kKeys.at(section)) {
    if (k == key) return true;
  }
  return false;
}

// Applies `fn` to the value of `key` if present, turning conversion failures
// into ParseError at the key's line.
template <typename F>
void with(const Section& sec, const std::string& key, F&& fn) {
  const auto it = sec.find(key);
  if (it == sec.end()) return;
  try {
    fn(it->second.value);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(it->second.line, key, e.what());
  }
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& value, Parse&& parse) {
  std::vector<T> out;
  for (const auto& item : split_list(value)) {
    if (item.empty()) throw std::invalid_argument("empty list entry");
    out.push_back(parse(item));
  }
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  std::map<std::string, Section> sections;
  std::string current = "study";
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(lineno, "", "unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      if (!kKeys.count(current)) throw ParseError(lineno, current, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, line, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "", "missing key");
    if (!known_key(current, key)) {
      throw ParseError(lineno, key, "unknown key in [" + current + "]");
    }
    if (value.empty()) throw ParseError(lineno, key, "missing value");
    auto& sec = sections[current];
    if (sec.count(key)) throw ParseError(lineno, key, "repeated key");
    sec[key] = {value, lineno};
  }

  const Section& run = sections["run"];
  const Section& study = sections["study"];
  const Section& scen = sections["scenario"];

  Command command = Command::Table;
  with(run, "command", [&](const std::string& v) { command = parse_command(v); });
  int scenario_id = 1;
  with(study, "scenario", [&](const std::string& v) {
    scenario_id = parse_int(v);
    scenario_doses(scenario_id);
  });

  RunConfig c = default_run_config(command, scenario_id);
  StudySpec& s = c.spec;
  with(study, "n", [&](const std::string& v) { s.n_values = parse_list<int>(v, parse_int); });
  with(study, "rho",
       [&](const std::string& v) { s.rho_values = parse_list<double>(v, parse_double); });
  with(study, "reps", [&](const std::string& v) { s.n_replications = parse_int(v); });
  with(study, "seed", [&](const std::string& v) {
    const auto res = std::from_chars(v.data(), v.data() + v.size(), s.master_seed);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
      throw std::invalid_argument("seed must be a non-negative integer");
    }
  });
  with(study, "adjust", [&](const std::string& v) { s.adjustments = parse_adjust(v); });
  with(study, "link", [&](const std::string& v) { s.prediction_link = parse_link(v); });
  with(study, "form", [&](const std::string& v) { s.prediction_form = parse_form(v); });
  with(study, "truth", [&](const std::string& v) { s.truth_mode = parse_truth(v); });
  with(study, "exclusion", [&](const std::string& v) { s.exclusion = parse_exclusion(v); });
  with(study, "irls", [&](const std::string& v) { s.irls = parse_irls(v); });
  with(study, "workers", [&](const std::string& v) { s.workers = parse_int(v); });

  ScenarioConfig& sc = s.scenario;
  with(scen, "dgp", [&](const std::string& v) { sc.mode = parse_dgp(v); });
  with(scen, "beta_c", [&](const std::string& v) { sc.beta_c = parse_double(v); });
  with(scen, "gamma_d", [&](const std::string& v) { sc.gamma_d = parse_double(v); });
  with(scen, "shift", [&](const std::string& v) { sc.shift = parse_double(v); });
  with(scen, "sigma_eta", [&](const std::string& v) { sc.sigma_eta = parse_double(v); });
  with(scen, "sigma_eps", [&](const std::string& v) { sc.sigma_eps = parse_double(v); });
  with(scen, "doses", [&](const std::string& v) {
    const auto d = parse_list<double>(v, parse_double);
    sc.dose_levels = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
  });

  s.validate();
  return c;
}

std::string format_config(const RunConfig& c) {
  const StudySpec& s = c.spec;
  const ScenarioConfig& sc = s.scenario;
  const auto join = [](const auto& values, auto&& fmt) {
    std::string out;
    for (const auto& v : values) out += (out.empty() ? "" : ", ") + fmt(v);
    return out;
  };
  const auto num = [](double v) { return format_double(v); };
  const auto integer = [](int v) { return std::to_string(v); };

  std::ostringstream o;
  o << "[run]\n";
  o << "command = " << to_string(c.command) << "\n\n";
  o << "[study]\n";
  o << "scenario = " << c.scenario_id << '\n';
  o << "n = " << join(s.n_values, integer) << '\n';
  o << "rho = " << join(s.rho_values, num) << '\n';
  o << "reps = " << s.n_replications << '\n';
  o << "seed = " << s.master_seed << '\n';
  o << "adjust = " << adjust_label(s.adjustments) << '\n';
  o << "link = " << to_string(s.prediction_link) << '\n';
  o << "form = " << to_string(s.prediction_form) << '\n';
  o << "truth = " << to_string(s.truth_mode) << '\n';
  o << "exclusion = " << to_string(s.exclusion) << '\n';
  o << "irls = " << to_string(s.irls) << '\n';
  o << "workers = " << s.workers << "\n\n";
  o << "[scenario]\n";
  o << "dgp = " << to_string(sc.mode) << '\n';
  o << "beta_c = " << num(sc.beta_c) << '\n';
  o << "gamma_d = " << num(sc.gamma_d) << '\n';
  o << "shift = " << num(sc.shift) << '\n';
  o << "sigma_eta = " << num(sc.sigma_eta) << '\n';
  o << "sigma_eps = " << num(sc.sigma_eps) << '\n';
  o << "doses = "
    << join(std::vector<double>(sc.dose_levels.data(), sc.dose_levels.data() + sc.dose_levels.size()),
            num)
    << '\n';
  return o.str();
}

std::string manifest_json(const std::string& command_label, const RunConfig& c,
                          const std::vector<std::string>& outputs) {
  const StudySpec& s = c.spec;
  const ScenarioConfig& sc = s.scenario;
  nlohmann::ordered_json j;
  j["format_version"] = kFormatVersion;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command_label;
  j["outputs"] = outputs;
  j["seed"] = s.master_seed;
  j["labels"] = nlohmann::json::array();
  if (sc.mode == DgpMode::Prose) j["labels"].push_back("prose-dgp");
  auto& spec = j["spec"];
  spec["scenario"] = c.scenario_id;
  spec["n"] = s.n_values;
  spec["rho"] = s.rho_values;
  spec["reps"] = s.n_replications;
  spec["adjust"] = adjust_label(s.adjustments);
  spec["link"] = to_string(s.prediction_link);
  spec["form"] = to_string(s.prediction_form);
  spec["truth"] = to_string(s.truth_mode);
  spec["exclusion"] = to_string(s.exclusion);
  spec["irls"] = to_string(s.irls);
  spec["dgp"] = to_string(sc.mode);
  spec["beta_c"] = sc.beta_c;
  spec["gamma_d"] = sc.gamma_d;
  spec["shift"] = sc.shift;
  spec["sigma_eta"] = sc.sigma_eta;
  spec["sigma_eps"] = sc.sigma_eps;
  spec["doses"] =
      std::vector<double>(sc.dose_levels.data(), sc.dose_levels.data() + sc.dose_levels.size());
  j["resolved_config"] = format_config(c);
  return j.dump(2) + "\n";
}

}  // namespace derdose
