#include "derdose/report.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "derdose/errors.hpp"

namespace derdose {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw std::invalid_argument("not a number: '" + field + "'");
  }
  return v;
}

int parse_int(const std::string& field) {
  int v = 0;
  const char* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw std::invalid_argument("not an integer: '" + field + "'");
  }
  return v;
}

namespace {

std::string join_note(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ';';
    out += p;
  }
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
}

// Reads the header and every data row; rows are checked for field count.
std::vector<std::vector<std::string>> read_rows(std::istream& in,
                                                const std::vector<std::string>& columns) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "", "missing header");
  const auto header = split(line, ',');
  if (header != columns) throw ParseError(1, "", "unexpected header '" + line + "'");
  std::vector<std::vector<std::string>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split(line, ',');
    if (fields.size() != columns.size()) {
      throw ParseError(lineno, "", "expected " + std::to_string(columns.size()) + " fields, got " +
                                       std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

template <typename F>
auto field_or_throw(int line, const std::string& name, F&& parse) {
  try {
    return parse();
  } catch (const std::invalid_argument& e) {
    throw ParseError(line, name, e.what());
  }
}

std::string short_number(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

bool parse_flag(const std::string& s) {
  if (s == "1") return true;
  if (s == "0") return false;
  throw std::invalid_argument("expected 0 or 1, got '" + s + "'");
}

}  // namespace

std::vector<TableRow> table_rows(const std::vector<AggregateReport>& reports,
                                 const StudySpec& spec, int scenario_id) {
  std::vector<TableRow> rows;
  rows.reserve(reports.size());
  for (const AggregateReport& r : reports) {
    TableRow t;
    t.n = r.n;
    t.rho = r.rho;
    t.cf_adjusted = r.adjustment == Adjustment::Cf;
    t.bias_dr = r.bias_dr;
    t.bias_der = r.bias_der;
    t.var_dr = r.variance_dr;
    t.vratio = r.ratio_variance_vs_dr;
    t.mseratio = r.ratio_mse_vs_dr;
    t.excluded = r.excluded_replications;
    std::vector<std::string> note;
    if (scenario_id == 1 && t.n == 120 && t.rho == 0.9 && t.cf_adjusted) {
      note.emplace_back("not-in-paper");
    }
    if (spec.scenario.mode == DgpMode::Prose) note.emplace_back("prose-dgp");
    t.note = join_note(note);
    rows.push_back(std::move(t));
  }
  return rows;
}

void write_table_csv(std::ostream& out, const std::vector<TableRow>& rows) {
  write_header(out, kTableColumns);
  for (const TableRow& t : rows) {
    out << t.n << ',' << format_double(t.rho) << ',' << (t.cf_adjusted ? 1 : 0);
    for (const ParamPair* p : {&t.bias_dr, &t.bias_der, &t.var_dr, &t.vratio, &t.mseratio}) {
      out << ',' << format_double((*p)[0]) << ',' << format_double((*p)[1]);
    }
    out << ',' << t.excluded << ',' << t.note << '\n';
  }
  if (!out) throw IoError("failed writing table CSV");
}

std::vector<TableRow> read_table_csv(std::istream& in) {
  std::vector<TableRow> rows;
  int line = 1;
  for (const auto& f : read_rows(in, kTableColumns)) {
    ++line;
    TableRow t;
    std::size_t i = 0;
    const auto num = [&](double& dst) {
      const std::size_t k = i++;
      dst = field_or_throw(line, kTableColumns[k], [&] { return parse_double(f[k]); });
    };
    t.n = field_or_throw(line, "n", [&] { return parse_int(f[0]); });
    i = 1;
    num(t.rho);
    t.cf_adjusted = field_or_throw(line, "cf_adjusted", [&] { return parse_flag(f[2]); });
    i = 3;
    for (ParamPair* p : {&t.bias_dr, &t.bias_der, &t.var_dr, &t.vratio, &t.mseratio}) {
      num((*p)[0]);
      num((*p)[1]);
    }
    t.excluded = field_or_throw(line, "excluded", [&] { return parse_int(f[13]); });
    t.note = f[14];
    rows.push_back(std::move(t));
  }
  return rows;
}

std::vector<FigureRow> figure_rows(const std::vector<AggregateReport>& reports,
                                   const Eigen::VectorXd& dose_levels) {
  std::vector<FigureRow> rows;
  for (const AggregateReport& r : reports) {
    for (Eigen::Index k = 0; k < r.per_dose_variance_ratio.size(); ++k) {
      rows.push_back({r.n, r.rho, r.adjustment == Adjustment::Cf, dose_levels[k],
                      r.per_dose_variance_ratio[k]});
    }
  }
  return rows;
}

void write_figure_csv(std::ostream& out, const std::vector<FigureRow>& rows) {
  write_header(out, kFigureColumns);
  for (const FigureRow& f : rows) {
    out << f.n << ',' << format_double(f.rho) << ',' << (f.adjusted ? 1 : 0) << ','
        << format_double(f.dose) << ',' << format_double(f.var_ratio) << '\n';
  }
  if (!out) throw IoError("failed writing figure CSV");
}

std::vector<FigureRow> read_figure_csv(std::istream& in) {
  std::vector<FigureRow> rows;
  int line = 1;
  for (const auto& f : read_rows(in, kFigureColumns)) {
    ++line;
    FigureRow r;
    r.n = field_or_throw(line, "n", [&] { return parse_int(f[0]); });
    r.rho = field_or_throw(line, "rho", [&] { return parse_double(f[1]); });
    r.adjusted = field_or_throw(line, "adjusted", [&] { return parse_flag(f[2]); });
    r.dose = field_or_throw(line, "dose", [&] { return parse_double(f[3]); });
    r.var_ratio = field_or_throw(line, "var_ratio", [&] { return parse_double(f[4]); });
    rows.push_back(r);
  }
  return rows;
}

void write_linear_csv(std::ostream& out, const std::vector<LinearCheckReport>& reports) {
  write_header(out, kLinearColumns);
  for (const LinearCheckReport& r : reports) {
    out << r.n << ',' << format_double(r.rho) << ',' << r.used_replications;
    for (double v : {r.variance_dr, r.variance_der_unadjusted, r.variance_der_cf,
                     r.ratio_unadjusted, r.ratio_unadjusted_se, r.ratio_unadjusted_analytic,
                     r.ratio_cf, r.ratio_cf_se, r.ratio_cf_analytic, r.max_identity_gap}) {
      out << ',' << format_double(v);
    }
    out << ',' << r.identity_violations << '\n';
  }
  if (!out) throw IoError("failed writing linear-check CSV");
}

std::string gnuplot_script(const std::vector<FigureRow>& rows, const std::string& csv_name,
                           const std::string& image_name, const std::string& title) {
  std::set<int> ns;
  std::set<std::pair<double, bool>> curves;
  for (const FigureRow& r : rows) {
    ns.insert(r.n);
    if (r.adjusted || r.rho == 0.0) curves.insert({r.rho, r.adjusted});
  }

  std::ostringstream s;
  s << "# Usage: gnuplot " << "<this file>\n";
  s << "set datafile separator ','\n";
  s << "set terminal pngcairo size " << 500 * std::max<std::size_t>(ns.size(), 1) << ",450\n";
  s << "set output '" << image_name << "'\n";
  s << "set multiplot layout 1," << std::max<std::size_t>(ns.size(), 1) << " title '" << title
    << "'\n";
  s << "set xlabel 'Dose'\nset ylabel 'Var. ratio (DER to DR)'\n";
  s << "set key bottom right\n";
  int dash = 1;
  std::map<std::pair<double, bool>, int> style;
  for (const auto& c : curves) style[c] = dash++;
  for (int n : ns) {
    s << "set title 'n=" << n << "'\n";
    s << "plot ";
    bool first = true;
    for (const auto& [c, dt] : style) {
      if (!first) s << ", \\\n     ";
      first = false;
      s << "'" << csv_name << "' using ($1==" << n << " && abs($2-" << format_double(c.first)
        << ")<1e-9 && $3==" << (c.second ? 1 : 0) << " ? $4 : 1/0):5 with lines dt " << dt
        << " lc black title 'rho=" << short_number(c.first) << (c.second ? "" : " Unadj") << "'";
    }
    s << '\n';
  }
  s << "unset multiplot\n";
  return s.str();
}

}  // namespace derdose
