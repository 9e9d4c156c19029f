#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "convergence.hpp"
#include "errors.hpp"

namespace bdsde {

inline constexpr const char* kVersion = "0.1.0";

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

// Optional context attached to machine-readable outputs; an empty timestamp
// is omitted entirely so artifacts can be byte-compared across runs.
struct ReportMeta {
  std::string subcommand;
  std::string timestamp;
};

namespace detail {

inline const char* bool_word(bool b) { return b ? "true" : "false"; }

inline nlohmann::json meta_json(const ReportMeta& meta) {
  nlohmann::json j;
  j["version"] = kVersion;
  if (!meta.subcommand.empty()) j["subcommand"] = meta.subcommand;
  if (!meta.timestamp.empty()) j["timestamp"] = meta.timestamp;
  return j;
}

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// per-level error table (columns fixed; slope repeated per row, "nan" when the
// invocation did not fit one)

inline std::string to_csv(const ConvergenceReport& report, double slope) {
  std::string out = "n,m,outer,inner,sup_y_err2,sup_y_err2_se,z_err_int,z_err_int_se,slope,seed\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.level) + ',' + std::to_string(row.grid_level) + ',';
    out += std::to_string(report.outer_count) + ',' + std::to_string(report.inner_count) + ',';
    out += format_double(row.sup_y_err2) + ',' + format_double(row.sup_y_err2_se) + ',';
    out += format_double(row.z_err_int) + ',' + format_double(row.z_err_int_se) + ',';
    out += format_double(slope) + ',' + std::to_string(report.seed) + '\n';
  }
  return out;
}

inline std::string to_json(const ConvergenceReport& report, double slope,
                           const ReportMeta& meta) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["n"] = row.level;
    r["m"] = row.grid_level;
    r["outer"] = report.outer_count;
    r["inner"] = report.inner_count;
    r["sup_y_err2"] = row.sup_y_err2;
    r["sup_y_err2_se"] = row.sup_y_err2_se;
    r["z_err_int"] = row.z_err_int;
    r["z_err_int_se"] = row.z_err_int_se;
    r["slope"] = detail::finite_or_null(slope);
    r["seed"] = report.seed;
    rows.push_back(std::move(r));
  }
  nlohmann::json j;
  j["meta"] = detail::meta_json(meta);
  j["report"] = {{"problem", report.problem},
                 {"delta_slack", report.delta_slack},
                 {"slope", detail::finite_or_null(slope)},
                 {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// identity panel

inline std::string to_csv(const IdentityReport& report) {
  std::string out = "identity,estimate,se,z,pass,trivial\n";
  for (const auto& row : report.rows) {
    out += row.name + ',' + format_double(row.estimate) + ',' + format_double(row.se) + ',';
    out += format_double(row.z) + ',';
    out += detail::bool_word(row.pass);
    out += ',';
    out += detail::bool_word(row.trivial);
    out += '\n';
  }
  return out;
}

inline std::string to_json(const IdentityReport& report, const ReportMeta& meta) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    nlohmann::json r;
    r["identity"] = row.name;
    r["estimate"] = row.estimate;
    r["se"] = row.se;
    r["z"] = row.z;
    r["pass"] = row.pass;
    r["trivial"] = row.trivial;
    rows.push_back(std::move(r));
  }
  nlohmann::json j;
  j["meta"] = detail::meta_json(meta);
  j["report"] = {{"problem", report.problem}, {"level", report.level},
                 {"grid_level", report.grid_level}, {"outer", report.outer_count},
                 {"inner", report.inner_count}, {"seed", report.seed},
                 {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// moment table (one row per (order, level); the per-order summary columns are
// repeated on each row of the group)

inline std::string to_csv(const MomentReport& report) {
  std::string out = "p,n,m,value,max_value,ratio,bounded\n";
  for (const auto& row : report.rows) {
    const MomentSummary* summary = nullptr;
    for (const auto& s : report.summaries)
      if (s.p == row.p) summary = &s;
    out += format_double(row.p) + ',' + std::to_string(row.level) + ',';
    out += std::to_string(row.grid_level) + ',' + format_double(row.value) + ',';
    out += format_double(summary ? summary->max_value : 0.0) + ',';
    out += format_double(summary ? summary->ratio : 0.0) + ',';
    out += detail::bool_word(summary && summary->bounded);
    out += '\n';
  }
  return out;
}

inline std::string to_json(const MomentReport& report, const ReportMeta& meta) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    const MomentSummary* summary = nullptr;
    for (const auto& s : report.summaries)
      if (s.p == row.p) summary = &s;
    nlohmann::json r;
    r["p"] = row.p;
    r["n"] = row.level;
    r["m"] = row.grid_level;
    r["value"] = row.value;
    r["max_value"] = summary ? summary->max_value : 0.0;
    r["ratio"] = summary ? detail::finite_or_null(summary->ratio) : nlohmann::json(nullptr);
    r["bounded"] = summary && summary->bounded;
    rows.push_back(std::move(r));
  }
  nlohmann::json j;
  j["meta"] = detail::meta_json(meta);
  j["report"] = {{"problem", report.problem}, {"outer", report.outer_count},
                 {"inner", report.inner_count}, {"seed", report.seed},
                 {"rows", std::move(rows)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// convergence plot: log2(composite error) against the level, with the
// theoretical reference slope -(1/2 - delta_slack) anchored at the first point

inline std::string to_svg(const ConvergenceReport& report, double slope) {
  if (report.rows.empty()) throw ConfigError("plot needs at least one level row");
  for (const auto& row : report.rows)
    if (!(row.composite() > 0.0))
      throw NumericalError("plot undefined: nonpositive composite error at level " +
                           std::to_string(row.level));

  const double width = 800.0, height = 600.0;
  const double left = 80.0, right = 770.0, top = 60.0, bottom = 540.0;

  std::vector<double> xs, ys;
  for (const auto& row : report.rows) {
    xs.push_back(static_cast<double>(row.level));
    ys.push_back(std::log2(row.composite()));
  }
  const double ref_slope = -(0.5 - report.delta_slack);
  double x_lo = xs.front() - 0.5, x_hi = xs.back() + 0.5;
  double y_lo = ys[0], y_hi = ys[0];
  for (double y : ys) {
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  }
  // reference line through the first data point must stay in frame
  y_lo = std::min(y_lo, ys[0] + ref_slope * (x_hi - xs[0]));
  y_hi = std::max(y_hi, ys[0] + ref_slope * (x_lo - xs[0]));
  y_lo = std::floor(y_lo) - 0.5;
  y_hi = std::ceil(y_hi) + 0.5;

  auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (right - left); };
  auto py = [&](double y) { return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top); };
  auto pt = [&](double x, double y) { return format_fixed(px(x), 2) + ',' + format_fixed(py(y), 2); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + format_fixed(width, 0) +
         "\" height=\"" + format_fixed(height, 0) + "\" viewBox=\"0 0 800 600\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  svg += "<text x=\"400\" y=\"30\" font-family=\"sans-serif\" font-size=\"18\" "
         "text-anchor=\"middle\">" + report.problem +
         ": squared coupling error vs interpolation level</text>\n";

  // axes
  svg += "<line x1=\"" + format_fixed(left, 2) + "\" y1=\"" + format_fixed(bottom, 2) +
         "\" x2=\"" + format_fixed(right, 2) + "\" y2=\"" + format_fixed(bottom, 2) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg += "<line x1=\"" + format_fixed(left, 2) + "\" y1=\"" + format_fixed(top, 2) +
         "\" x2=\"" + format_fixed(left, 2) + "\" y2=\"" + format_fixed(bottom, 2) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";

  // x ticks at every level
  for (double x : xs) {
    svg += "<line x1=\"" + format_fixed(px(x), 2) + "\" y1=\"" + format_fixed(bottom, 2) +
           "\" x2=\"" + format_fixed(px(x), 2) + "\" y2=\"" + format_fixed(bottom + 6, 2) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + format_fixed(px(x), 2) + "\" y=\"" + format_fixed(bottom + 22, 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">n=" +
           format_fixed(x, 0) + "</text>\n";
  }
  // y ticks at integers, thinned to at most ~10 labels
  const int y_span = static_cast<int>(std::ceil(y_hi) - std::floor(y_lo));
  const int y_step = std::max(1, (y_span + 9) / 10);
  for (int yi = static_cast<int>(std::ceil(y_lo)); yi <= static_cast<int>(std::floor(y_hi));
       yi += y_step) {
    const double y = static_cast<double>(yi);
    svg += "<line x1=\"" + format_fixed(left - 6, 2) + "\" y1=\"" + format_fixed(py(y), 2) +
           "\" x2=\"" + format_fixed(left, 2) + "\" y2=\"" + format_fixed(py(y), 2) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + format_fixed(left - 10, 2) + "\" y=\"" + format_fixed(py(y) + 4, 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"end\">" +
           std::to_string(yi) + "</text>\n";
  }
  // axis labels
  svg += "<text x=\"" + format_fixed((left + right) / 2, 2) + "\" y=\"580\" "
         "font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">"
         "interpolation level n</text>\n";
  svg += "<text x=\"22\" y=\"" + format_fixed((top + bottom) / 2, 2) +
         "\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 22 " + format_fixed((top + bottom) / 2, 2) + ")\">"
         "log2 composite squared error</text>\n";

  // reference slope -(1/2 - delta) through the first data point
  const double ref_y0 = ys[0] + ref_slope * (x_lo - xs[0]);
  const double ref_y1 = ys[0] + ref_slope * (x_hi - xs[0]);
  svg += "<line x1=\"" + format_fixed(px(x_lo), 2) + "\" y1=\"" + format_fixed(py(ref_y0), 2) +
         "\" x2=\"" + format_fixed(px(x_hi), 2) + "\" y2=\"" + format_fixed(py(ref_y1), 2) +
         "\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"7,5\"/>\n";

  // data polyline and markers
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) svg += ' ';
    svg += pt(xs[i], ys[i]);
  }
  svg += "\"/>\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    svg += "<circle cx=\"" + format_fixed(px(xs[i]), 2) + "\" cy=\"" + format_fixed(py(ys[i]), 2) +
           "\" r=\"4\" fill=\"#1f77b4\"/>\n";

  // legend
  svg += "<text x=\"" + format_fixed(right, 2) + "\" y=\"" + format_fixed(top + 4, 2) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"end\" fill=\"#1f77b4\">"
         "measured log2 error</text>\n";
  svg += "<text x=\"" + format_fixed(right, 2) + "\" y=\"" + format_fixed(top + 22, 2) +
         "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"end\" fill=\"#555555\">"
         "reference slope " + format_fixed(ref_slope, 2) + "</text>\n";
  if (std::isfinite(slope))
    svg += "<text x=\"" + format_fixed(right, 2) + "\" y=\"" + format_fixed(top + 40, 2) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"end\" fill=\"#555555\">"
           "fitted slope " + format_fixed(slope, 3) + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

}  // namespace bdsde
