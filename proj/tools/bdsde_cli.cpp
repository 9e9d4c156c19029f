// Command-line front end: runs the coupling experiments and writes CSV/JSON
// tables and SVG convergence plots.  Exit codes: 0 success, 2 configuration
// error, 3 numerical failure, 4 failed --check.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bdsde/bdsde.hpp"

namespace {

using bdsde::ConfigError;
using bdsde::NumericalError;

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOptions {
  std::string config_path;
  std::string problem = "sine_g";
  std::string levels = "3..7";
  int extra_levels = 2;
  std::int64_t outer = 64;
  std::int64_t inner = 2048;
  int basis_degree = 3;
  std::string basis_kind = "polynomial";
  int basis_bins = 8;
  double ridge = 1e-8;
  std::uint64_t seed = 42;
  int workers = 1;
  std::string out_dir = ".";
  std::string format;  // resolved per subcommand when left empty
  bool check = false;
  bool no_timestamp = false;
  double delta_slack = 0.1;
  double horizon = 1.0;
  int picard = 1;
  double sigma = 0.5;
  double affine[7] = {0, 0, 0, 0, 0, 1, 0};  // f0 fy fz g0 gy x0 xw
};

constexpr const char* kAffineKeys[7] = {"affine_f0", "affine_fy", "affine_fz", "affine_g0",
                                        "affine_gy", "affine_x0", "affine_xw"};

void add_common_options(CLI::App* sub, CliOptions& opt) {
  sub->add_option("--config", opt.config_path, "flat JSON config file; flags override it");
  sub->add_option("--problem", opt.problem,
                  "zero_g, const_g, sine_g, tanh_g, or affine (see affine_* config keys)");
  sub->add_option("--levels", opt.levels, "interpolation levels as a..b or a single level");
  sub->add_option("--extra-levels", opt.extra_levels,
                  "solver grid refinement beyond each level (m = n + extra)");
  sub->add_option("--outer", opt.outer, "outer backward-noise scenarios");
  sub->add_option("--inner", opt.inner, "inner forward-noise paths per scenario");
  sub->add_option("--basis-degree", opt.basis_degree, "polynomial regression degree");
  sub->add_option("--basis-kind", opt.basis_kind, "polynomial or piecewise_linear");
  sub->add_option("--basis-bins", opt.basis_bins, "bins for the piecewise_linear basis");
  sub->add_option("--ridge", opt.ridge, "ridge regularization strength");
  sub->add_option("--seed", opt.seed, "master seed");
  sub->add_option("--workers", opt.workers,
                  "worker threads over outer scenarios (0 = auto, BDSDE_WORKERS as default)");
  sub->add_option("--out", opt.out_dir, "output directory");
  sub->add_option("--format", opt.format, "comma list of csv,json,svg");
  sub->add_option("--horizon", opt.horizon, "time horizon (must make the grids dyadic)");
  sub->add_option("--picard", opt.picard, "fixed-point refinements inside each backward step");
  sub->add_option("--sigma", opt.sigma, "diffusion constant for const_g");
  sub->add_flag("--check", opt.check, "verify the acceptance condition; exit 4 on failure");
  sub->add_flag("--no-timestamp", opt.no_timestamp, "omit the timestamp for byte-stable output");
}

// line (1-based) of the first occurrence of "key" in the raw config text
int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  if (pos == std::string::npos) return 0;
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
}

std::string key_site(const std::string& text, const std::string& key) {
  const int line = line_of_key(text, key);
  return '"' + key + '"' + (line > 0 ? " (line " + std::to_string(line) + ")" : "");
}

std::vector<int> parse_levels(const std::string& range_text) {
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw ConfigError("cannot parse level '" + std::string(s) + "' in --levels " + range_text);
    return v;
  };
  const auto dots = range_text.find("..");
  if (dots == std::string::npos) return {parse_int(range_text)};
  const int a = parse_int(std::string_view(range_text).substr(0, dots));
  const int b = parse_int(std::string_view(range_text).substr(dots + 2));
  if (a > b) throw ConfigError("empty level range " + range_text);
  std::vector<int> out;
  for (int n = a; n <= b; ++n) out.push_back(n);
  return out;
}

struct ConfigFile {
  nlohmann::json values;
  std::string raw;

  bool has(const std::string& key) const { return values.contains(key); }

  double number(const std::string& key) const {
    if (!values[key].is_number())
      throw ConfigError("config key " + key_site(raw, key) + " must be a number");
    return values[key].get<double>();
  }

  std::int64_t integer(const std::string& key) const {
    if (!values[key].is_number_integer())
      throw ConfigError("config key " + key_site(raw, key) + " must be an integer");
    return values[key].get<std::int64_t>();
  }

  std::string text(const std::string& key) const {
    if (!values[key].is_string())
      throw ConfigError("config key " + key_site(raw, key) + " must be a string");
    return values[key].get<std::string>();
  }
};

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  ConfigFile cfg;
  cfg.raw.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  try {
    cfg.values = nlohmann::json::parse(cfg.raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!cfg.values.is_object())
    throw ConfigError("config file " + path + " must hold a flat JSON object");

  static const std::vector<std::string> known = {
      "problem",    "wz_levels",  "extra_levels", "outer",     "inner",
      "basis_degree", "basis_kind", "basis_bins", "ridge",     "seed",
      "workers",    "out",        "format",       "delta_slack", "horizon",
      "picard",     "sigma",      "affine_f0",    "affine_fy", "affine_fz",
      "affine_g0",  "affine_gy",  "affine_x0",    "affine_xw"};
  for (const auto& [key, value] : cfg.values.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown config key " + key_site(cfg.raw, key));
  }
  return cfg;
}

// flag > config > (environment for workers) > built-in default
void merge_config(const CLI::App* sub, const ConfigFile& cfg, CliOptions& opt) {
  auto flag_given = [&](const char* name) { return sub->count(name) > 0; };

  if (!flag_given("--problem") && cfg.has("problem")) opt.problem = cfg.text("problem");
  if (!flag_given("--levels") && cfg.has("wz_levels")) {
    const auto& v = cfg.values["wz_levels"];
    if (v.is_string()) {
      opt.levels = v.get<std::string>();
    } else if (v.is_array()) {
      std::string joined;
      for (const auto& item : v) {
        if (!item.is_number_integer())
          throw ConfigError("config key " + key_site(cfg.raw, "wz_levels") +
                            " must be an array of integers or an \"a..b\" string");
        if (!joined.empty()) joined += ',';
        joined += std::to_string(item.get<std::int64_t>());
      }
      opt.levels = joined;  // comma list; resolved by resolve_levels below
    } else {
      throw ConfigError("config key " + key_site(cfg.raw, "wz_levels") +
                        " must be an array of integers or an \"a..b\" string");
    }
  }
  if (!flag_given("--extra-levels") && cfg.has("extra_levels"))
    opt.extra_levels = static_cast<int>(cfg.integer("extra_levels"));
  if (!flag_given("--outer") && cfg.has("outer")) opt.outer = cfg.integer("outer");
  if (!flag_given("--inner") && cfg.has("inner")) opt.inner = cfg.integer("inner");
  if (!flag_given("--basis-degree") && cfg.has("basis_degree"))
    opt.basis_degree = static_cast<int>(cfg.integer("basis_degree"));
  if (!flag_given("--basis-kind") && cfg.has("basis_kind")) opt.basis_kind = cfg.text("basis_kind");
  if (!flag_given("--basis-bins") && cfg.has("basis_bins"))
    opt.basis_bins = static_cast<int>(cfg.integer("basis_bins"));
  if (!flag_given("--ridge") && cfg.has("ridge")) opt.ridge = cfg.number("ridge");
  if (!flag_given("--seed") && cfg.has("seed")) {
    if (cfg.integer("seed") < 0)
      throw ConfigError("config key " + key_site(cfg.raw, "seed") + " must be nonnegative");
    opt.seed = static_cast<std::uint64_t>(cfg.integer("seed"));
  }
  if (!flag_given("--workers")) {
    if (cfg.has("workers")) {
      opt.workers = static_cast<int>(cfg.integer("workers"));
    } else if (const char* env = std::getenv("BDSDE_WORKERS")) {
      int v = 0;
      const std::string s(env);
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ConfigError("environment variable BDSDE_WORKERS='" + s + "' is not an integer");
      opt.workers = v;
    }
  }
  if (!flag_given("--out") && cfg.has("out")) opt.out_dir = cfg.text("out");
  if (!flag_given("--format") && cfg.has("format")) opt.format = cfg.text("format");
  if (cfg.has("delta_slack")) opt.delta_slack = cfg.number("delta_slack");
  if (!flag_given("--horizon") && cfg.has("horizon")) opt.horizon = cfg.number("horizon");
  if (!flag_given("--picard") && cfg.has("picard"))
    opt.picard = static_cast<int>(cfg.integer("picard"));
  if (!flag_given("--sigma") && cfg.has("sigma")) opt.sigma = cfg.number("sigma");
  for (int i = 0; i < 7; ++i)
    if (cfg.has(kAffineKeys[i])) opt.affine[i] = cfg.number(kAffineKeys[i]);
}

// accepts "a..b", "a", or the comma list produced from a config array
std::vector<int> resolve_levels(const std::string& range_text) {
  if (range_text.find(',') == std::string::npos) return parse_levels(range_text);
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= range_text.size()) {
    const auto comma = range_text.find(',', start);
    const auto piece = range_text.substr(start, comma - start);
    const auto single = parse_levels(piece);
    out.insert(out.end(), single.begin(), single.end());
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bdsde::ExperimentPlan build_plan(const CliOptions& opt) {
  bdsde::ExperimentPlan plan;
  plan.problem_name = opt.problem;
  plan.levels = resolve_levels(opt.levels);
  plan.extra_levels = opt.extra_levels;
  plan.outer_count = opt.outer;
  plan.inner_count = opt.inner;
  plan.seed = opt.seed;
  plan.delta_slack = opt.delta_slack;
  plan.workers = opt.workers;
  plan.horizon = opt.horizon;
  plan.solver.picard_iters = opt.picard;
  plan.solver.basis.ridge = opt.ridge;
  if (opt.basis_kind == "polynomial") {
    plan.solver.basis.kind = bdsde::RegressionBasis::Kind::polynomial;
    plan.solver.basis.degree_or_bins = opt.basis_degree;
  } else if (opt.basis_kind == "piecewise_linear") {
    plan.solver.basis.kind = bdsde::RegressionBasis::Kind::piecewise_linear;
    plan.solver.basis.degree_or_bins = opt.basis_bins;
  } else {
    throw ConfigError("unknown basis kind '" + opt.basis_kind +
                      "' (expected polynomial or piecewise_linear)");
  }
  plan.validate();
  return plan;
}

bdsde::BdsdeProblem build_problem(const CliOptions& opt) {
  bdsde::BdsdeProblem problem =
      opt.problem == "affine"
          ? bdsde::make_affine_problem(opt.affine[0], opt.affine[1], opt.affine[2], opt.affine[3],
                                       opt.affine[4], opt.affine[5], opt.affine[6])
          : bdsde::make_problem(opt.problem, opt.sigma);
  problem.horizon = opt.horizon;
  return problem;
}

std::vector<std::string> resolve_formats(const std::string& requested,
                                         const std::string& subcommand) {
  std::string list_text = requested;
  if (list_text.empty()) list_text = subcommand == "plot" ? "svg" : "csv,json";
  std::vector<std::string> formats;
  std::size_t start = 0;
  while (start <= list_text.size()) {
    const auto comma = list_text.find(',', start);
    const auto piece = list_text.substr(start, comma - start);
    if (piece != "csv" && piece != "json" && piece != "svg")
      throw ConfigError("unknown output format '" + piece + "' (expected csv, json, or svg)");
    if (piece == "svg" && subcommand != "plot")
      throw ConfigError("svg output is only produced by the plot subcommand");
    formats.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return formats;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw ConfigError("cannot write output file " + path.string());
  std::cout << "wrote " << path.string() << "\n";
}

struct Emitter {
  std::filesystem::path dir;
  std::string subcommand;
  std::vector<std::string> formats;
  bdsde::ReportMeta meta;

  bool wants(const std::string& fmt) const {
    return std::find(formats.begin(), formats.end(), fmt) != formats.end();
  }
  std::filesystem::path target(const std::string& ext) const {
    return dir / (subcommand + '.' + ext);
  }
};

Emitter make_emitter(const CliOptions& opt, const std::string& subcommand) {
  Emitter e;
  e.dir = opt.out_dir;
  e.subcommand = subcommand;
  e.formats = resolve_formats(opt.format, subcommand);
  e.meta.subcommand = subcommand;
  if (!opt.no_timestamp) e.meta.timestamp = utc_timestamp();
  std::error_code ec;
  std::filesystem::create_directories(e.dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + e.dir.string());
  return e;
}

void print_error_table(const bdsde::ConvergenceReport& report) {
  for (const auto& row : report.rows)
    std::cout << "n=" << row.level << " m=" << row.grid_level
              << " sup_y_err2=" << bdsde::format_double(row.sup_y_err2) << " (se "
              << bdsde::format_double(row.sup_y_err2_se) << ")"
              << " z_err_int=" << bdsde::format_double(row.z_err_int) << " (se "
              << bdsde::format_double(row.z_err_int_se) << ")\n";
}

int run_simulate(const CliOptions& opt) {
  const auto plan = build_plan(opt);
  const auto problem = build_problem(opt);
  const auto report = bdsde::estimate_errors(problem, plan);
  const double slope = std::numeric_limits<double>::quiet_NaN();
  const auto emitter = make_emitter(opt, "simulate");
  print_error_table(report);
  if (emitter.wants("csv")) write_file(emitter.target("csv"), bdsde::to_csv(report, slope));
  if (emitter.wants("json"))
    write_file(emitter.target("json"), bdsde::to_json(report, slope, emitter.meta));
  if (opt.check) throw ConfigError("--check is only defined for rate, identities, and moments");
  return 0;
}

int run_rate(const CliOptions& opt) {
  const auto plan = build_plan(opt);
  const auto problem = build_problem(opt);
  const auto report = bdsde::estimate_errors(problem, plan);
  const double slope = bdsde::fit_rate(report);
  const auto emitter = make_emitter(opt, "rate");
  print_error_table(report);
  const double threshold = -(0.5 - plan.delta_slack);
  std::cout << "fitted slope: " << bdsde::format_double(slope)
            << " (threshold " << bdsde::format_double(threshold) << ")\n";
  if (emitter.wants("csv")) write_file(emitter.target("csv"), bdsde::to_csv(report, slope));
  if (emitter.wants("json"))
    write_file(emitter.target("json"), bdsde::to_json(report, slope, emitter.meta));
  if (opt.check) {
    if (!(slope <= threshold))
      throw CheckFailure("rate check failed: slope " + bdsde::format_double(slope) +
                         " exceeds " + bdsde::format_double(threshold));
    if (problem.closed_form && (slope < -1.25 || slope > -0.75))
      throw CheckFailure("rate check failed: slope " + bdsde::format_double(slope) +
                         " outside [-1.25, -0.75] expected for " + problem.name);
    std::cout << "check passed\n";
  }
  return 0;
}

int run_identities(const CliOptions& opt) {
  const auto plan = build_plan(opt);
  const auto problem = build_problem(opt);
  const auto report = bdsde::identity_suite(problem, plan);
  const auto emitter = make_emitter(opt, "identities");
  for (const auto& row : report.rows)
    std::cout << row.name << ": estimate=" << bdsde::format_double(row.estimate) << " se="
              << bdsde::format_double(row.se) << " z=" << bdsde::format_double(row.z)
              << (row.trivial ? " trivial" : row.pass ? " pass" : " FAIL") << "\n";
  if (emitter.wants("csv")) write_file(emitter.target("csv"), bdsde::to_csv(report));
  if (emitter.wants("json"))
    write_file(emitter.target("json"), bdsde::to_json(report, emitter.meta));
  if (opt.check) {
    for (std::size_t i = 0; i + 1 < report.rows.size(); ++i)
      if (!report.rows[i].pass)
        throw CheckFailure("identity check failed: " + report.rows[i].name + " has |z| " +
                           bdsde::format_double(std::abs(report.rows[i].z)) + " > 3");
    const auto& control = report.rows.back();
    if (!control.trivial && control.pass)
      throw CheckFailure("identity check failed: " + control.name +
                         " was expected to fail but has |z| <= 3");
    std::cout << "check passed\n";
  }
  return 0;
}

int run_moments(const CliOptions& opt) {
  const auto plan = build_plan(opt);
  const auto problem = build_problem(opt);
  const auto report = bdsde::moment_bounds(problem, plan, {2.0, 4.0});
  const auto emitter = make_emitter(opt, "moments");
  for (const auto& s : report.summaries)
    std::cout << "p=" << bdsde::format_double(s.p) << " max=" << bdsde::format_double(s.max_value)
              << " ratio=" << bdsde::format_double(s.ratio)
              << (s.bounded ? " bounded" : " UNBOUNDED") << "\n";
  if (emitter.wants("csv")) write_file(emitter.target("csv"), bdsde::to_csv(report));
  if (emitter.wants("json"))
    write_file(emitter.target("json"), bdsde::to_json(report, emitter.meta));
  if (opt.check) {
    for (const auto& s : report.summaries)
      if (!s.bounded)
        throw CheckFailure("moment check failed: p=" + bdsde::format_double(s.p) +
                           " ratio " + bdsde::format_double(s.ratio) + " exceeds 2");
    std::cout << "check passed\n";
  }
  return 0;
}

int run_plot(const CliOptions& opt) {
  const auto plan = build_plan(opt);
  const auto problem = build_problem(opt);
  const auto report = bdsde::estimate_errors(problem, plan);
  double slope = std::numeric_limits<double>::quiet_NaN();
  try {
    slope = bdsde::fit_rate(report);
  } catch (const ConfigError&) {
    // fewer than three levels: draw the plot without a fitted slope
  }
  const auto emitter = make_emitter(opt, "plot");
  print_error_table(report);
  if (emitter.wants("csv")) write_file(emitter.target("csv"), bdsde::to_csv(report, slope));
  if (emitter.wants("json"))
    write_file(emitter.target("json"), bdsde::to_json(report, slope, emitter.meta));
  if (emitter.wants("svg")) write_file(emitter.target("svg"), bdsde::to_svg(report, slope));
  if (opt.check) throw ConfigError("--check is only defined for rate, identities, and moments");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wong-Zakai coupling experiments for backward doubly stochastic equations"};
  app.require_subcommand(1);

  CliOptions opt;
  CLI::App* simulate = app.add_subcommand("simulate", "per-level coupling error table");
  CLI::App* rate = app.add_subcommand("rate", "error table plus fitted convergence slope");
  CLI::App* identities = app.add_subcommand("identities", "zero-mean identity panel");
  CLI::App* moments = app.add_subcommand("moments", "uniform moment-bound table");
  CLI::App* plot = app.add_subcommand("plot", "SVG plot of log2 error against the level");
  for (CLI::App* sub : {simulate, rate, identities, moments, plot}) add_common_options(sub, opt);

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    CLI::App* sub = app.get_subcommands().front();
    ConfigFile cfg;
    cfg.values = nlohmann::json::object();
    if (!opt.config_path.empty()) cfg = load_config(opt.config_path);
    merge_config(sub, cfg, opt);

    if (sub == simulate) return run_simulate(opt);
    if (sub == rate) return run_rate(opt);
    if (sub == identities) return run_identities(opt);
    if (sub == moments) return run_moments(opt);
    return run_plot(opt);
  } catch (const CheckFailure& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
