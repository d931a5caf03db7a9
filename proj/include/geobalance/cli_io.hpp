#pragma once

// Run configuration (`key = value` files plus command-line overrides),
// CSV output, and the command-line entry point.

#include "geobalance/check.hpp"
#include "geobalance/core.hpp"
#include "geobalance/experiments.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace geobalance::cli {

namespace fs = std::filesystem;
using experiments::ExperimentKind;

/// Configuration problem; line() is 0 for command-line values.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct RunConfig {
  ExperimentKind kind = ExperimentKind::drift;
  std::vector<double> eps_list;  ///< drift sweep
  double eps = 0.0;              ///< exchange / shear
  double dt = 0.0;
  double horizon = 0.0;
  int n_particles = 0;
  int grid = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  fs::path out = ".";
  long long stride = 1;
  int workers = 1;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{"experiment", "eps",   "eps_list", "dt",   "horizon", "n_particles",
                                             "grid",       "alpha", "seed",     "out",  "stride",  "workers"};
  return keys;
}

/// A raw value and where it came from (line number, 0 for the command line).
struct RawValue {
  std::string text;
  int line = 0;
};
using RawSettings = std::map<std::string, RawValue>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool is_known(const std::string& key) {
  for (const auto& k : known_keys())
    if (k == key) return true;
  return false;
}

inline double parse_number(const std::string& key, const RawValue& raw) {
  const std::string t = trim(raw.text);
  // Accept simple fractions such as 1/36.
  const auto slash = t.find('/');
  try {
    std::size_t used = 0;
    if (slash != std::string::npos) {
      const std::string a = trim(t.substr(0, slash));
      const std::string b = trim(t.substr(slash + 1));
      std::size_t ua = 0, ub = 0;
      const double num = std::stod(a, &ua);
      const double den = std::stod(b, &ub);
      if (ua != a.size() || ub != b.size() || den == 0.0) throw std::invalid_argument(t);
      return num / den;
    }
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse value '" + raw.text + "' for key '" + key + "'", raw.line);
  }
}

inline long long parse_integer(const std::string& key, const RawValue& raw) {
  const std::string t = trim(raw.text);
  try {
    std::size_t used = 0;
    const long long v = std::stoll(t, &used);
    if (used != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse integer '" + raw.text + "' for key '" + key + "'", raw.line);
  }
}

inline std::vector<double> parse_list(const std::string& key, const RawValue& raw) {
  std::vector<double> out;
  std::stringstream ss(raw.text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number(key, {item, raw.line}));
  }
  if (out.empty()) throw ConfigError("empty list for key '" + key + "'", raw.line);
  return out;
}

}  // namespace detail

/// Reads `key = value` lines; `#` starts a comment.
inline RawSettings read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'", 0);
  RawSettings out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + line + "'", lineno);
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (!detail::is_known(key)) throw ConfigError("unknown key '" + key + "'", lineno);
    if (value.empty()) throw ConfigError("missing value for key '" + key + "'", lineno);
    out[key] = {value, lineno};
  }
  return out;
}

/// Resolves file settings and command-line overrides (which win) into a
/// complete RunConfig, filling per-experiment defaults.
inline RunConfig resolve_config(const RawSettings& file, const RawSettings& overrides) {
  RawSettings merged = file;
  for (const auto& [k, v] : overrides) {
    if (!detail::is_known(k)) throw ConfigError("unknown key '" + k + "'", v.line);
    merged[k] = v;
  }
  auto find = [&](const std::string& k) -> const RawValue* {
    const auto it = merged.find(k);
    return it == merged.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  const RawValue* kind = find("experiment");
  if (!kind) throw ConfigError("missing experiment kind (set 'experiment' or give a subcommand)", 0);
  const auto parsed_kind = experiments::kind_from_string(detail::trim(kind->text));
  if (!parsed_kind) throw ConfigError("unknown experiment '" + kind->text + "'", kind->line);
  cfg.kind = *parsed_kind;

  auto number = [&](const std::string& k, double fallback) {
    const RawValue* v = find(k);
    return v ? detail::parse_number(k, *v) : fallback;
  };
  auto integer = [&](const std::string& k, long long fallback) {
    const RawValue* v = find(k);
    return v ? detail::parse_integer(k, *v) : fallback;
  };
  auto line_of = [&](const std::string& k) {
    const RawValue* v = find(k);
    return v ? v->line : 0;
  };
  auto require = [&](bool ok, const std::string& k, const std::string& msg) {
    if (!ok) throw ConfigError(k + " " + msg, line_of(k));
  };

  const experiments::ShearOptions shear_defaults;
  const experiments::ExchangeOptions exchange_defaults;
  switch (cfg.kind) {
    case ExperimentKind::drift: {
      const RawValue* list = find("eps_list");
      const RawValue* single = find("eps");
      if (list && single) {
        const bool list_from_cli = overrides.count("eps_list") > 0;
        const bool single_from_cli = overrides.count("eps") > 0;
        if (list_from_cli == single_from_cli) {
          throw ConfigError("both eps and eps_list given; use one", std::max(list->line, single->line));
        }
        if (single_from_cli) list = nullptr; else single = nullptr;
      }
      if (list) cfg.eps_list = detail::parse_list("eps_list", *list);
      else if (single) cfg.eps_list = {detail::parse_number("eps", *single)};
      else cfg.eps_list = experiments::default_drift_eps();
      for (double e : cfg.eps_list) require(e > 0.0 && e <= 1.0, list ? "eps_list" : "eps", "values must lie in (0, 1]");
      cfg.stride = integer("stride", 100);
      break;
    }
    case ExperimentKind::exchange:
      cfg.eps = number("eps", exchange_defaults.eps);
      cfg.dt = number("dt", exchange_defaults.dt);
      cfg.horizon = number("horizon", exchange_defaults.horizon);
      cfg.grid = static_cast<int>(integer("grid", exchange_defaults.grid));
      cfg.stride = integer("stride", exchange_defaults.stride);
      break;
    case ExperimentKind::shear:
      cfg.eps = number("eps", shear_defaults.eps);
      cfg.dt = number("dt", shear_defaults.dt);
      cfg.horizon = number("horizon", shear_defaults.horizon);
      cfg.n_particles = static_cast<int>(integer("n_particles", shear_defaults.n_particles));
      cfg.grid = static_cast<int>(integer("grid", shear_defaults.grid));
      cfg.alpha = number("alpha", shear_defaults.alpha);
      cfg.stride = integer("stride", shear_defaults.stride);
      break;
  }
  cfg.seed = static_cast<std::uint64_t>(integer("seed", 0));
  cfg.workers = static_cast<int>(integer("workers", 1));

  if (cfg.kind != ExperimentKind::drift) {
    require(std::isfinite(cfg.eps) && cfg.eps >= 0.0, "eps", "must be finite and non-negative");
    require(std::isfinite(cfg.dt) && cfg.dt > 0.0, "dt", "must be positive");
    require(std::isfinite(cfg.horizon) && cfg.horizon >= 0.0, "horizon", "must be non-negative");
    require(cfg.grid >= 8, "grid", "must be at least 8");
  }
  if (cfg.kind == ExperimentKind::shear) {
    require(cfg.n_particles >= 1, "n_particles", "must be positive");
    require(std::isfinite(cfg.alpha) && cfg.alpha >= 0.0, "alpha", "must be non-negative");
    require((cfg.grid & (cfg.grid - 1)) == 0 || cfg.alpha == 0.0, "grid", "must be a power of two when smoothing");
  }
  require(cfg.stride >= 1, "stride", "must be >= 1");
  require(cfg.workers >= 1, "workers", "must be >= 1");
  require(integer("seed", 0) >= 0, "seed", "must be non-negative");

  if (const RawValue* out = find("out")) {
    cfg.out = detail::trim(out->text);
  } else if (const char* env = std::getenv("GEOBALANCE_OUT"); env && *env) {
    cfg.out = env;
  }
  return cfg;
}

inline RunConfig parse_config(const std::optional<fs::path>& path, const RawSettings& overrides) {
  return resolve_config(path ? read_config_file(*path) : RawSettings{}, overrides);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// 17 significant digits: every double survives a text round trip.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

/// Header `tau,K,H,K_ag,q1x,q1y,...,p1x,p1y,...`, one row per sample.
inline void write_timeseries_csv(const TrajectoryRecord& record, const fs::path& path) {
  if (record.empty()) throw std::invalid_argument("write_timeseries_csv: empty record");
  const Eigen::Index n = record.front().q.size() / 2;
  std::ofstream out = open_output(path);
  out << "tau,K,H,K_ag";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",q" << i << "x,q" << i << "y";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",p" << i << "x,p" << i << "y";
  out << '\n';
  std::string row;
  for (const Sample& s : record.samples) {
    row = format_double(s.tau);
    row += ',' + format_double(s.kinetic);
    row += ',' + format_double(s.total);
    row += ',' + format_double(s.kinetic_ag);
    for (Eigen::Index i = 0; i < s.q.size(); ++i) row += ',' + format_double(s.q[i]);
    for (Eigen::Index i = 0; i < s.p.size(); ++i) row += ',' + format_double(s.p[i]);
    out << row << '\n';
  }
  finish_output(out, path);
}

/// Columns eps,delta_K,delta_E,fit_C,fit_c; the fit columns are nan when
/// fewer than two runs were made.
inline void write_drift_csv(const experiments::DriftResult& result, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "eps,delta_K,delta_E,fit_C,fit_c\n";
  const std::string fit_c = result.fit ? format_double(result.fit->C) : "nan";
  const std::string fit_k = result.fit ? format_double(result.fit->c) : "nan";
  for (const auto& r : result.runs) {
    out << format_double(r.report.eps) << ',' << format_double(r.report.delta_K) << ','
        << format_double(r.report.delta_E) << ',' << fit_c << ',' << fit_k << '\n';
  }
  finish_output(out, path);
}

/// Per-step balance diagnostics, columns tau,K,H,K_ag.
inline void write_balance_csv(const experiments::BalanceSeries& series, const fs::path& path) {
  std::ofstream out = open_output(path);
  out << "tau,K,H,K_ag\n";
  for (std::size_t i = 0; i < series.tau.size(); ++i) {
    out << format_double(series.tau[i]) << ',' << format_double(series.kinetic[i]) << ','
        << format_double(series.total[i]) << ',' << format_double(series.kinetic_ag[i]) << '\n';
  }
  finish_output(out, path);
}

/// Parsed numeric CSV: header names and rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

enum ExitCode : int { ok = 0, config_error = 1, runtime_abort = 2 };

inline int run_experiment(const RunConfig& cfg, std::ostream& log) {
  fs::create_directories(cfg.out);
  switch (cfg.kind) {
    case ExperimentKind::drift: {
      experiments::DriftOptions opts;
      opts.eps_list = cfg.eps_list;
      opts.stride = cfg.stride;
      opts.workers = cfg.workers;
      const auto result = experiments::run_drift_experiment(opts);
      for (std::size_t i = 0; i < result.runs.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "drift_run_%02zu.csv", i);
        write_timeseries_csv(result.runs[i].record, cfg.out / name);
        const auto& r = result.runs[i].report;
        log << "eps=" << format_double(r.eps) << " delta_K=" << format_double(r.delta_K)
            << " delta_E=" << format_double(r.delta_E) << " steps=" << result.runs[i].record.steps << '\n';
      }
      write_drift_csv(result, cfg.out / "drift.csv");
      if (result.fit) log << "fit: delta_K ~ " << result.fit->C << " exp(-" << result.fit->c << " / eps)\n";
      break;
    }
    case ExperimentKind::exchange: {
      experiments::ExchangeOptions opts;
      opts.eps = cfg.eps;
      opts.dt = cfg.dt;
      opts.horizon = cfg.horizon;
      opts.grid = cfg.grid;
      opts.stride = cfg.stride;
      const auto result = experiments::run_two_particle_exchange(opts);
      write_timeseries_csv(result.record, cfg.out / "exchange.csv");
      log << "K_total(0)=" << format_double(result.kinetic_total_initial)
          << " K_total(T)=" << format_double(result.kinetic_total_final)
          << " max |dK_i|=" << format_double(result.max_individual_change) << '\n';
      break;
    }
    case ExperimentKind::shear: {
      experiments::ShearOptions opts;
      opts.n_particles = cfg.n_particles;
      opts.grid = cfg.grid;
      opts.eps = cfg.eps;
      opts.dt = cfg.dt;
      opts.alpha = cfg.alpha;
      opts.horizon = cfg.horizon;
      opts.seed = cfg.seed;
      opts.stride = cfg.stride;
      const auto result = experiments::run_shear_instability(opts);
      write_timeseries_csv(result.record, cfg.out / "shear.csv");
      write_balance_csv(result.series, cfg.out / "shear_balance.csv");
      log << "max relative energy error=" << format_double(result.max_relative_energy_error)
          << " K_ag baseline=" << format_double(result.kinetic_ag_baseline)
          << " K_ag max=" << format_double(result.kinetic_ag_max)
          << " K_ag secular change=" << format_double(result.trend.secular_change)
          << " residual std=" << format_double(result.trend.residual_std) << '\n';
      break;
    }
  }
  return ExitCode::ok;
}

inline int run_checks(std::ostream& log) {
  bool all = true;
  for (const auto& r : check::run_invariant_checks()) {
    log << (r.passed ? "PASS " : "FAIL ") << r.name << "  (" << r.measured << " <= " << r.tolerance << ")\n";
    all = all && r.passed;
  }
  return all ? ExitCode::ok : ExitCode::runtime_abort;
}

/// `geobalance <drift|exchange|shear|check> [options]`.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Semi-geostrophic parcel dynamics: drift, exchange and shear experiments", "geobalance"};
  std::string command;
  std::optional<std::string> config_path;
  std::map<std::string, std::string> flags;
  app.add_option("command", command, "drift | exchange | shear | check");
  app.add_option("--config", config_path, "key = value configuration file");
  const std::vector<std::pair<std::string, std::string>> flag_keys{
      {"--experiment", "experiment"}, {"--eps", "eps"},       {"--eps-list", "eps_list"},
      {"--dt", "dt"},                 {"--horizon", "horizon"}, {"--n-particles", "n_particles"},
      {"--grid", "grid"},             {"--alpha", "alpha"},   {"--seed", "seed"},
      {"--out", "out"},               {"--stride", "stride"}, {"--workers", "workers"}};
  for (const auto& [flag, key] : flag_keys) app.add_option(flag, flags[key], "sets '" + key + "'");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    log << app.help();
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return ExitCode::config_error;
  }

  if (command == "check") return run_checks(log);

  RawSettings overrides;
  for (const auto& [flag, key] : flag_keys) {
    if (app.get_option(flag)->count() > 0) overrides[key] = {flags[key], 0};
  }
  if (!command.empty()) {
    if (!experiments::kind_from_string(command)) {
      err << "unknown command '" << command << "'\n" << app.help();
      return ExitCode::config_error;
    }
    if (overrides.count("experiment") && overrides["experiment"].text != command) {
      err << "command '" << command << "' conflicts with --experiment " << overrides["experiment"].text << '\n';
      return ExitCode::config_error;
    }
    overrides["experiment"] = {command, 0};
  }

  RunConfig cfg;
  try {
    cfg = parse_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt, overrides);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return ExitCode::config_error;
  }

  try {
    return run_experiment(cfg, log);
  } catch (const std::exception& e) {
    err << "run aborted: " << e.what() << '\n';
    return ExitCode::runtime_abort;
  }
}

}  // namespace geobalance::cli
