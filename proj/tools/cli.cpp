#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gbhammer/report.hpp"
#include "gbhammer/scenario.hpp"

namespace gbh::cli {

namespace {

struct RunOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::string trace_path;
  std::string report_path;
  std::string text_report_path;
  bool json = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read scenario file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

/// Builtin names win over file names; a path that exists is read as a file.
ScenarioConfig load(const std::string& scenario, std::optional<std::uint64_t> seed,
                    const std::vector<std::string>& sets) {
  if (is_builtin(scenario)) return builtin_scenario(scenario, seed.value_or(1), sets);
  if (!std::filesystem::exists(scenario)) {
    std::string valid;
    for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("", "'" + scenario + "' is neither a scenario file nor a builtin (builtins: " + valid + ")");
  }
  ScenarioConfig c = parse_scenario(read_file(scenario));
  if (seed) c.seed = *seed;
  apply_overrides(c, sets);
  return c;
}

void run_command(const RunOptions& o, std::ostream& out) {
  const RunResult r = run_scenario(load(o.scenario, o.seed, o.sets));
  if (!o.trace_path.empty()) {
    std::string t;
    for (const auto& line : r.trace) t += line + "\n";
    write_file(o.trace_path, t);
  }
  if (!o.report_path.empty()) write_file(o.report_path, report_json(r));
  if (!o.text_report_path.empty()) write_file(o.text_report_path, report_text(r));
  out << (o.json ? report_json(r) : report_summary(r));
}

void geometry_command(const std::string& isa_text, const std::string& va_text, std::optional<unsigned> level,
                      std::ostream& out) {
  Isa isa;
  try {
    isa = parse_isa(isa_text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--isa", e.what());
  }
  VirtAddr va = 0;
  try {
    va = AddrExpr::parse(va_text).offset;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--va", e.what());
  }
  const auto& p = PagingProfile::get(isa);
  const unsigned lvl = level.value_or(0);
  if (lvl > p.root_level()) throw ConfigError("--level", "the " + isa_text + " profile has levels 0.." + std::to_string(p.root_level()));
  if (!p.level(lvl).global_bit) throw ConfigError("--level", "level " + std::to_string(lvl) + " has no global bit");

  out << "isa " << isa_name(isa) << "  va " << to_hex(va) << "\n";
  for (unsigned l = p.root_level() + 1; l-- > 0;) {
    const auto& d = p.level(l);
    out << "  level " << l << ": index " << p.index(l, va) << " (va bits " << d.va_shift + d.va_index_bits - 1
        << ":" << d.va_shift << "), " << d.entry_width_bits << "-bit entries";
    if (d.global_bit) out << ", global bit " << *d.global_bit;
    out << "\n";
  }
  const auto& d = p.level(lvl);
  out << "global_bit_offset(level " << lvl << ") = " << d.entry_width_bits << " * " << p.index(lvl, va) << " + "
      << *d.global_bit << " = " << global_bit_offset(p, lvl, va) << "\n";
  out << "flip direction: " << int(p.global_flip_to()) << "\n";
}

void sweep_command(const RunOptions& o, const std::string& param, const std::vector<std::string>& values,
                   std::ostream& out) {
  if (values.empty()) throw ConfigError("--values", "needs at least one value");
  std::vector<std::future<RunResult>> jobs;
  for (const auto& v : values) {
    auto sets = o.sets;
    sets.push_back(param + "=" + v);
    // Configs are built up front so a bad value is reported before any run starts.
    ScenarioConfig cfg = load(o.scenario, o.seed, sets);
    jobs.push_back(std::async(std::launch::async, [cfg = std::move(cfg)] { return run_scenario(cfg); }));
  }
  std::size_t width = param.size();
  for (const auto& v : values) width = std::max(width, v.size());
  out << std::left << std::setw(static_cast<int>(width)) << param << "  exploit_success  outcome          misdirections\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const RunResult r = jobs[i].get();
    std::string outcome = "-";
    if (!r.outcomes.empty()) outcome = std::string(outcome_name(r.outcomes.begin()->second));
    out << std::left << std::setw(static_cast<int>(width)) << values[i] << "  " << std::setw(15)
        << (r.verdict.exploit_success ? "true" : "false") << "  " << std::setw(15) << outcome << "  "
        << r.verdict.misdirection_count << "\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GbHammer simulator: RowHammer on page-table global bits and the resulting TLB sharing", "gbhammer-sim"};
  app.require_subcommand(1);

  RunOptions run_opts;
  auto* run = app.add_subcommand("run", "Run a scenario file or builtin and print its verdict");
  run->add_option("scenario", run_opts.scenario, "Scenario file or builtin name")->required();
  run->add_option("--seed", run_opts.seed, "Seed for DRAM cells, planting and ASLR");
  run->add_option("--set", run_opts.sets, "Override key=value (dotted path)")->take_all();
  run->add_option("--trace", run_opts.trace_path, "Write trace lines to this file");
  run->add_option("--report", run_opts.report_path, "Write the JSON report to this file");
  run->add_option("--text-report", run_opts.text_report_path, "Write the line-oriented report to this file");
  run->add_flag("--json", run_opts.json, "Print the JSON report instead of the summary");

  auto* list = app.add_subcommand("list-scenarios", "List builtin scenarios");

  std::string show_name;
  std::optional<std::uint64_t> show_seed;
  std::vector<std::string> show_sets;
  auto* show = app.add_subcommand("show", "Print the effective scenario document");
  show->add_option("scenario", show_name, "Scenario file or builtin name")->required();
  show->add_option("--seed", show_seed, "Seed");
  show->add_option("--set", show_sets, "Override key=value")->take_all();

  std::string isa_text;
  std::string va_text;
  std::optional<unsigned> level;
  auto* geometry = app.add_subcommand("geometry", "Print the global-bit offset of a va's entry");
  geometry->add_option("--isa", isa_text, "x86_64 | rv39 | armv7")->required();
  geometry->add_option("--va", va_text, "Virtual address (hex)")->required();
  geometry->add_option("--level", level, "Table level, 0 = leaf");

  RunOptions sweep_opts;
  std::string param;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "Run a scenario across values of one parameter");
  sweep->add_option("scenario", sweep_opts.scenario, "Scenario file or builtin name")->required();
  sweep->add_option("--param", param, "Dotted key to vary")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seed", sweep_opts.seed, "Seed");
  sweep->add_option("--set", sweep_opts.sets, "Fixed override key=value")->take_all();

  std::vector<std::string> argv_store{"gbhammer-sim"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      run_command(run_opts, out);
    } else if (*list) {
      for (const auto& name : builtin_names()) {
        out << std::left << std::setw(22) << name << builtin_scenario(name, 1).description << "\n";
      }
    } else if (*show) {
      out << serialize_scenario(load(show_name, show_seed, show_sets));
    } else if (*geometry) {
      geometry_command(isa_text, va_text, level, out);
    } else if (*sweep) {
      sweep_command(sweep_opts, param, values, out);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gbh::cli
