// purcellsim command line: simulate, analyze, preset-list, render-sequence, purcell.
//
// Exit codes: 0 success, 1 I/O or runtime failure, 2 usage, parse or
// validation error, 3 an estimator had no defined value (report written).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "purcellsim/config.hpp"
#include "purcellsim/errors.hpp"
#include "purcellsim/pipeline.hpp"
#include "purcellsim/purcell.hpp"
#include "purcellsim/report.hpp"

using namespace purcellsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitUndefined = 3;

std::string preset_table() {
  std::ostringstream os;
  os << "Presets:\n";
  for (const PresetInfo& p : preset_catalog())
    os << "  " << p.name << std::string(8 - std::min<std::size_t>(7, p.name.size()), ' ')
       << p.description << '\n';
  return os.str();
}

std::string default_out_dir() {
  if (const char* env = std::getenv("PURCELLSIM_OUT_DIR"); env && *env) return env;
  return "purcellsim-out";
}

struct Source {
  std::string preset;
  std::string config;
};

void add_source(CLI::App* cmd, Source& s) {
  auto* p = cmd->add_option("--preset", s.preset, "Start from a named preset");
  auto* c = cmd->add_option("--config", s.config, "Configuration file (key = value with [sections])")
                ->check(CLI::ExistingFile);
  p->excludes(c);
}

RunConfig resolve(const Source& s) {
  if (!s.config.empty()) return load_config(s.config);
  if (!s.preset.empty()) return preset(s.preset);
  return RunConfig{};
}

int finish(const RunArtifacts& a) {
  std::cout << a.report.text();
  return a.status == RunStatus::ok ? kExitOk : kExitUndefined;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo of Purcell-enhanced single-ion emission in a tunable nanocavity"};
  app.require_subcommand(1);
  app.footer("\n" + preset_table() +
             "\nEnvironment: PURCELLSIM_OUT_DIR sets the default --out-dir.\n"
             "Exit codes: 0 ok, 1 I/O or runtime error, 2 usage or validation error,\n"
             "            3 undefined estimate (reported in report.txt).");

  Source src;
  std::optional<std::uint64_t> seed, cycles;
  std::optional<int> threads;
  std::string out_dir = default_out_dir();
  std::string format;
  bool serial = false;

  auto* sim = app.add_subcommand("simulate", "Run a preset or configuration and write artifacts");
  add_source(sim, src);
  sim->add_option("--seed", seed, "Root seed");
  sim->add_option("--cycles", cycles, "Excitation cycles per run");
  sim->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  sim->add_option("--format", format, "Time-tag format")->check(CLI::IsMember({"csv", "binary"}));
  sim->add_option("--threads", threads, "Worker threads (0: OpenMP default)");
  sim->add_flag("--serial", serial, "Use the serial reference kernel");

  std::string input;
  std::optional<int> max_offset, bootstrap;
  auto* ana = app.add_subcommand("analyze", "Run the estimators on an existing time-tag file");
  ana->add_option("input", input, "Time-tag file (CSV or binary)")->required();
  add_source(ana, src);
  ana->add_option("--max-offset", max_offset, "Largest g2 offset in cycles");
  ana->add_option("--bootstrap", bootstrap, "Bootstrap replicates for g2 errors");
  ana->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();

  std::string show;
  auto* list = app.add_subcommand("preset-list", "List presets, or print one as a configuration");
  list->add_option("name", show, "Preset to print");

  double step_us = 0.1;
  auto* render = app.add_subcommand("render-sequence", "Print the pulse sequence as CSV");
  add_source(render, src);
  render->add_option("--step-us", step_us, "Sampling step")->capture_default_str();

  auto* purcell = app.add_subcommand("purcell", "Purcell factors of the configured mode and cavity");
  add_source(purcell, src);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*list) {
      if (show.empty()) {
        std::cout << preset_table();
      } else {
        print_config(std::cout, preset(show));
      }
      return kExitOk;
    }
    RunConfig cfg = resolve(src);
    if (*sim) {
      if (seed) cfg.seed = *seed;
      if (cycles) cfg.cycles = *cycles;
      if (threads) cfg.threads = *threads;
      if (!format.empty()) cfg.output.format = format == "csv" ? TagFormat::csv : TagFormat::binary;
      cfg.validate();
      RunOptions opt;
      opt.mode = serial ? Execution::serial : Execution::parallel;
      const RunArtifacts a = run_config(cfg, opt);
      write_artifacts(out_dir, a, cfg);
      return finish(a);
    }
    if (*ana) {
      if (max_offset) cfg.analysis.g2_max_offset = *max_offset;
      if (bootstrap) cfg.analysis.g2_bootstrap = *bootstrap;
      cfg.validate();
      const TimeTagStream s = load_timetags(input);
      const RunArtifacts a = analyze_stream(s, cfg);
      write_artifacts(out_dir, a, cfg);
      return finish(a);
    }
    if (*render) {
      render_sequence_csv(std::cout, build_sequence(cfg.sequence.spec), step_us);
      return kExitOk;
    }
    if (*purcell) {
      const ModeProfile profile = build_profile(cfg.profile);
      const PurcellSummary s = summarize_purcell(profile, cfg.cavity);
      Report r;
      r.add("purcell.v_mode_um3", s.v_mode_um3);
      r.add("purcell.v_eff_um3", s.v_eff_um3);
      r.add("purcell.p_max", s.p_max);
      r.add("purcell.p_avg", s.p_avg);
      for (const auto& [k, v] : r.entries()) std::cout << k << " = " << v << '\n';
      return kExitOk;
    }
  } catch (const ParseError& e) {
    std::cerr << "purcellsim: parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    std::cerr << "purcellsim: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "purcellsim: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "purcellsim: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "purcellsim: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
