#include "resilsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "resilsim/errors.hpp"
#include "resilsim/metrics.hpp"
#include "resilsim/scenario.hpp"
#include "resilsim/simulator.hpp"

namespace resilsim::cli {
namespace {

namespace fs = std::filesystem;

struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  bool trace = false;
  std::vector<std::string> toggles;
};

sim::Scenario load(const Options& opts) {
  sim::Scenario s = sim::load_scenario_file(opts.scenario);
  if (opts.seed) s.seed = *opts.seed;
  return s;
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw OutputError("cannot write " + path.string());
  f << contents;
  f.close();
  if (!f) throw OutputError("cannot write " + path.string());
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw OutputError("cannot create output directory " + dir.string());
}

void set_toggle(sim::Toggles& toggles, const std::string& name, bool value) {
  if (name == "breaker_enabled") {
    toggles.breaker_enabled = value;
  } else if (name == "health_checks_enabled") {
    toggles.health_checks_enabled = value;
  }
}

int cmd_validate(const Options& opts, std::ostream& out) {
  load(opts);
  out << "OK\n";
  return kExitOk;
}

int cmd_run(const Options& opts, std::ostream& out) {
  const sim::Scenario s = load(opts);
  const sim::RunResult result = sim::run(s);
  const fs::path dir(opts.out);
  prepare_out_dir(dir);
  const std::string table = metrics::format_table(result.report);
  write_file(dir / "report.json", metrics::to_json(result.report).dump(2) + "\n");
  write_file(dir / "report.txt", table);
  if (opts.trace) write_file(dir / "trace.log", sim::format_trace_log(result.log));
  out << table;
  return kExitOk;
}

int cmd_compare(const Options& opts, std::ostream& out) {
  sim::Scenario treated = load(opts);
  sim::Scenario baseline = treated;
  for (const auto& name : opts.toggles) {
    set_toggle(baseline.toggles, name, false);
    set_toggle(treated.toggles, name, true);
  }
  auto baseline_run = std::async(std::launch::async, [&] { return sim::run(baseline).report; });
  const metrics::MetricsReport treated_report = sim::run(treated).report;
  const metrics::Comparison cmp = metrics::compare(baseline_run.get(), treated_report);

  const fs::path dir(opts.out);
  prepare_out_dir(dir);
  const std::string table = metrics::format_table(cmp);
  write_file(dir / "comparison.json", metrics::to_json(cmp).dump(2) + "\n");
  write_file(dir / "comparison.txt", table);
  out << table;
  return kExitOk;
}

}  // namespace

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fault-injection simulator for resilient microservice topologies", "resilsim"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", opts.scenario, "Scenario document")->required();
  };
  auto add_seed_out = [&](CLI::App* sub) {
    sub->add_option("--seed", opts.seed, "Override the scenario seed");
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
  };

  CLI::App* validate = app.add_subcommand("validate", "Check a scenario document");
  add_common(validate);

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write its report");
  add_common(run);
  add_seed_out(run);
  run->add_flag("--trace", opts.trace, "Also write trace.log");

  CLI::App* compare = app.add_subcommand("compare", "A/B run with toggles off then on");
  add_common(compare);
  add_seed_out(compare);
  compare->add_option("--toggle", opts.toggles, "Toggle to switch (repeatable)")
      ->check(CLI::IsMember({"breaker_enabled", "health_checks_enabled"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate) return cmd_validate(opts, out);
    if (*run) return cmd_run(opts, out);
    return cmd_compare(opts, out);
  } catch (const std::system_error& e) {
    err << "error: cannot read scenario " << opts.scenario << ": " << e.code().message() << "\n";
    return kExitMissingInput;
  } catch (const SchemaError& e) {
    err << "error: " << opts.scenario << ": " << e.what() << "\n";
    return kExitInvalidScenario;
  } catch (const CycleError& e) {
    err << "error: " << opts.scenario << ": " << e.what() << "\n";
    return kExitInvalidScenario;
  } catch (const OutputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitOutputFailure;
  }
}

}  // namespace resilsim::cli
