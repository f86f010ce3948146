#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("synthring");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("SYNTHRING_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only accept real ones.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("SYNTHRING_LOG='{}' not recognised (use trace, debug, info, warn, error, off)", env);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Synthetic frequency-dimension ring resonator simulator"};
  app.require_subcommand(1);
  synthring::cli::CommandOptions opts;
  std::string config, out;
  std::optional<double> flux, span;
  const std::pair<const char*, const char*> commands[] = {
      {"transmission", "static through-port transmission and resonance spacing"},
      {"spectrum", "modulated steady state: sideband spectra over a detuning sweep"},
      {"bands", "time-resolved band map, ridge and discrete levels"},
      {"ladder", "two-ring ladder: directionality and visibility vs detuning"},
      {"eigen", "tight-binding eigenmodes, Bloch bands and response"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "configuration file (INI)")->required();
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--jobs", opts.jobs, "parallel sweep workers")->check(CLI::PositiveNumber);
    sub->add_option("--flux", flux, "flux / right-ring phase offset, rad");
    sub->add_option("--detuning-span", span, "detuning sweep span, Hz");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  opts.config_path = config;
  opts.out_dir = out;
  opts.flux = flux;
  opts.detuning_span_hz = span;
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    synthring::cli::run_command(command, opts);
  } catch (const synthring::ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const synthring::NumericalError& e) {
    spdlog::error("numerical: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
