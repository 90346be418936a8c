#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "stefan/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Free-boundary logistic model in a time-periodic environment"};
  std::string config_path;
  stefan::RunOptions opts;
  std::string out;
  bool verbose = false;
  app.add_option("--config", config_path, "run configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out, "output directory (default: [run] out, else .)");
  app.add_option("--jobs", opts.jobs, "worker threads, 0 = all cores");
  app.add_option("--horizon-scale", opts.horizon_scale, "multiplies simulation horizons")
      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag_callback("--version", [] {
    std::cout << "stefan " << stefan::kToolVersion << "\n";
    std::exit(0);
  });
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : stefan::exit_code_for(stefan::ErrorCode::InvalidArgument);
  }

  auto logger = spdlog::stderr_color_mt("stefan");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("STEFAN_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(env));
  if (verbose) spdlog::set_level(spdlog::level::debug);

  stefan::RunConfig config;
  try {
    config = stefan::load_config(config_path);
  } catch (const stefan::ConfigError& e) {
    for (const auto& issue : e.issues())
      spdlog::error("[{}] {}: {}{}", issue.section, issue.key, issue.message,
                    issue.offset ? fmt::format(" (offset {})", *issue.offset) : "");
    return stefan::exit_code_for(e.code());
  } catch (const stefan::Error& e) {
    spdlog::error("{}", e.what());
    return stefan::exit_code_for(e.code());
  }
  opts.out_dir = !out.empty() ? out : !config.out.empty() ? config.out : ".";
  return stefan::run(config, opts);
}
