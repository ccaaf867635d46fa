// shrinkerlab <scenario> --config <file> [--out <dir>] [--m <int>] [--tau-end <float>]
//
// Exit codes: 0 success or consistent verdict, 2 flagged verdict, 1 error.

#include <cstdio>
#include <exception>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "shrinkerlab/errors.hpp"
#include "shrinkerlab/io.hpp"
#include "shrinkerlab/labcli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for curve shortening flow and its rescaled flow"};
  app.set_version_flag("--version", shrinkerlab::version_string());
  std::string scenario, config_path, out_dir = "out";
  std::optional<int> m;
  std::optional<double> tau_end;
  app.add_option("scenario", scenario, "simulate | spectrum | gauge-residual | separation | rate")->required();
  app.add_option("--config", config_path, "flat key = value config file")->required();
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--m", m, "node count (overrides m)");
  app.add_option("--tau-end", tau_end, "final rescaled time (overrides tau_end)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const auto sc = shrinkerlab::parse_scenario(scenario);
    std::map<std::string, std::string> overrides;
    if (m) overrides["m"] = std::to_string(*m);
    if (tau_end) overrides["tau_end"] = shrinkerlab::format_double(*tau_end);
    const auto config = shrinkerlab::parse_config(shrinkerlab::read_text(config_path), sc, overrides);
    const auto result = shrinkerlab::run(config, out_dir);
    std::printf("%s\n", result.summary.dump(2).c_str());
    return result.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "shrinkerlab %s: %s\n", scenario.c_str(), e.what());
    return 1;
  }
}
