#pragma once

/// \file app.hpp
/// Command-line entry point, kept in a header so tests can drive it.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dmdt/cli/config.hpp"
#include "dmdt/cli/dispatch.hpp"
#include "dmdt/cli/table.hpp"

namespace dmdt::cli {

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
};

/// Loads, overrides and validates the configuration named by `inv`.
inline RunConfig load_config(const Invocation& inv) {
  std::ifstream in(inv.config_path, std::ios::binary);
  if (!in) throw ConfigError({{"--config", "cannot read " + inv.config_path}});
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), inv.subcommand);
  if (inv.out) cfg.output_path = *inv.out;
  if (inv.format) cfg.output_format = *inv.format;
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.workers) cfg.workers = *inv.workers;
  return cfg;
}

/// Runs the tool; returns the process exit status.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Diversity-multiplexing-delay tradeoff toolkit for multihop MIMO ARQ networks",
               "dmdt"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"dmt", "point-to-point diversity-multiplexing tradeoff per hop"},
      {"dmdt-asymptotic", "high-SNR DMDT curves for fixed, FBL and VBL ARQ"},
      {"dmdt-finite", "finite-SNR outage, deadline and total error for fixed windows"},
      {"optimize-arq", "search per-hop ARQ windows minimizing the total error"},
      {"simulate", "Monte Carlo network simulation"},
      {"validate", "compare analytic values with simulation"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", inv.config_path, "JSON configuration file")->required();
    sub->add_option("--out", inv.out, "output file (default: configured path or stdout)");
    sub->add_option("--format", inv.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--seed", inv.seed, "random seed");
    sub->add_option("--workers", inv.workers, "worker threads")->check(CLI::Range(1u, 256u));
    sub->callback([&inv, name = name] { inv.subcommand = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidationFailure;
  }

  try {
    const RunConfig cfg = load_config(inv);
    const ResultTable table = dispatch(cfg);
    const std::string text = emit(table, cfg.output_format, cfg.output_path.value_or(""));
    out << text;
    return kOk;
  } catch (const std::exception& e) {
    err << "dmdt " << inv.subcommand << ": " << e.what() << "\n";
    return exit_code_for(std::current_exception());
  }
}

}  // namespace dmdt::cli
