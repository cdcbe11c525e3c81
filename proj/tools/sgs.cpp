#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sgs/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Schrodinger evolution on star graphs with general vertex couplings"};
  app.require_subcommand(1);

  struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
  };
  Options opts;
  for (const auto& name : sgs::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opts.config, "JSON configuration file")->required();
    sub->add_option("--seed", opts.seed, "seed for randomized probe sets (default 42)");
    sub->add_option("--out", opts.out, "output directory for report.json and CSV files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto* sub = app.get_subcommands().front();
  const auto kind = sgs::experiment_kind_from_string(sub->get_name());
  std::optional<std::filesystem::path> out;
  if (opts.out) out = *opts.out;
  return sgs::run_file(kind, opts.config, opts.seed, out);
}
