#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "proxsplit/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"proxsplit: proximal splitting solvers and certificates"};
  std::string command;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  app.add_option("command", command, "solve | certify | compare | generate")
      ->required()
      ->check(CLI::IsMember({"solve", "certify", "compare", "generate"}));
  app.add_option("config", config, "JSON config file")->required();
  auto* out_opt = app.add_option("--out", out, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return proxsplit::cli::config_error;
  }
  proxsplit::cli::Options opt;
  opt.config = config;
  if (*out_opt) opt.out = out;
  if (*seed_opt) opt.seed = seed;
  return proxsplit::cli::run(command, opt, std::cout, std::cerr);
}
