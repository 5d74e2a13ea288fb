// Command-line front end: run a configuration, verify the operators against
// the reference oracles, or generate and check meshes.

#include <iostream>

#include <CLI11.hpp>

#include "angadapt/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Goal-oriented angular adaptivity for 2D steady transport"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run the adaptive loop described by a configuration file");
  run->add_option("config", config, "INI configuration")->required();

  bool perturb = false;
  auto* verify = app.add_subcommand("verify", "Check the discretisation against the oracle suite");
  verify->add_flag("--perturb-moments", perturb, "Corrupt the moment matrix before checking it");

  auto* mesh = app.add_subcommand("mesh", "Mesh utilities");
  mesh->require_subcommand(1);
  double length = 10.0, width = 1.0, h = 0.25;
  std::string out_path;
  auto* gen = mesh->add_subcommand("gen", "Write a duct mesh");
  gen->add_option("output", out_path, "Mesh file to write")->required();
  gen->add_option("--length", length, "Duct length between source and detector")->check(CLI::PositiveNumber);
  gen->add_option("--width", width, "Duct width")->check(CLI::PositiveNumber);
  gen->add_option("--cell-size", h, "Cell size h")->check(CLI::PositiveNumber);
  std::string in_path;
  auto* check = mesh->add_subcommand("check", "Validate a mesh file");
  check->add_option("mesh", in_path, "Mesh file")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) return angadapt::cmd_run(config, std::cout, std::cerr);
  if (*verify) return angadapt::cmd_verify({perturb}, std::cout);
  if (*gen) return angadapt::cmd_mesh_gen(length, width, h, out_path, std::cout, std::cerr);
  if (*check) return angadapt::cmd_mesh_check(in_path, std::cout, std::cerr);
  return 1;
}
