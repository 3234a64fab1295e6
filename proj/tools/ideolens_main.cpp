#include <CLI11.hpp>
#include <iostream>

#include "ideolens/error.hpp"
#include "ideolens/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace ideolens;

  CLI::App app{"ideolens: language-ideology evaluation harness"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string domain, experiment;
  std::uint64_t seed = 0;
  int concurrency = 0;
  std::string out_dir;
  bool strict = false;

  for (const char* name : {"generate", "score", "analyze", "report"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("--domain", domain, "role-nouns | pronouns")
        ->check(CLI::IsMember({"role-nouns", "pronouns"}));
    sub->add_option("--experiment", experiment, "1 | 2")->check(CLI::IsMember({"1", "2"}));
    sub->add_option("--seed", seed, "Mock backend seed");
    sub->add_option("--concurrency", concurrency, "Requests in flight")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_flag("--strict", strict, "Abort on the first scoring failure");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_code::kConfig;
  }

  auto* sub = app.get_subcommands().front();
  Overrides o;
  if (!domain.empty()) o.domain = parse_domain(domain);
  if (!experiment.empty()) o.experiment = experiment == "1" ? Experiment::Exp1 : Experiment::Exp2;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--concurrency")) o.concurrency = concurrency;
  if (!out_dir.empty()) o.out = out_dir;
  o.strict = strict;
  return run_command(sub->get_name(), config_path, o, std::cout, std::cerr);
}
