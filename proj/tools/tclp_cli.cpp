// tclp: run the resonance-fluorescence examples, print expansion structure,
// scan λ and run the verification suite.

#include <iostream>

#include "CLI11.hpp"
#include "tclp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"time-local projected dynamics"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  int order = 0;
  tclp::CliOptions opts;
  app.add_option("--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (overrides output.directory)");
  app.add_option("--order", order, "expansion order for expand, mean-equation order for sweep")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", opts.seed, "seed for randomized checks")->capture_default_str();
  app.add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  std::string example;
  auto* run = app.add_subcommand("run-example", "run one example: error-scaling, wick-rotation or nonlinear");
  run->add_option("name", example)->required()->check(CLI::IsMember({"error-scaling", "wick-rotation", "nonlinear"}));
  app.add_subcommand("expand", "print the composition sums of K_n and I_n");
  app.add_subcommand("verify", "run the acceptance checks");
  app.add_subcommand("sweep", "λ scan of the configured ansatz against exact propagation");

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  try {
    const tclp::RunConfig cfg = config_path.empty() ? tclp::parse_config_text("", "defaults")
                                                    : tclp::parse_config(config_path);
    if (!out_dir.empty()) opts.out_dir = out_dir;
    if (order > 0) opts.order = order;
    std::vector<std::string> args;
    if (sub == run) args.push_back(example);
    return tclp::dispatch(sub->get_name(), args, cfg, opts, std::cout);
  } catch (const tclp::ParseError& e) {
    std::cout << "FAIL error=parse line=" << e.line() << " key=" << e.key() << " message=\"" << e.what() << "\"\n";
  } catch (const tclp::ValidationError& e) {
    std::cout << "FAIL error=validation field=" << e.field() << " message=\"" << e.what() << "\"\n";
  } catch (const std::exception& e) {
    std::cout << "FAIL error=runtime message=\"" << e.what() << "\"\n";
  }
  return 2;
}
