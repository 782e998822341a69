// Experiment CLI: entropy-regularized (unbalanced) transport solvers driven
// by JSON configs.  See README.md for the config schema.

#include "uot/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  double epsilon = -1;  // < 0: keep the config value
  int max_iter = -1;
  unsigned seed = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config path")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--epsilon", args.epsilon, "override the config epsilon");
  cmd->add_option("--max-iter", args.max_iter, "override the solver iteration cap");
  cmd->add_option("--seed", args.seed, "seed for synthetic generators");
}

int run(const std::string& problem, const CommonArgs& args) {
  nlohmann::json cfg;
  {
    std::ifstream in(args.config_path);
    if (!in) {
      std::cerr << "error: cannot open config " << args.config_path << "\n";
      return 2;
    }
    try {
      in >> cfg;
    } catch (const std::exception& e) {
      std::cerr << "error: invalid JSON: " << e.what() << "\n";
      return 2;
    }
  }
  if (cfg.contains("problem") && cfg.at("problem") != problem) {
    std::cerr << "error: config is for problem '" << cfg.at("problem").get<std::string>()
              << "', invoked subcommand '" << problem << "'\n";
    return 2;
  }
  cfg["problem"] = problem;
  if (args.epsilon > 0) cfg["epsilon"] = args.epsilon;
  if (args.max_iter > 0) cfg["solver"]["max_iter"] = args.max_iter;

  try {
    uot::run_experiment(cfg, args.out_dir, args.seed);
  } catch (const uot::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const uot::solver_error& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "wrote results to " << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scaling-iteration solvers for entropy-regularized unbalanced transport"};
  app.require_subcommand(1);

  const std::vector<std::string> problems = {"transport", "barycenter", "flow",
                                             "mass",      "generalized", "colortransfer"};
  std::map<std::string, CommonArgs> args;
  for (const auto& p : problems) {
    auto* cmd = app.add_subcommand(p, p + " experiment");
    add_common(cmd, args[p]);
  }

  CLI11_PARSE(app, argc, argv);
  for (const auto& p : problems)
    if (app.got_subcommand(p)) return run(p, args[p]);
  return 2;
}
