// Command-line front end: train, eval, compare, plot.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "wcs/config.hpp"
#include "wcs/harness.hpp"
#include "wcs/mlp.hpp"
#include "wcs/plots.hpp"

namespace fs = std::filesystem;
using namespace wcs;

namespace {

exp::ExperimentConfig load(const std::string& path) {
  exp::ExperimentConfig cfg = exp::load_config(path);
  exp::apply_env_overrides(cfg);
  exp::validate(cfg);
  return cfg;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_summary(const exp::EvalReport& r) {
  for (std::size_t p = 0; p < r.policies.size(); ++p) {
    std::cout << r.policies[p] << ": mean " << r.mean(p) << ", median " << r.median(p);
    if (p > 0) std::cout << ", " << r.policies[0] << " wins " << 100.0 * r.win_rate(0, p) << "%";
    std::cout << '\n';
  }
}

int run_eval(const std::string& config, const std::string& params, const std::vector<std::string>& baselines,
             const std::string& out) {
  const auto cfg = load(config);
  const fs::path dir(out);
  fs::create_directories(dir);
  exp::save_config((dir / "config.cfg").string(), cfg);
  const System system = exp::build_system(cfg);
  const nn::MlpParams net = nn::load_params(params);
  std::vector<std::shared_ptr<const alloc::Allocator>> allocators{exp::make_allocator("learned", cfg, &net)};
  for (const auto& b : baselines) allocators.push_back(exp::make_allocator(b, cfg));
  const auto report = exp::evaluate(cfg, system, allocators, cfg.n_eval_seeds);
  exp::write_eval_outputs(report, dir);
  for (const auto& a : allocators)
    exp::emit_plots(exp::example_episode(cfg, system, *a, 0), dir / ("episode_" + a->name() + ".svg"));
  print_summary(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power allocation for wireless control systems via policy gradient"};
  app.require_subcommand(1);

  std::string config, out, params, baselines = "equal,control_aware", in, kind;

  auto* train = app.add_subcommand("train", "Train a policy (optionally pre-trained) with REINFORCE");
  train->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a learned policy over the paired test seeds");
  eval->add_option("--config", config)->required()->check(CLI::ExistingFile);
  eval->add_option("--params", params, "Parameter checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out)->required();

  auto* compare = app.add_subcommand("compare", "Paired comparison of a learned policy against baselines");
  compare->add_option("--config", config)->required()->check(CLI::ExistingFile);
  compare->add_option("--params", params)->required()->check(CLI::ExistingFile);
  compare->add_option("--baselines", baselines, "Comma list of equal, control_aware")
      ->capture_default_str();
  compare->add_option("--out", out)->required();

  auto* plot = app.add_subcommand("plot", "Render an SVG figure from a CSV written by train/eval/compare");
  plot->add_option("--in", in, "Input CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--kind", kind)->required()->check(CLI::IsMember({"train", "episode", "compare"}));
  plot->add_option("--out", out, "Output SVG")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto cfg = load(config);
      const auto result = exp::train(cfg, fs::path(out));
      if (result.pretrain)
        std::cout << "pre-training logit MSE " << result.pretrain->final_logit_mse << '\n';
      if (!result.log.empty())
        std::cout << "iterations " << result.log.size() << ", final mean cost " << result.log.back().mean_cost
                  << '\n';
      std::cout << "wrote " << (fs::path(out) / "params_final.txt").string() << '\n';
      return 0;
    }
    if (*eval) return run_eval(config, params, {}, out);
    if (*compare) return run_eval(config, params, split_names(baselines), out);
    if (*plot) {
      if (kind == "train")
        exp::render_train_svg(out, exp::read_train_csv(in));
      else if (kind == "episode")
        exp::render_episode_svg(out, exp::read_episode_csv(in));
      else
        exp::render_compare_svg(out, exp::read_compare_csv(in));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
