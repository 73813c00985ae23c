#include "wcs/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "wcs/errors.hpp"
#include "wcs/plots.hpp"

namespace wcs::exp {

System build_system(const ExperimentConfig& cfg) {
  validate(cfg);
  Stream rng = Stream::keyed(Purpose::Plants, {cfg.plant_seed});
  std::vector<PlantModel> plants;
  plants.reserve(static_cast<std::size_t>(cfg.m));
  for (int i = 0; i < cfg.m; ++i) {
    const double a = rng.uniform(cfg.a_min, cfg.a_max);
    plants.push_back(PlantModel::scalar(a, cfg.b, cfg.process_noise_var, 1.0, cfg.r_u));
  }
  return System(std::move(plants), ChannelModel(cfg.lambda_h), ObservationNoise(cfg.w_obs_var),
                cfg.state_clamp);
}

alloc::GaussianSimplexPolicy initial_policy(const ExperimentConfig& cfg) {
  Stream rng = Stream::keyed(Purpose::Pretrain, {cfg.train_seed, 0});
  return alloc::GaussianSimplexPolicy::make(cfg.m, cfg.p_max, cfg.hidden_sizes, rng);
}

alloc::GaussianSimplexPolicy policy_from_params(const ExperimentConfig& cfg, nn::MlpParams params) {
  const auto sizes = params.layer_sizes();
  if (sizes.size() < 2 || sizes.front() != 2 * cfg.m || sizes.back() != 2 * cfg.m)
    throw UsageError("checkpoint layer sizes do not match m = " + std::to_string(cfg.m));
  return alloc::GaussianSimplexPolicy(std::move(params), cfg.p_max, cfg.m);
}

std::shared_ptr<const alloc::Allocator> make_allocator(const std::string& name, const ExperimentConfig& cfg,
                                                       const nn::MlpParams* params) {
  if (name == "equal") return std::make_shared<alloc::EqualAllocator>(cfg.p_max);
  if (name == "control_aware") return std::make_shared<alloc::ControlAwareAllocator>(cfg.p_max);
  if (name == "learned") {
    if (!params) throw UsageError("learned allocator needs parameters");
    auto policy = std::make_shared<const alloc::GaussianSimplexPolicy>(policy_from_params(cfg, *params));
    return std::make_shared<alloc::PolicyAllocator>(std::move(policy), cfg.eval_stochastic, "learned");
  }
  throw UsageError("unknown allocator '" + name + "' (expected learned, equal, control_aware)");
}

TrainOutput train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  validate(cfg);
  const System system = build_system(cfg);
  TrainOutput out{initial_policy(cfg), {}, std::nullopt, 0, {}};

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    save_config((*out_dir / "config.cfg").string(), cfg);
  }

  if (cfg.pretrain) {
    const auto target = make_allocator(cfg.pretrain_target, cfg);
    rl::PretrainOptions popts;
    popts.n_samples = cfg.pretrain_samples;
    popts.epochs = cfg.pretrain_epochs;
    popts.alpha = cfg.pretrain_alpha;
    popts.clip_norm = cfg.clip_norm;
    out.pretrain = rl::pretrain_supervised(out.policy, *target, system, popts,
                                           Stream::keyed(Purpose::Pretrain, {cfg.train_seed, 1}));
    out.policy.net = out.pretrain->params;
  }

  rl::ReinforceOptions ropts;
  ropts.horizon = cfg.T_train;
  ropts.episodes = cfg.N;
  ropts.iterations = cfg.iterations;
  ropts.x0_std = cfg.x0_std;
  ropts.seed = cfg.train_seed;
  ropts.update = {cfg.gamma, cfg.alpha, cfg.baseline, cfg.clip_norm};

  rl::IterationHook hook;
  if (out_dir && cfg.checkpoint_every > 0) {
    hook = [&](const rl::TrainLogRow& row, const alloc::GaussianSimplexPolicy& policy) {
      if ((row.iteration + 1) % cfg.checkpoint_every != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06d.txt", row.iteration + 1);
      const auto path = *out_dir / name;
      nn::save_params(path.string(), policy.net);
      out.checkpoints.push_back(path);
    };
  }

  rl::ReinforceResult res = rl::run_reinforce(out.policy, system, ropts, hook);
  out.policy = std::move(res.policy);
  out.log = std::move(res.log);
  out.allocations_checked = res.allocations_checked;

  if (out_dir) {
    write_train_log_csv(*out_dir / "train_log.csv", out.log);
    write_timing_csv(*out_dir / "timing.csv", out.log);
    nn::save_params((*out_dir / "params_final.txt").string(), out.policy.net);
    if (!out.log.empty()) render_train_svg(*out_dir / "train.svg", to_series(out.log));
  }
  return out;
}

std::size_t EvalReport::index_of(const std::string& policy) const {
  const auto it = std::find(policies.begin(), policies.end(), policy);
  if (it == policies.end()) throw UsageError("EvalReport: no policy named '" + policy + "'");
  return static_cast<std::size_t>(it - policies.begin());
}

double EvalReport::mean(std::size_t policy) const {
  const auto& c = costs.at(policy);
  double s = 0.0;
  for (double v : c) s += v;
  return c.empty() ? 0.0 : s / static_cast<double>(c.size());
}

double EvalReport::median(std::size_t policy) const {
  auto c = costs.at(policy);
  if (c.empty()) return 0.0;
  std::sort(c.begin(), c.end());
  const std::size_t n = c.size();
  return n % 2 ? c[n / 2] : 0.5 * (c[n / 2 - 1] + c[n / 2]);
}

double EvalReport::win_rate(std::size_t a, std::size_t b) const {
  const auto& ca = costs.at(a);
  const auto& cb = costs.at(b);
  if (ca.empty()) return 0.0;
  std::size_t wins = 0;
  for (std::size_t k = 0; k < ca.size(); ++k) wins += ca[k] < cb[k] ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(ca.size());
}

Stream eval_stream(const ExperimentConfig& cfg, std::uint64_t k) {
  return Stream::keyed(Purpose::Eval, {cfg.eval_seed, k});
}

namespace {

rl::EpisodeTrace eval_episode(const ExperimentConfig& cfg, const System& system,
                              const alloc::Allocator& allocator, std::uint64_t k) {
  const Stream episode = eval_stream(cfg, k);
  Stream init = Stream::keyed(Purpose::Init, {episode.key()});
  const VectorXd x0 = rl::draw_initial_state(system, cfg.x0_std, init);
  return rl::rollout_episode(system, allocator, cfg.T_test, x0, episode);
}

}  // namespace

EvalReport evaluate(const ExperimentConfig& cfg, const System& system,
                    const std::vector<std::shared_ptr<const alloc::Allocator>>& allocators,
                    int n_eval_episodes) {
  if (allocators.empty()) throw UsageError("evaluate: at least one policy required");
  if (n_eval_episodes < 1) throw UsageError("evaluate: need at least one evaluation episode");
  EvalReport report;
  for (std::uint64_t k = 0; k < static_cast<std::uint64_t>(n_eval_episodes); ++k) report.seeds.push_back(k);
  for (const auto& a : allocators) {
    report.policies.push_back(a->name());
    std::vector<double> costs;
    costs.reserve(report.seeds.size());
    for (auto k : report.seeds) {
      costs.push_back(eval_episode(cfg, system, *a, k).total_cost());
      report.allocations_checked += static_cast<std::uint64_t>(cfg.T_test);
    }
    report.costs.push_back(std::move(costs));
  }
  return report;
}

rl::EpisodeTrace example_episode(const ExperimentConfig& cfg, const System& system,
                                 const alloc::Allocator& allocator, std::uint64_t k) {
  return eval_episode(cfg, system, allocator, k);
}

void write_eval_outputs(const EvalReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_compare_csv(out_dir / "compare.csv", report);
  write_summary_csv(out_dir / "summary.csv", report);
  render_compare_svg(out_dir / "compare.svg", to_table(report));
}

}  // namespace wcs::exp
