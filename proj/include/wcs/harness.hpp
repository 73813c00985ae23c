#pragma once

// Experiment orchestration: roster construction, train, paired evaluation.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wcs/config.hpp"
#include "wcs/core.hpp"
#include "wcs/policy.hpp"
#include "wcs/trainer.hpp"

namespace wcs::exp {

// Scalar plants with a ~ U[a_min, a_max] drawn from plant_seed; shared by
// training and evaluation.
System build_system(const ExperimentConfig& cfg);

// Fresh policy network [2m, hidden_sizes..., 2m] seeded from train_seed.
alloc::GaussianSimplexPolicy initial_policy(const ExperimentConfig& cfg);

struct TrainOutput {
  alloc::GaussianSimplexPolicy policy;
  rl::TrainLog log;
  std::optional<rl::PretrainResult> pretrain;
  std::uint64_t allocations_checked = 0;
  std::vector<std::filesystem::path> checkpoints;
};

/// Optional supervised pre-training, then `iterations` REINFORCE iterations.
/// With an output directory, writes config.cfg, train_log.csv, timing.csv,
/// params_final.txt, checkpoint_<k>.txt every checkpoint_every iterations
/// and train.svg.
TrainOutput train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {});

struct EvalReport {
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;      // evaluation episode indices
  std::vector<std::vector<double>> costs;  // [policy][seed], undiscounted over T_test
  std::uint64_t allocations_checked = 0;

  std::size_t index_of(const std::string& policy) const;
  double mean(std::size_t policy) const;
  double median(std::size_t policy) const;
  // Fraction of seeds where policy a's cost is strictly below policy b's.
  double win_rate(std::size_t a, std::size_t b) const;
};

/// Episode stream for evaluation seed index k: (Eval, eval_seed, k). Every
/// policy sees the same x0, fading, noise and success draws for a given k.
Stream eval_stream(const ExperimentConfig& cfg, std::uint64_t k);

// Paired rollouts over T_test; the first allocator is the reference for win rates.
EvalReport evaluate(const ExperimentConfig& cfg, const System& system,
                    const std::vector<std::shared_ptr<const alloc::Allocator>>& allocators,
                    int n_eval_episodes);

// One T_test episode for plotting, on evaluation seed k.
rl::EpisodeTrace example_episode(const ExperimentConfig& cfg, const System& system,
                                 const alloc::Allocator& allocator, std::uint64_t k = 0);

// "learned" (from params), "equal", "control_aware".
std::shared_ptr<const alloc::Allocator> make_allocator(const std::string& name, const ExperimentConfig& cfg,
                                                       const nn::MlpParams* params = nullptr);

// Checkpoint must match the config's plant count; throws UsageError otherwise.
alloc::GaussianSimplexPolicy policy_from_params(const ExperimentConfig& cfg, nn::MlpParams params);

void write_eval_outputs(const EvalReport& report, const std::filesystem::path& out_dir);

}  // namespace wcs::exp
