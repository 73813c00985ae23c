#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wcs::exp {

/// Every scenario knob. File format is flat `key = value` text, one key per
/// line, `#` starts a comment; unknown or repeated keys are rejected and
/// missing keys keep the defaults below.
struct ExperimentConfig {
  // scenario
  int m = 15;
  double p_max = 6.0;
  double lambda_h = 1.0;
  double w_obs_var = 0.0;
  // scalar plant roster: a ~ U[a_min, a_max], b, W, Q = 1
  double a_min = 1.05;
  double a_max = 1.3;
  double b = 1.0;
  double process_noise_var = 0.1;
  double r_u = 1e-6;
  double x0_std = 1.0;
  double state_clamp = 1e4;
  // training
  int T_train = 5;
  int T_test = 30;
  double gamma = 0.95;
  double alpha = 2e-3;
  int N = 1000;
  int iterations = 100;
  bool baseline = true;
  double clip_norm = 10.0;
  std::vector<int> hidden_sizes{64, 64};
  bool pretrain = false;
  std::string pretrain_target = "control_aware";
  int pretrain_samples = 4000;
  int pretrain_epochs = 200;
  double pretrain_alpha = 0.03;
  int checkpoint_every = 0;  // 0 disables intermediate checkpoints
  // evaluation
  int n_eval_seeds = 20;
  bool eval_stochastic = false;
  // seeds
  std::uint64_t plant_seed = 1;
  std::uint64_t train_seed = 2;
  std::uint64_t eval_seed = 3;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Throws ConfigError naming the first offending key.
void validate(const ExperimentConfig& cfg);

// Canonical text form; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& cfg);
void save_config(const std::string& path, const ExperimentConfig& cfg);

// WCS_PLANT_SEED, WCS_TRAIN_SEED, WCS_EVAL_SEED replace the matching seeds.
void apply_env_overrides(ExperimentConfig& cfg);

}  // namespace wcs::exp
