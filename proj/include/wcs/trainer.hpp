#pragma once

// Episode generation over the simulated system, discounted costs-to-go,
// the batched REINFORCE update and supervised pre-training of the policy.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "wcs/core.hpp"
#include "wcs/mlp.hpp"
#include "wcs/policy.hpp"
#include "wcs/rng.hpp"

namespace wcs::rl {

using Eigen::VectorXd;

struct StepRecord {
  SystemState state;  // true s_t
  VectorXd observed;  // s~_t, what the allocator saw
  VectorXd p;
  std::optional<alloc::AllocationSample> sample;
  std::vector<std::uint8_t> closed;  // per plant: control packet decoded
  double cost = 0.0;                 // r_{t+1} = stage_cost(x_{t+1})
};

struct EpisodeTrace {
  VectorXd x0;
  std::vector<StepRecord> steps;
  VectorXd final_x;
  bool clamped = false;  // some state hit the clamp during the episode

  std::size_t length() const { return steps.size(); }
  VectorXd costs() const;
  double discounted_cost(double gamma) const;
  double total_cost() const;
};

// x0 ~ N(0, x0_std^2) per state coordinate.
VectorXd draw_initial_state(const System& system, double x0_std, Stream& rng);

/// Simulate T steps from x0.
///
/// Every random quantity is drawn from a substream of `episode` keyed by its
/// role: fading, Bernoulli success and process noise per (step, plant),
/// observation noise per step, and policy sampling per step. Two allocators
/// run with the same episode stream therefore face identical fading, noise
/// and success draws. Each allocation is checked for feasibility (throws
/// EpisodeError on violation); states are clamped to +-state_clamp.
EpisodeTrace rollout_episode(const System& system, const alloc::Allocator& allocator, int T,
                             const VectorXd& x0, const Stream& episode);

// R_{T-1} = r_T, R_t = r_{t+1} + gamma R_{t+1}.
VectorXd returns(const VectorXd& costs, double gamma);
VectorXd returns(const EpisodeTrace& trace, double gamma);

struct GradientEstimate {
  nn::MlpGrad grad;  // (1/N) sum_e sum_t gamma^t (R_t - b_t) grad log pi
  double mean_discounted_cost = 0.0;
  double mean_total_cost = 0.0;
};

/// REINFORCE estimate of the gradient of the expected discounted cost-to-go.
/// With `baseline`, b_t is the batch mean of R_t at step t; otherwise b_t = 0.
/// All traces must come from the stochastic policy and share one length.
GradientEstimate policy_gradient(const alloc::GaussianSimplexPolicy& policy,
                                 std::span<const EpisodeTrace> traces, double gamma, bool baseline);

struct TrainLogRow {
  int iteration = 0;
  double mean_cost = 0.0;        // discounted with the training gamma
  double mean_total_cost = 0.0;  // undiscounted
  double grad_norm = 0.0;        // before clipping
  double elapsed_s = 0.0;
  bool skipped = false;  // non-finite gradient, parameters left unchanged
};

using TrainLog = std::vector<TrainLogRow>;

struct UpdateOptions {
  double gamma = 0.95;
  double alpha = 2e-3;
  bool baseline = true;
  double clip_norm = nn::kDefaultClipNorm;
};

struct UpdateResult {
  nn::MlpParams params;
  TrainLogRow row;
};

// One descent step theta <- theta - alpha * g on the batch.
UpdateResult reinforce_update(const alloc::GaussianSimplexPolicy& policy,
                              std::span<const EpisodeTrace> traces, const UpdateOptions& opts,
                              int iteration = 0);

struct ReinforceOptions {
  int horizon = 5;
  int episodes = 1000;
  int iterations = 100;
  double x0_std = 1.0;
  std::uint64_t seed = 1;
  UpdateOptions update;
};

using IterationHook = std::function<void(const TrainLogRow&, const alloc::GaussianSimplexPolicy&)>;

struct ReinforceResult {
  alloc::GaussianSimplexPolicy policy;
  TrainLog log;
  std::uint64_t allocations_checked = 0;
};

/// Algorithm loop: per iteration, roll out `episodes` episodes with the
/// current stochastic policy and apply one reinforce_update. Episode e of
/// iteration k uses the stream keyed (Train, seed, k, e), so runs are
/// bit-reproducible.
ReinforceResult run_reinforce(alloc::GaussianSimplexPolicy policy, const System& system,
                              const ReinforceOptions& opts, const IterationHook& hook = {});

struct PretrainOptions {
  int n_samples = 4000;
  int epochs = 200;
  double alpha = 0.03;
  int batch_size = 32;
  double state_std = 5.0;
  double share_floor = 1e-4;  // heuristic shares below this map to ln(floor)
  double clip_norm = nn::kDefaultClipNorm;
};

struct PretrainResult {
  nn::MlpParams params;
  std::vector<double> epoch_loss;
  double final_logit_mse = 0.0;  // mu-head vs inverse-softmax targets
};

/// Regress the mu-head onto centered log-shares of `target`'s allocation and
/// the log-sigma head onto 0, over states x ~ N(0, state_std^2) and fading
/// from the channel law. Throws TrainingError if the epoch loss rises for 10
/// consecutive epochs.
PretrainResult pretrain_supervised(const alloc::GaussianSimplexPolicy& policy,
                                   const alloc::Allocator& target, const System& system,
                                   const PretrainOptions& opts, Stream rng);

}  // namespace wcs::rl
