#pragma once

// Budget-feasible stochastic power allocation: a Gaussian over latent logits
// pushed through p_max * softmax, plus the two heuristic allocators.

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>

#include "wcs/core.hpp"
#include "wcs/mlp.hpp"
#include "wcs/rng.hpp"

namespace wcs::alloc {

using Eigen::VectorXd;

inline constexpr double kSigmaMin = 1e-3;
inline constexpr double kSigmaMax = 2.0;
inline constexpr double kInputStateClip = 100.0;
inline constexpr double kInputStateScale = 10.0;

// Network maps the standardized observation [h; x] (2m inputs for scalar
// plants) to 2m outputs: m means followed by m log-sigmas.
struct GaussianSimplexPolicy {
  nn::MlpParams net;
  double p_max = 1.0;
  int m = 1;

  GaussianSimplexPolicy(nn::MlpParams net, double p_max, int m);

  // Fresh network [2m, hidden..., 2m].
  static GaussianSimplexPolicy make(int m, double p_max, const std::vector<int>& hidden, Stream& rng);
};

struct PolicyHead {
  VectorXd mu;
  VectorXd sigma;
  // 1 where log-sigma lies inside the clamp range (gradient flows), else 0.
  VectorXd sigma_active;
};

struct AllocationSample {
  VectorXd z;  // latent Gaussian draw
  VectorXd p;  // p_max * softmax(z)
  VectorXd mu;
  VectorXd sigma;
};

// [h; clip(x, +-100) / 10] where s_obs = [h; x] and h has length m.
VectorXd policy_input(const VectorXd& s_obs, int m);

// Split a raw 2m network output into (mu, clamped sigma).
PolicyHead head_from_output(const VectorXd& output, int m);

// Forward pass on an already standardized input.
PolicyHead policy_forward(const GaussianSimplexPolicy& policy, const VectorXd& net_input);

VectorXd softmax(const VectorXd& z);

AllocationSample sample_allocation(const VectorXd& mu, const VectorXd& sigma, double p_max, Stream& rng);

struct LogProbGrad {
  VectorXd d_mu;
  VectorXd d_log_sigma;
  double log_prob = 0.0;
};

// Score of the diagonal Gaussian density of z.
LogProbGrad log_prob_grad(const VectorXd& mu, const VectorXd& sigma, const VectorXd& z);

VectorXd equal_allocation(int m, double p_max);

// p_i proportional to |x_i|^2; equal split when every deviation is zero.
VectorXd control_aware_allocation(const VectorXd& x, double p_max);

/// One allocation decision made from the observed state.
struct Decision {
  VectorXd p;
  std::optional<AllocationSample> sample;  // set for stochastic policies
};

/// Something that picks a power vector from the observed state [h~; x~].
class Allocator {
 public:
  virtual ~Allocator() = default;
  virtual std::string name() const = 0;
  virtual double budget() const = 0;
  virtual Decision decide(const VectorXd& s_obs, const System& system, Stream& rng) const = 0;
};

class EqualAllocator final : public Allocator {
 public:
  explicit EqualAllocator(double p_max) : p_max_(p_max) {}
  std::string name() const override { return "equal"; }
  double budget() const override { return p_max_; }
  Decision decide(const VectorXd& s_obs, const System& system, Stream& rng) const override;

 private:
  double p_max_;
};

class ControlAwareAllocator final : public Allocator {
 public:
  explicit ControlAwareAllocator(double p_max) : p_max_(p_max) {}
  std::string name() const override { return "control_aware"; }
  double budget() const override { return p_max_; }
  Decision decide(const VectorXd& s_obs, const System& system, Stream& rng) const override;

 private:
  double p_max_;
};

// Samples z ~ N(mu, sigma^2) when stochastic; otherwise uses p_max * softmax(mu).
class PolicyAllocator final : public Allocator {
 public:
  PolicyAllocator(std::shared_ptr<const GaussianSimplexPolicy> policy, bool stochastic,
                  std::string name = "learned");
  std::string name() const override { return name_; }
  double budget() const override { return policy_->p_max; }
  Decision decide(const VectorXd& s_obs, const System& system, Stream& rng) const override;

  const GaussianSimplexPolicy& policy() const { return *policy_; }

 private:
  std::shared_ptr<const GaussianSimplexPolicy> policy_;
  bool stochastic_;
  std::string name_;
};

// p_i >= 0 and |sum p - p_max| <= 1e-9 p_max.
bool is_feasible(const VectorXd& p, double p_max);

}  // namespace wcs::alloc
