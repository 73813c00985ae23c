#include "wcs/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wcs/errors.hpp"

namespace wcs::alloc {

GaussianSimplexPolicy::GaussianSimplexPolicy(nn::MlpParams net_, double p_max_, int m_)
    : net(std::move(net_)), p_max(p_max_), m(m_) {
  if (m < 1) throw UsageError("GaussianSimplexPolicy: m must be >= 1");
  if (!(p_max > 0.0)) throw UsageError("GaussianSimplexPolicy: p_max must be > 0");
  const auto sizes = net.layer_sizes();
  if (sizes.empty() || sizes.back() != 2 * m)
    throw UsageError("GaussianSimplexPolicy: network must emit 2m outputs");
  if (sizes.front() <= m) throw UsageError("GaussianSimplexPolicy: network input must cover [h; x]");
}

GaussianSimplexPolicy GaussianSimplexPolicy::make(int m, double p_max, const std::vector<int>& hidden,
                                                  Stream& rng) {
  std::vector<int> sizes{2 * m};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(2 * m);
  return GaussianSimplexPolicy(nn::init_params(sizes, rng), p_max, m);
}

VectorXd policy_input(const VectorXd& s_obs, int m) {
  if (m < 1 || s_obs.size() <= m) throw UsageError("policy_input: observation shorter than [h; x]");
  VectorXd in = s_obs;
  auto x = in.tail(s_obs.size() - m);
  x = x.cwiseMax(-kInputStateClip).cwiseMin(kInputStateClip) / kInputStateScale;
  return in;
}

PolicyHead head_from_output(const VectorXd& output, int m) {
  if (output.size() != 2 * m) throw UsageError("head_from_output: expected 2m outputs");
  if (!output.allFinite()) throw PolicyError("policy network produced non-finite outputs");
  static const double lo = std::log(kSigmaMin);
  static const double hi = std::log(kSigmaMax);
  PolicyHead head;
  head.mu = output.head(m);
  const VectorXd log_sigma = output.tail(m);
  head.sigma = log_sigma.array().exp().cwiseMax(kSigmaMin).cwiseMin(kSigmaMax);
  head.sigma_active = ((log_sigma.array() > lo) && (log_sigma.array() < hi)).cast<double>();
  return head;
}

PolicyHead policy_forward(const GaussianSimplexPolicy& policy, const VectorXd& net_input) {
  const auto cache = nn::forward(policy.net, net_input);
  return head_from_output(cache.output(), policy.m);
}

VectorXd softmax(const VectorXd& z) {
  const double zmax = z.maxCoeff();
  VectorXd e = (z.array() - zmax).exp();
  return e / e.sum();
}

AllocationSample sample_allocation(const VectorXd& mu, const VectorXd& sigma, double p_max, Stream& rng) {
  if (mu.size() != sigma.size()) throw UsageError("sample_allocation: mu and sigma lengths differ");
  if (!(sigma.array() > 0.0).all()) throw UsageError("sample_allocation: sigma must be > 0");
  AllocationSample s;
  s.mu = mu;
  s.sigma = sigma;
  s.z.resize(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) s.z[i] = mu[i] + sigma[i] * rng.normal();
  s.p = p_max * softmax(s.z);
  return s;
}

LogProbGrad log_prob_grad(const VectorXd& mu, const VectorXd& sigma, const VectorXd& z) {
  if (mu.size() != sigma.size() || mu.size() != z.size())
    throw UsageError("log_prob_grad: length mismatch");
  if (!(sigma.array() > 0.0).all()) throw UsageError("log_prob_grad: sigma must be > 0");
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Eigen::ArrayXd diff = (z - mu).array();
  const Eigen::ArrayXd var = sigma.array().square();
  LogProbGrad g;
  g.d_mu = (diff / var).matrix();
  g.d_log_sigma = (diff.square() / var - 1.0).matrix();
  g.log_prob = (-diff.square() / (2.0 * var) - sigma.array().log() - half_log_2pi).sum();
  return g;
}

VectorXd equal_allocation(int m, double p_max) {
  if (m < 1) throw UsageError("equal_allocation: m must be >= 1");
  return VectorXd::Constant(m, p_max / m);
}

VectorXd control_aware_allocation(const VectorXd& x, double p_max) {
  if (x.size() < 1) throw UsageError("control_aware_allocation: m must be >= 1");
  const VectorXd mag = x.cwiseAbs();
  const double top = mag.maxCoeff();
  if (!(top > 0.0) || !std::isfinite(top))
    return equal_allocation(static_cast<int>(x.size()), p_max);
  // Normalizing by the largest deviation keeps the squares in range.
  const VectorXd w = (mag / top).array().square().matrix();
  return p_max * w / w.sum();
}

Decision EqualAllocator::decide(const VectorXd&, const System& system, Stream&) const {
  return {equal_allocation(static_cast<int>(system.plant_count()), p_max_), std::nullopt};
}

Decision ControlAwareAllocator::decide(const VectorXd& s_obs, const System& system, Stream&) const {
  const auto m = static_cast<Eigen::Index>(system.plant_count());
  const VectorXd x = s_obs.tail(s_obs.size() - m);
  return {control_aware_allocation(system.deviations(x), p_max_), std::nullopt};
}

PolicyAllocator::PolicyAllocator(std::shared_ptr<const GaussianSimplexPolicy> policy, bool stochastic,
                                 std::string name)
    : policy_(std::move(policy)), stochastic_(stochastic), name_(std::move(name)) {
  if (!policy_) throw UsageError("PolicyAllocator: null policy");
}

Decision PolicyAllocator::decide(const VectorXd& s_obs, const System& system, Stream& rng) const {
  if (static_cast<int>(system.plant_count()) != policy_->m)
    throw UsageError("PolicyAllocator: policy was built for a different plant count");
  const PolicyHead head = policy_forward(*policy_, policy_input(s_obs, policy_->m));
  if (!stochastic_) return {policy_->p_max * softmax(head.mu), std::nullopt};
  AllocationSample s = sample_allocation(head.mu, head.sigma, policy_->p_max, rng);
  VectorXd p = s.p;
  return {std::move(p), std::move(s)};
}

bool is_feasible(const VectorXd& p, double p_max) {
  if (!p.allFinite() || (p.array() < 0.0).any()) return false;
  return std::abs(p.sum() - p_max) <= 1e-9 * p_max;
}

}  // namespace wcs::alloc
