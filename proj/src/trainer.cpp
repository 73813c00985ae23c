#include "wcs/trainer.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "wcs/errors.hpp"

namespace wcs::rl {

VectorXd EpisodeTrace::costs() const {
  VectorXd r(static_cast<Eigen::Index>(steps.size()));
  for (std::size_t t = 0; t < steps.size(); ++t) r[static_cast<Eigen::Index>(t)] = steps[t].cost;
  return r;
}

double EpisodeTrace::discounted_cost(double gamma) const {
  double total = 0.0;
  double w = 1.0;
  for (const auto& s : steps) {
    total += w * s.cost;
    w *= gamma;
  }
  return total;
}

double EpisodeTrace::total_cost() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.cost;
  return total;
}

VectorXd draw_initial_state(const System& system, double x0_std, Stream& rng) {
  if (!(x0_std >= 0.0)) throw UsageError("draw_initial_state: x0_std must be >= 0");
  VectorXd x(system.state_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal(0.0, x0_std);
  return x;
}

EpisodeTrace rollout_episode(const System& system, const alloc::Allocator& allocator, int T,
                             const VectorXd& x0, const Stream& episode) {
  if (T < 1) throw UsageError("rollout_episode: horizon must be >= 1");
  if (x0.size() != system.state_dim()) throw UsageError("rollout_episode: x0 dimension mismatch");
  const std::size_t m = system.plant_count();
  const auto mi = static_cast<Eigen::Index>(m);
  const auto& plants = system.plants();
  const double clamp = system.state_clamp();
  const double p_max = allocator.budget();

  EpisodeTrace trace;
  trace.x0 = x0;
  trace.steps.reserve(static_cast<std::size_t>(T));
  VectorXd x = x0;
  VectorXd uniforms(mi);
  std::vector<VectorXd> noise(m);

  for (int t = 0; t < T; ++t) {
    const auto tt = static_cast<std::uint64_t>(t);
    StepRecord rec;
    rec.state.h.resize(mi);
    for (std::size_t i = 0; i < m; ++i) {
      Stream cell = Stream::keyed(Purpose::Step, {episode.key(), tt, i});
      rec.state.h[static_cast<Eigen::Index>(i)] = cell.exponential(system.channel().lambda_h);
      uniforms[static_cast<Eigen::Index>(i)] = cell.uniform();
      noise[i] = draw_process_noise(plants[i], cell);
    }
    rec.state.x = x;

    Stream obs_rng = Stream::keyed(Purpose::Observe, {episode.key(), tt});
    rec.observed = observe(rec.state, system.observation(), obs_rng);

    Stream policy_rng = Stream::keyed(Purpose::Policy, {episode.key(), tt});
    alloc::Decision d = allocator.decide(rec.observed, system, policy_rng);
    if (d.p.size() != mi || !alloc::is_feasible(d.p, p_max))
      throw EpisodeError("allocator '" + allocator.name() + "' returned an infeasible allocation");
    rec.p = std::move(d.p);
    rec.sample = std::move(d.sample);

    const VectorXd x_obs = rec.observed.tail(system.state_dim());
    VectorXd next(system.state_dim());
    rec.closed.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double q = packet_success_prob(rec.state.h[ii], rec.p[ii]);
      const bool closed = uniforms[ii] < q;
      rec.closed[i] = closed ? 1 : 0;
      const auto& plant = plants[i];
      const VectorXd xi = system.plant_state(x, i);
      const VectorXd u = -plant.K() * system.plant_state(x_obs, i);
      next.segment(system.offset(i), plant.state_dim()) = step_plant(plant, xi, u, closed, noise[i]);
    }
    if (!next.allFinite()) throw EpisodeError("rollout_episode: non-finite state at step " + std::to_string(t));
    if ((next.array().abs() > clamp).any()) {
      trace.clamped = true;
      next = next.cwiseMax(-clamp).cwiseMin(clamp);
    }
    x = next;
    rec.cost = stage_cost(x, plants);
    trace.steps.push_back(std::move(rec));
  }
  trace.final_x = x;
  return trace;
}

VectorXd returns(const VectorXd& costs, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw UsageError("returns: gamma must lie in (0, 1]");
  VectorXd R(costs.size());
  double acc = 0.0;
  for (Eigen::Index t = costs.size(); t-- > 0;) {
    acc = costs[t] + gamma * acc;
    R[t] = acc;
  }
  return R;
}

VectorXd returns(const EpisodeTrace& trace, double gamma) { return returns(trace.costs(), gamma); }

GradientEstimate policy_gradient(const alloc::GaussianSimplexPolicy& policy,
                                 std::span<const EpisodeTrace> traces, double gamma, bool baseline) {
  if (traces.empty()) throw UsageError("policy_gradient: empty batch");
  const std::size_t T = traces.front().length();
  const auto n = static_cast<double>(traces.size());
  std::vector<VectorXd> R;
  R.reserve(traces.size());
  VectorXd mean_R = VectorXd::Zero(static_cast<Eigen::Index>(T));
  GradientEstimate est{nn::MlpParams::zeros(policy.net.layer_sizes()), 0.0, 0.0};
  for (const auto& tr : traces) {
    if (tr.length() != T) throw UsageError("policy_gradient: traces differ in length");
    R.push_back(returns(tr, gamma));
    mean_R += R.back();
    est.mean_discounted_cost += tr.discounted_cost(gamma) / n;
    est.mean_total_cost += tr.total_cost() / n;
  }
  mean_R /= n;

  const int m = policy.m;
  VectorXd seed(2 * m);
  for (std::size_t e = 0; e < traces.size(); ++e) {
    double discount = 1.0;
    for (std::size_t t = 0; t < T; ++t, discount *= gamma) {
      const auto ti = static_cast<Eigen::Index>(t);
      const StepRecord& step = traces[e].steps[t];
      if (!step.sample) throw UsageError("policy_gradient: trace was not produced by a stochastic policy");
      const double advantage = R[e][ti] - (baseline ? mean_R[ti] : 0.0);
      const double weight = discount * advantage / n;
      if (weight == 0.0) continue;
      const auto cache = nn::forward(policy.net, alloc::policy_input(step.observed, m));
      const alloc::PolicyHead head = alloc::head_from_output(cache.output(), m);
      const alloc::LogProbGrad lp = alloc::log_prob_grad(head.mu, head.sigma, step.sample->z);
      seed.head(m) = weight * lp.d_mu;
      seed.tail(m) = weight * lp.d_log_sigma.cwiseProduct(head.sigma_active);
      est.grad += nn::backward(policy.net, cache, seed);
    }
  }
  return est;
}

UpdateResult reinforce_update(const alloc::GaussianSimplexPolicy& policy,
                              std::span<const EpisodeTrace> traces, const UpdateOptions& opts,
                              int iteration) {
  GradientEstimate est = policy_gradient(policy, traces, opts.gamma, opts.baseline);
  UpdateResult out{policy.net, {}};
  out.row.iteration = iteration;
  out.row.mean_cost = est.mean_discounted_cost;
  out.row.mean_total_cost = est.mean_total_cost;
  out.row.grad_norm = est.grad.norm();
  try {
    nn::SgdResult step = nn::sgd_step(policy.net, est.grad, opts.alpha, opts.clip_norm);
    out.params = std::move(step.params);
  } catch (const TrainingError& e) {
    std::cerr << "iteration " << iteration << ": " << e.what() << "; update skipped\n";
    out.row.skipped = true;
  }
  return out;
}

ReinforceResult run_reinforce(alloc::GaussianSimplexPolicy policy, const System& system,
                              const ReinforceOptions& opts, const IterationHook& hook) {
  if (opts.episodes < 1) throw UsageError("run_reinforce: episodes per iteration must be >= 1");
  if (opts.iterations < 0) throw UsageError("run_reinforce: iterations must be >= 0");
  ReinforceResult result{std::move(policy), {}, 0};
  const auto start = std::chrono::steady_clock::now();
  std::vector<EpisodeTrace> batch(static_cast<std::size_t>(opts.episodes));

  for (int k = 0; k < opts.iterations; ++k) {
    auto current = std::make_shared<const alloc::GaussianSimplexPolicy>(result.policy);
    const alloc::PolicyAllocator allocator(current, true);
    for (int e = 0; e < opts.episodes; ++e) {
      const Stream episode = Stream::keyed(
          Purpose::Train, {opts.seed, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(e)});
      Stream init = Stream::keyed(Purpose::Init, {episode.key()});
      const VectorXd x0 = draw_initial_state(system, opts.x0_std, init);
      try {
        batch[static_cast<std::size_t>(e)] = rollout_episode(system, allocator, opts.horizon, x0, episode);
      } catch (const std::exception& ex) {
        throw TrainingError("iteration " + std::to_string(k) + ": " + ex.what());
      }
      result.allocations_checked += static_cast<std::uint64_t>(opts.horizon);
    }
    UpdateResult upd = reinforce_update(result.policy, batch, opts.update, k);
    upd.row.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.policy.net = std::move(upd.params);
    result.log.push_back(upd.row);
    if (hook) hook(upd.row, result.policy);
  }
  return result;
}

PretrainResult pretrain_supervised(const alloc::GaussianSimplexPolicy& policy,
                                   const alloc::Allocator& target, const System& system,
                                   const PretrainOptions& opts, Stream rng) {
  if (opts.n_samples < 1) throw UsageError("pretrain_supervised: n_samples must be >= 1");
  if (opts.epochs < 0 || opts.batch_size < 1) throw UsageError("pretrain_supervised: bad epochs/batch size");
  const int m = policy.m;
  if (static_cast<int>(system.plant_count()) != m)
    throw UsageError("pretrain_supervised: policy and system disagree on plant count");

  // Dataset of (network input, [centered log-shares; 0]) pairs.
  std::vector<VectorXd> inputs;
  std::vector<VectorXd> targets;
  inputs.reserve(static_cast<std::size_t>(opts.n_samples));
  targets.reserve(static_cast<std::size_t>(opts.n_samples));
  for (int k = 0; k < opts.n_samples; ++k) {
    SystemState s;
    s.h = draw_fading(rng, system.channel(), system.plant_count());
    s.x.resize(system.state_dim());
    for (Eigen::Index i = 0; i < s.x.size(); ++i) s.x[i] = rng.normal(0.0, opts.state_std);
    const VectorXd obs = s.stacked();
    const VectorXd p = target.decide(obs, system, rng).p;
    VectorXd logits = (p / target.budget()).array().max(opts.share_floor).log().matrix();
    logits.array() -= logits.mean();
    VectorXd y = VectorXd::Zero(2 * m);
    y.head(m) = logits;
    inputs.push_back(alloc::policy_input(obs, m));
    targets.push_back(std::move(y));
  }

  PretrainResult result{policy.net, {}, 0.0};
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  int rising = 0;
  const auto n_out = static_cast<double>(2 * m);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i-- > 1;) {
      const auto j = static_cast<std::size_t>(rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      const auto bs = static_cast<double>(stop - start);
      nn::MlpGrad grad = nn::MlpParams::zeros(result.params.layer_sizes());
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const auto cache = nn::forward(result.params, inputs[idx]);
        const VectorXd err = cache.output() - targets[idx];
        loss += err.squaredNorm() / n_out;
        grad += nn::backward(result.params, cache, err * (2.0 / (n_out * bs)));
      }
      result.params = nn::sgd_step(result.params, grad, opts.alpha, opts.clip_norm).params;
    }
    loss /= static_cast<double>(order.size());
    if (!std::isfinite(loss)) throw TrainingError("pretrain_supervised: loss became non-finite");
    if (!result.epoch_loss.empty() && loss > result.epoch_loss.back()) {
      if (++rising >= 10)
        throw TrainingError("pretrain_supervised: loss rose for 10 consecutive epochs at epoch " +
                            std::to_string(epoch));
    } else {
      rising = 0;
    }
    result.epoch_loss.push_back(loss);
  }

  double mse = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const VectorXd out = nn::forward(result.params, inputs[k]).output();
    mse += (out.head(m) - targets[k].head(m)).squaredNorm() / m;
  }
  result.final_logit_mse = mse / static_cast<double>(inputs.size());
  return result;
}

}  // namespace wcs::rl
