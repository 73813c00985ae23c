#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "wcs/errors.hpp"
#include "wcs/policy.hpp"

using namespace wcs;
using namespace wcs::alloc;
using Catch::Approx;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double log_density(const VectorXd& mu, const VectorXd& log_sigma, const VectorXd& z) {
  double lp = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = std::exp(log_sigma(i));
    lp += -0.5 * std::pow((z(i) - mu(i)) / s, 2) - log_sigma(i) - 0.5 * std::log(2 * std::numbers::pi);
  }
  return lp;
}

}  // namespace

TEST_CASE("policy_forward examples", "[policy]") {
  GaussianSimplexPolicy zero(nn::MlpParams::zeros({4, 8, 4}), 2.0, 2);
  const auto h = policy_forward(zero, VectorXd::Random(4));
  CHECK(h.mu.isZero(0.0));
  CHECK(h.sigma.isApproxToConstant(1.0));
  CHECK(h.sigma_active.isApproxToConstant(1.0));

  const auto floor = head_from_output(vec({0, 0, -10, 0}), 2);
  CHECK(floor.sigma(0) == Approx(kSigmaMin));
  CHECK(floor.sigma_active(0) == 0.0);
  CHECK(floor.sigma_active(1) == 1.0);
  CHECK(head_from_output(vec({0, 0, 10, 0}), 2).sigma(0) == Approx(kSigmaMax));
  CHECK_THROWS_AS(head_from_output(vec({NAN, 0, 0, 0}), 2), PolicyError);

  // Identity on the x-part: mu_i = input_{m+i}.
  MatrixXd W = MatrixXd::Zero(4, 4);
  W(0, 2) = 1;
  W(1, 3) = 1;
  GaussianSimplexPolicy ident(nn::MlpParams({nn::Layer{W, VectorXd::Zero(4)}}), 2.0, 2);
  const VectorXd in = vec({0.7, 1.3, -0.4, 0.9});
  const auto hi = policy_forward(ident, in);
  CHECK(hi.mu(0) == -0.4);
  CHECK(hi.mu(1) == 0.9);
}

TEST_CASE("policy input standardization", "[policy]") {
  const VectorXd in = policy_input(vec({0.5, 2.0, 30.0, -1e6}), 2);
  CHECK(in(0) == 0.5);
  CHECK(in(1) == 2.0);
  CHECK(in(2) == Approx(3.0));
  CHECK(in(3) == Approx(-kInputStateClip / kInputStateScale));
  CHECK_THROWS_AS(policy_input(vec({1, 2}), 2), UsageError);
}

TEST_CASE("policy construction checks", "[policy]") {
  CHECK_THROWS_AS(GaussianSimplexPolicy(nn::MlpParams::zeros({4, 3}), 1, 2), UsageError);
  CHECK_THROWS_AS(GaussianSimplexPolicy(nn::MlpParams::zeros({4, 4}), 0, 2), UsageError);
  Stream rng = Stream::keyed(Purpose::Test, {1});
  const auto p = GaussianSimplexPolicy::make(3, 2.0, {16, 16}, rng);
  CHECK(p.net.layer_sizes() == std::vector<int>{6, 16, 16, 6});
}

TEST_CASE("sample_allocation examples", "[policy][mc]") {
  Stream rng = Stream::keyed(Purpose::Test, {2});
  const int m = 4, n = 100000;
  const double p_max = 3.0;
  VectorXd sum = VectorXd::Zero(m), sum2 = VectorXd::Zero(m);
  for (int k = 0; k < n; ++k) {
    const auto s = sample_allocation(VectorXd::Constant(m, 0.3), VectorXd::Constant(m, 1e-3), p_max, rng);
    sum += s.p;
    sum2 += s.p.cwiseAbs2();
  }
  for (int i = 0; i < m; ++i) {
    const double mean = sum(i) / n, sd = std::sqrt(std::max(0.0, sum2(i) / n - mean * mean));
    CHECK(std::abs(mean - p_max / m) <= 3 * sd / std::sqrt(double(n)) + 1e-12);
  }

  const auto one = sample_allocation(vec({0.2}), vec({1.5}), 5.0, rng);
  CHECK(one.p(0) == 5.0);

  const VectorXd sat = 6.0 * softmax(vec({50, -50}));
  CHECK(std::abs(sat(0) - 6) < 1e-9);
  CHECK(std::abs(sat(1)) < 1e-9);
}

TEST_CASE("every sampled allocation is feasible", "[policy][mc]") {
  Stream rng = Stream::keyed(Purpose::Test, {3});
  for (int k = 0; k < 100000; ++k) {
    const int m = 1 + static_cast<int>(rng.uniform() * 15);
    VectorXd mu(m), sigma(m);
    for (int i = 0; i < m; ++i) {
      mu(i) = rng.uniform(-60, 60);
      sigma(i) = std::exp(rng.uniform(std::log(kSigmaMin), std::log(kSigmaMax)));
    }
    const double p_max = rng.uniform(0.1, 10);
    const auto s = sample_allocation(mu, sigma, p_max, rng);
    REQUIRE(is_feasible(s.p, p_max));
  }
}

TEST_CASE("softmax is shift invariant", "[policy]") {
  const VectorXd z = vec({0.3, -1.2, 2.5, 0.0});
  CHECK((softmax(z) - softmax(z.array() + 17.0).matrix()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(softmax(vec({1000, 999})).allFinite());
}

TEST_CASE("log_prob_grad examples", "[policy]") {
  const auto g = log_prob_grad(vec({0}), vec({1}), vec({1}));
  CHECK(g.d_mu(0) == Approx(1));
  CHECK(g.d_log_sigma(0) == Approx(0).margin(1e-15));
  CHECK(g.log_prob == Approx(-0.5 - 0.5 * std::log(2 * std::numbers::pi)));

  const auto at = log_prob_grad(vec({0.4, -2}), vec({0.5, 1.7}), vec({0.4, -2}));
  CHECK(at.d_mu.isZero(0.0));
  CHECK(at.d_log_sigma.isApproxToConstant(-1.0));
}

TEST_CASE("log_prob_grad matches finite differences", "[policy][fd]") {
  Stream rng = Stream::keyed(Purpose::Test, {4});
  const double eps = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 3;
    VectorXd mu(m), ls(m), z(m);
    for (int i = 0; i < m; ++i) {
      mu(i) = rng.normal();
      ls(i) = rng.uniform(-2, 0.5);
      z(i) = mu(i) + std::exp(ls(i)) * rng.normal();
    }
    const auto g = log_prob_grad(mu, ls.array().exp().matrix(), z);
    CHECK(test::rel_err(g.log_prob, log_density(mu, ls, z)) < 1e-12);
    for (int i = 0; i < m; ++i) {
      VectorXd a = mu, b = mu;
      a(i) += eps;
      b(i) -= eps;
      const double fd_mu = (log_density(a, ls, z) - log_density(b, ls, z)) / (2 * eps);
      VectorXd c = ls, d = ls;
      c(i) += eps;
      d(i) -= eps;
      const double fd_ls = (log_density(mu, c, z) - log_density(mu, d, z)) / (2 * eps);
      CHECK(test::rel_err(g.d_mu(i), fd_mu) < 1e-6);
      CHECK(test::rel_err(g.d_log_sigma(i), fd_ls) < 1e-6);
    }
  }
}

TEST_CASE("score has zero mean", "[policy][mc]") {
  Stream rng = Stream::keyed(Purpose::Test, {5});
  const VectorXd mu = vec({0.5, -1.0}), sigma = vec({0.7, 1.3});
  const int n = 100000;
  VectorXd sum = VectorXd::Zero(2), sum2 = VectorXd::Zero(2);
  for (int k = 0; k < n; ++k) {
    const auto s = sample_allocation(mu, sigma, 1.0, rng);
    const VectorXd d = log_prob_grad(mu, sigma, s.z).d_mu;
    sum += d;
    sum2 += d.cwiseAbs2();
  }
  for (int i = 0; i < 2; ++i) {
    const double mean = sum(i) / n, sd = std::sqrt(sum2(i) / n - mean * mean);
    CHECK(std::abs(mean) <= 3 * sd / std::sqrt(double(n)));
  }
}

TEST_CASE("equal_allocation examples", "[policy]") {
  CHECK(equal_allocation(15, 6).isApproxToConstant(0.4));
  CHECK(equal_allocation(1, 3)(0) == 3.0);
  for (int m = 1; m <= 20; ++m) CHECK(equal_allocation(m, 2.7).sum() == Approx(2.7));
  CHECK_THROWS_AS(equal_allocation(0, 1), UsageError);
}

TEST_CASE("control_aware_allocation examples", "[policy]") {
  const VectorXd a = control_aware_allocation(vec({1, 0, 0}), 2.5);
  CHECK(a(0) == 2.5);
  CHECK(a(1) == 0.0);
  CHECK(control_aware_allocation(vec({1, 1}), 6).isApproxToConstant(3.0));
  CHECK(control_aware_allocation(vec({0, 0}), 6).isApproxToConstant(3.0));
  const VectorXd r = control_aware_allocation(vec({1, -2, 3}), 7);
  CHECK(r(1) / r(0) == Approx(4));
  CHECK(r(2) / r(0) == Approx(9));
  for (double c : {-3.0, 0.01, 250.0})
    CHECK((control_aware_allocation(c * vec({1, -2, 3}), 7) - r).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(is_feasible(control_aware_allocation(vec({1e-300, 1e300, 0}), 4), 4));
}

TEST_CASE("allocators decide feasibly", "[policy]") {
  const auto sys = test::scalar_system({1.1, 1.2, 1.3});
  Stream rng = Stream::keyed(Purpose::Test, {6});
  auto policy = std::make_shared<const GaussianSimplexPolicy>(GaussianSimplexPolicy::make(3, 2.0, {8}, rng));
  const VectorXd s = vec({0.5, 1.0, 2.0, 3.0, -1.0, 0.0});
  EqualAllocator eq(2.0);
  ControlAwareAllocator ca(2.0);
  PolicyAllocator stoch(policy, true), det(policy, false);
  CHECK(eq.decide(s, sys, rng).p.isApproxToConstant(2.0 / 3));
  CHECK(ca.decide(s, sys, rng).p(0) == Approx(2.0 * 9 / 10));
  const auto ds = stoch.decide(s, sys, rng);
  REQUIRE(ds.sample.has_value());
  CHECK(is_feasible(ds.p, 2.0));
  const auto dd = det.decide(s, sys, rng);
  CHECK_FALSE(dd.sample.has_value());
  const auto head = policy_forward(*policy, policy_input(s, 3));
  CHECK((dd.p - 2.0 * softmax(head.mu)).norm() < 1e-15);
  CHECK_FALSE(is_feasible(vec({1.5, 0.6}), 2));
  CHECK_FALSE(is_feasible(vec({2.1, -0.1}), 2));
}
