#include "wcs/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "wcs/errors.hpp"

namespace wcs {

namespace {

constexpr double kRiccatiTol = 1e-10;
constexpr int kRiccatiMaxIter = 10000;
constexpr double kPsdTol = 1e-12;

void require_psd(const MatrixXd& M, const char* name) {
  if (M.rows() != M.cols()) throw UsageError(std::string(name) + " must be square");
  if (!M.allFinite()) throw UsageError(std::string(name) + " has non-finite entries");
  if (M.size() == 0) return;
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw UsageError(std::string(name) + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -kPsdTol * scale)
    throw UsageError(std::string(name) + " must be positive semidefinite");
}

}  // namespace

double spectral_radius(const MatrixXd& M) {
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<MatrixXd> eig(M, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_controllable(const MatrixXd& A, const MatrixXd& B) {
  const Eigen::Index n = A.rows();
  const Eigen::Index k = B.cols();
  MatrixXd ctrb(n, n * k);
  MatrixXd block = B;
  for (Eigen::Index i = 0; i < n; ++i) {
    ctrb.middleCols(i * k, k) = block;
    block = A * block;
  }
  Eigen::FullPivLU<MatrixXd> lu(ctrb);
  lu.setThreshold(1e-10);
  return lu.rank() == n;
}

MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R_u) {
  const Eigen::Index n = A.rows();
  const Eigen::Index k = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R_u.rows() != k ||
      R_u.cols() != k)
    throw UsageError("lqr_gain: inconsistent matrix dimensions");
  require_psd(Q, "Q");
  require_psd(R_u, "R_u");
  if (!is_controllable(A, B)) throw UsageError("lqr_gain: (A, B) is not controllable");

  MatrixXd P = Q;
  MatrixXd K = MatrixXd::Zero(k, n);
  bool converged = false;
  for (int it = 0; it < kRiccatiMaxIter; ++it) {
    const MatrixXd S = R_u + B.transpose() * P * B;
    Eigen::FullPivLU<MatrixXd> lu(S);
    if (!lu.isInvertible()) throw SynthesisError("lqr_gain: R_u + B'PB is singular");
    K = lu.solve(B.transpose() * P * A);
    MatrixXd next = Q + A.transpose() * P * A - A.transpose() * P * B * K;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite()) throw SynthesisError("lqr_gain: Riccati iteration diverged");
    const double delta = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (delta < kRiccatiTol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw SynthesisError("lqr_gain: Riccati iteration did not converge in 10000 iterations");

  const MatrixXd S = R_u + B.transpose() * P * B;
  K = S.fullPivLu().solve(B.transpose() * P * A);
  if (spectral_radius(A - B * K) >= 1.0) throw SynthesisError("lqr_gain: closed loop is not stable");
  return K;
}

PlantModel::PlantModel(MatrixXd A, MatrixXd B, MatrixXd W, MatrixXd Q, const MatrixXd& R_u)
    : A_(std::move(A)), B_(std::move(B)), W_(std::move(W)), Q_(std::move(Q)) {
  const Eigen::Index n = A_.rows();
  if (n < 1 || A_.cols() != n) throw UsageError("PlantModel: A must be square and non-empty");
  if (B_.rows() != n || B_.cols() < 1) throw UsageError("PlantModel: B must have n rows");
  if (W_.rows() != n || Q_.rows() != n) throw UsageError("PlantModel: W and Q must be n x n");
  require_psd(W_, "W");
  require_psd(Q_, "Q");
  if (n <= 4 && !is_controllable(A_, B_)) throw UsageError("PlantModel: (A, B) is not controllable");
  K_ = lqr_gain(A_, B_, Q_, R_u);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(W_);
  const VectorXd sqrt_ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  W_chol_ = eig.eigenvectors() * sqrt_ev.asDiagonal();
}

PlantModel PlantModel::scalar(double a, double b, double w_var, double q, double r_u) {
  return PlantModel(MatrixXd::Constant(1, 1, a), MatrixXd::Constant(1, 1, b),
                    MatrixXd::Constant(1, 1, w_var), MatrixXd::Constant(1, 1, q),
                    MatrixXd::Constant(1, 1, r_u));
}

double PlantModel::closed_loop_radius() const { return spectral_radius(A_ - B_ * K_); }

ChannelModel::ChannelModel(double rate) : lambda_h(rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw UsageError("ChannelModel: lambda_h must be > 0");
}

ObservationNoise::ObservationNoise(double var) : w_obs_var(var) {
  if (!(var >= 0.0) || !std::isfinite(var))
    throw UsageError("ObservationNoise: w_obs_var must be >= 0");
}

VectorXd SystemState::stacked() const {
  VectorXd s(h.size() + x.size());
  s << h, x;
  return s;
}

System::System(std::vector<PlantModel> plants, ChannelModel channel, ObservationNoise obs,
               double state_clamp)
    : plants_(std::move(plants)), channel_(channel), obs_(obs), state_clamp_(state_clamp) {
  if (plants_.empty()) throw UsageError("System: at least one plant required");
  if (!(state_clamp_ > 0.0)) throw UsageError("System: state_clamp must be > 0");
  offsets_.reserve(plants_.size());
  for (const auto& p : plants_) {
    offsets_.push_back(total_dim_);
    total_dim_ += p.state_dim();
  }
}

VectorXd System::plant_state(const VectorXd& stacked, std::size_t i) const {
  return stacked.segment(offsets_[i], plants_[i].state_dim());
}

VectorXd System::deviations(const VectorXd& stacked) const {
  if (stacked.size() != total_dim_) throw UsageError("System::deviations: dimension mismatch");
  VectorXd d(plants_.size());
  for (std::size_t i = 0; i < plants_.size(); ++i)
    d[i] = stacked.segment(offsets_[i], plants_[i].state_dim()).norm();
  return d;
}

void System::check_state(const SystemState& s) const {
  if (s.h.size() != static_cast<Eigen::Index>(plants_.size()) || s.x.size() != total_dim_)
    throw UsageError("SystemState does not match the plant roster");
  if ((s.h.array() < 0.0).any()) throw UsageError("SystemState: negative fading value");
}

VectorXd step_plant(const PlantModel& plant, const VectorXd& x, const VectorXd& u, bool loop_closed,
                    const VectorXd& w) {
  if (x.size() != plant.state_dim() || w.size() != plant.state_dim())
    throw UsageError("step_plant: state/noise dimension mismatch");
  if (!loop_closed) return plant.A() * x + w;
  if (u.size() != plant.input_dim()) throw UsageError("step_plant: input dimension mismatch");
  return plant.A() * x + plant.B() * u + w;
}

double packet_success_prob(double h, double p) {
  if (!(h >= 0.0) || !(p >= 0.0)) throw UsageError("packet_success_prob: h and p must be >= 0");
  return -std::expm1(-h * p);
}

VectorXd draw_fading(Stream& rng, const ChannelModel& channel, std::size_t m) {
  if (m < 1) throw UsageError("draw_fading: m must be >= 1");
  VectorXd h(static_cast<Eigen::Index>(m));
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = rng.exponential(channel.lambda_h);
  return h;
}

VectorXd draw_process_noise(const PlantModel& plant, Stream& rng) {
  const Eigen::Index n = plant.state_dim();
  VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = rng.normal();
  return plant.W_chol_ * g;
}

double stage_cost(const VectorXd& x, const std::vector<PlantModel>& plants) {
  double cost = 0.0;
  Eigen::Index off = 0;
  for (const auto& p : plants) {
    const Eigen::Index n = p.state_dim();
    if (off + n > x.size()) throw UsageError("stage_cost: state shorter than roster");
    const auto xi = x.segment(off, n);
    cost += xi.dot(p.Q() * xi);
    off += n;
  }
  if (off != x.size()) throw UsageError("stage_cost: state longer than roster");
  return std::max(cost, 0.0);
}

VectorXd observe(const SystemState& s, const ObservationNoise& noise, Stream& rng) {
  VectorXd out = s.stacked();
  if (noise.w_obs_var == 0.0) return out;
  const double sd = std::sqrt(noise.w_obs_var);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += rng.normal(0.0, sd);
  return out;
}

}  // namespace wcs
