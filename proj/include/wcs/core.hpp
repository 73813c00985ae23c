#pragma once

// Plants, fading channel and one-step stochastic evolution of the wireless
// control system.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "wcs/rng.hpp"

namespace wcs {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Infinite-horizon discrete LQR gain K (u = -K x) from the Riccati fixed point.
///
/// Iterates P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA starting at P = Q until the
/// largest entry change is below 1e-10 (at most 10000 sweeps). Throws
/// UsageError on bad shapes or an uncontrollable pair, SynthesisError on
/// non-convergence or an unstable closed loop.
MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R_u);

double spectral_radius(const MatrixXd& M);

// Rank of [B, AB, ..., A^{n-1}B] equals n.
bool is_controllable(const MatrixXd& A, const MatrixXd& B);

class PlantModel {
 public:
  // Validates shapes, symmetry/PSD of W and Q and controllability, then
  // synthesizes the LQR gain with input weight R_u.
  PlantModel(MatrixXd A, MatrixXd B, MatrixXd W, MatrixXd Q, const MatrixXd& R_u);

  // Scalar plant x+ = a x + b u + w, w ~ N(0, w_var), cost q x^2.
  static PlantModel scalar(double a, double b, double w_var, double q, double r_u);

  const MatrixXd& A() const { return A_; }
  const MatrixXd& B() const { return B_; }
  const MatrixXd& W() const { return W_; }
  const MatrixXd& Q() const { return Q_; }
  const MatrixXd& K() const { return K_; }

  Eigen::Index state_dim() const { return A_.rows(); }
  Eigen::Index input_dim() const { return B_.cols(); }

  // Spectral radius of A - BK.
  double closed_loop_radius() const;

 private:
  MatrixXd A_, B_, W_, Q_, K_;
  MatrixXd W_chol_;  // lower factor with W = L L'; zero rows where W is singular
  friend VectorXd draw_process_noise(const PlantModel&, Stream&);
};

struct ChannelModel {
  double lambda_h = 1.0;  // rate of the exponential fading law

  explicit ChannelModel(double rate = 1.0);
};

struct ObservationNoise {
  double w_obs_var = 0.0;

  explicit ObservationNoise(double var = 0.0);
};

/// s_t = [h_t; x_t]. x stacks the plant states in roster order.
struct SystemState {
  VectorXd h;
  VectorXd x;

  VectorXd stacked() const;
};

/// The plant roster together with the channel and sensing models.
class System {
 public:
  System(std::vector<PlantModel> plants, ChannelModel channel, ObservationNoise obs,
         double state_clamp = 1e4);

  const std::vector<PlantModel>& plants() const { return plants_; }
  const ChannelModel& channel() const { return channel_; }
  const ObservationNoise& observation() const { return obs_; }
  double state_clamp() const { return state_clamp_; }

  std::size_t plant_count() const { return plants_.size(); }
  Eigen::Index state_dim() const { return total_dim_; }
  // Offset of plant i inside the stacked state vector.
  Eigen::Index offset(std::size_t i) const { return offsets_[i]; }

  VectorXd plant_state(const VectorXd& stacked, std::size_t i) const;

  // Per-plant Euclidean norm of the state; equals |x_i| for scalar plants.
  VectorXd deviations(const VectorXd& stacked) const;

  void check_state(const SystemState& s) const;

 private:
  std::vector<PlantModel> plants_;
  ChannelModel channel_;
  ObservationNoise obs_;
  double state_clamp_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_dim_ = 0;
};

// Closed: A x + B u + w. Open: A x + w.
VectorXd step_plant(const PlantModel& plant, const VectorXd& x, const VectorXd& u, bool loop_closed,
                    const VectorXd& w);

// q(h, p) = 1 - exp(-h p).
double packet_success_prob(double h, double p);

VectorXd draw_fading(Stream& rng, const ChannelModel& channel, std::size_t m);

VectorXd draw_process_noise(const PlantModel& plant, Stream& rng);

// Sum over plants of x_i' Q_i x_i.
double stage_cost(const VectorXd& x, const std::vector<PlantModel>& plants);

// [h; x] + g with g i.i.d. N(0, w_obs_var).
VectorXd observe(const SystemState& s, const ObservationNoise& noise, Stream& rng);

}  // namespace wcs
