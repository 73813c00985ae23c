#pragma once

// Dense feed-forward network: ReLU hidden layers, affine output layer, exact
// backpropagation and a plain SGD step.

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "wcs/rng.hpp"

namespace wcs::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Layer {
  MatrixXd weight;  // d_l x d_{l-1}
  VectorXd bias;    // d_l
};

/// theta = [C_1; b_1; ...; C_L; b_L]. Gradients share this shape.
class MlpParams {
 public:
  MlpParams() = default;
  explicit MlpParams(std::vector<Layer> layers);

  // All-zero parameters for the given layer sizes.
  static MlpParams zeros(const std::vector<int>& layer_sizes);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  std::size_t depth() const { return layers_.size(); }

  // [d_0, d_1, ..., d_L]
  std::vector<int> layer_sizes() const;
  std::size_t param_count() const;

  // Layer order; within a layer the weight row-major, then the bias.
  VectorXd flatten() const;
  void assign(const VectorXd& flat);

  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;
  double norm() const;

  MlpParams& operator+=(const MlpParams& other);
  MlpParams& operator*=(double s);
  // this += s * other
  void add_scaled(const MlpParams& other, double s);

  bool operator==(const MlpParams& other) const;

 private:
  std::vector<Layer> layers_;
};

using MlpGrad = MlpParams;

struct ForwardCache {
  std::vector<VectorXd> pre;   // pre[l-1] = C_l z_{l-1} + b_l, l = 1..L
  std::vector<VectorXd> post;  // post[0] = input, post[L] = output

  const VectorXd& output() const { return post.back(); }
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
MlpParams init_params(const std::vector<int>& layer_sizes, Stream& rng);

ForwardCache forward(const MlpParams& params, const VectorXd& input);

// Gradient of dot(output_grad, output) with respect to every parameter.
// The ReLU subgradient at 0 is taken as 0.
MlpGrad backward(const MlpParams& params, const ForwardCache& cache, const VectorXd& output_grad);

struct SgdResult {
  MlpParams params;
  double grad_norm = 0.0;     // before clipping
  double applied_norm = 0.0;  // alpha * clipped norm
};

inline constexpr double kDefaultClipNorm = 10.0;

/// theta - alpha * g, with g rescaled to norm clip_norm when it is longer.
/// clip_norm <= 0 disables clipping. Non-finite gradients raise TrainingError.
SgdResult sgd_step(const MlpParams& params, const MlpGrad& grad, double alpha,
                   double clip_norm = kDefaultClipNorm);

// Checkpoint text format:
//   line 1: "layer_sizes d_0 d_1 ... d_L"
//   then one float64 per line in flatten() order, printed with 17
//   significant digits so that values round-trip exactly.
void write_params(std::ostream& os, const MlpParams& params);
MlpParams read_params(std::istream& is);
void save_params(const std::string& path, const MlpParams& params);
MlpParams load_params(const std::string& path);

}  // namespace wcs::nn
