#include "wcs/mlp.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wcs/errors.hpp"

namespace wcs::nn {

MlpParams::MlpParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw UsageError("MlpParams: at least one layer required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() != layer.bias.size())
      throw UsageError("MlpParams: weight rows and bias length disagree");
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
      throw UsageError("MlpParams: adjacent layer dimensions disagree");
  }
}

MlpParams MlpParams::zeros(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw UsageError("MlpParams: need at least input and output sizes");
  std::vector<Layer> layers;
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    if (sizes[l - 1] < 1 || sizes[l] < 1) throw UsageError("MlpParams: layer sizes must be >= 1");
    layers.push_back({MatrixXd::Zero(sizes[l], sizes[l - 1]), VectorXd::Zero(sizes[l])});
  }
  return MlpParams(std::move(layers));
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers_.front().weight.cols()));
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.weight.rows()));
  return sizes;
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

VectorXd MlpParams::flatten() const {
  VectorXd flat(static_cast<Eigen::Index>(param_count()));
  Eigen::Index k = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat[k++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[k++] = l.bias[r];
  }
  return flat;
}

void MlpParams::assign(const VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(param_count()))
    throw UsageError("MlpParams::assign: flat vector has the wrong length");
  Eigen::Index k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[k++];
  }
}

bool MlpParams::same_shape(const MlpParams& other) const {
  return layer_sizes() == other.layer_sizes();
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

double MlpParams::norm() const {
  double sq = 0.0;
  for (const auto& l : layers_) sq += l.weight.squaredNorm() + l.bias.squaredNorm();
  return std::sqrt(sq);
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  add_scaled(other, 1.0);
  return *this;
}

MlpParams& MlpParams::operator*=(double s) {
  for (auto& l : layers_) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

void MlpParams::add_scaled(const MlpParams& other, double s) {
  if (!same_shape(other)) throw UsageError("MlpParams: shape mismatch");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].weight += s * other.layers_[i].weight;
    layers_[i].bias += s * other.layers_[i].bias;
  }
}

bool MlpParams::operator==(const MlpParams& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i].weight != other.layers_[i].weight || layers_[i].bias != other.layers_[i].bias)
      return false;
  return true;
}

MlpParams init_params(const std::vector<int>& layer_sizes, Stream& rng) {
  MlpParams params = MlpParams::zeros(layer_sizes);
  for (auto& l : params.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.cols() + l.weight.rows()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = rng.uniform(-limit, limit);
  }
  return params;
}

ForwardCache forward(const MlpParams& params, const VectorXd& input) {
  const auto& layers = params.layers();
  if (layers.empty()) throw UsageError("forward: empty network");
  if (input.size() != layers.front().weight.cols())
    throw UsageError("forward: input length does not match the first layer");
  ForwardCache cache;
  cache.pre.reserve(layers.size());
  cache.post.reserve(layers.size() + 1);
  cache.post.push_back(input);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    VectorXd a = layers[l].weight * cache.post.back() + layers[l].bias;
    const bool hidden = l + 1 < layers.size();
    cache.post.push_back(hidden ? VectorXd(a.cwiseMax(0.0)) : a);
    cache.pre.push_back(std::move(a));
  }
  return cache;
}

MlpGrad backward(const MlpParams& params, const ForwardCache& cache, const VectorXd& output_grad) {
  const auto& layers = params.layers();
  if (cache.post.size() != layers.size() + 1 || cache.pre.size() != layers.size())
    throw UsageError("backward: cache does not match the network depth");
  if (output_grad.size() != cache.output().size())
    throw UsageError("backward: output gradient has the wrong length");

  std::vector<Layer> grads(layers.size());
  VectorXd delta = output_grad;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 < layers.size()) {
      // ReLU'(a) = 1 for a > 0, else 0.
      delta = (cache.pre[l].array() > 0.0).select(delta, 0.0);
    }
    grads[l].weight = delta * cache.post[l].transpose();
    grads[l].bias = delta;
    if (l > 0) delta = layers[l].weight.transpose() * delta;
  }
  return MlpParams(std::move(grads));
}

SgdResult sgd_step(const MlpParams& params, const MlpGrad& grad, double alpha, double clip_norm) {
  if (!(alpha > 0.0)) throw UsageError("sgd_step: alpha must be > 0");
  if (!params.same_shape(grad)) throw UsageError("sgd_step: gradient shape mismatch");
  if (!grad.all_finite()) throw TrainingError("sgd_step: non-finite gradient");
  SgdResult out{params, grad.norm(), 0.0};
  double scale = alpha;
  if (clip_norm > 0.0 && out.grad_norm > clip_norm) scale = alpha * clip_norm / out.grad_norm;
  out.params.add_scaled(grad, -scale);
  out.applied_norm = scale * out.grad_norm;
  return out;
}

void write_params(std::ostream& os, const MlpParams& params) {
  os << "layer_sizes";
  for (int d : params.layer_sizes()) os << ' ' << d;
  os << '\n';
  const VectorXd flat = params.flatten();
  char buf[32];
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", flat[i]);
    os << buf << '\n';
  }
}

MlpParams read_params(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("checkpoint: missing header line");
  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag != "layer_sizes") throw IoError("checkpoint: header must start with 'layer_sizes'");
  std::vector<int> sizes;
  int d = 0;
  while (header >> d) sizes.push_back(d);
  if (sizes.size() < 2) throw IoError("checkpoint: need at least two layer sizes");
  for (int s : sizes)
    if (s < 1) throw IoError("checkpoint: layer sizes must be >= 1");

  MlpParams params = MlpParams::zeros(sizes);
  VectorXd flat(static_cast<Eigen::Index>(params.param_count()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    if (!std::getline(is, line)) throw IoError("checkpoint: truncated parameter list");
    double v = 0.0;
    const auto* first = line.data();
    const auto* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw IoError("checkpoint: bad value '" + line + "'");
    flat[i] = v;
  }
  while (std::getline(is, line))
    if (!line.empty()) throw IoError("checkpoint: trailing data after parameters");
  params.assign(flat);
  return params;
}

void save_params(const std::string& path, const MlpParams& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  write_params(os, params);
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

MlpParams load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint '" + path + "'");
  return read_params(is);
}

}  // namespace wcs::nn
