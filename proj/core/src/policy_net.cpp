#include "lmc/policy_net.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "lmc/adam.hpp"
#include "lmc/rng.hpp"

namespace lmc {

namespace {

using json = nlohmann::ordered_json;

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Relu:
      return z.array().max(0.0).matrix();
    case Activation::Identity:
      return z;
  }
  throw std::invalid_argument("activate: unknown activation");
}

// Derivative as a function of the post-activation value.
Eigen::ArrayXXd activate_grad(const Eigen::MatrixXd& h, Activation act) {
  switch (act) {
    case Activation::Tanh:
      return 1.0 - h.array().square();
    case Activation::Relu:
      return (h.array() > 0.0).cast<double>();
    case Activation::Identity:
      return Eigen::ArrayXXd::Ones(h.rows(), h.cols());
  }
  throw std::invalid_argument("activate_grad: unknown activation");
}

std::string activation_name(Activation act) {
  switch (act) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  throw std::invalid_argument("activation_name: unknown activation");
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw std::runtime_error("weights file: unknown activation '" + name + "'");
}

// Forward pass keeping every post-activation, batch in columns.
std::vector<Eigen::MatrixXd> forward_all(const PolicyNetwork& net,
                                         const Eigen::MatrixXd& states) {
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(net.layers.size() + 1);
  acts.push_back(states);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const DenseLayer& layer = net.layers[k];
    if (layer.weights.cols() != acts.back().rows()) {
      throw std::invalid_argument("forward: layer " + std::to_string(k) +
                                  " dimension mismatch");
    }
    Eigen::MatrixXd z = layer.weights * acts.back();
    z.colwise() += layer.bias;
    acts.push_back(activate(z, layer.activation));
  }
  return acts;
}

}  // namespace

int PolicyNetwork::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int PolicyNetwork::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

int PolicyNetwork::latent_dim() const {
  if (layers.size() < 2) return 0;
  return static_cast<int>(layers[layers.size() - 2].weights.rows());
}

void PolicyNetwork::validate() const {
  if (layers.size() < 2) {
    throw std::invalid_argument("PolicyNetwork: need at least two layers");
  }
  if (input_dim() != 2) {
    throw std::invalid_argument("PolicyNetwork: input_dim must be 2");
  }
  if (output_dim() != 1) {
    throw std::invalid_argument("PolicyNetwork: output_dim must be 1");
  }
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const DenseLayer& layer = layers[k];
    if (layer.bias.size() != layer.weights.rows()) {
      throw std::invalid_argument("PolicyNetwork: layer " + std::to_string(k) +
                                  ": bias size does not match weight rows");
    }
    if (k > 0 && layer.weights.cols() != layers[k - 1].weights.rows()) {
      throw std::invalid_argument("PolicyNetwork: layer " + std::to_string(k) +
                                  ": in_dim does not chain with previous layer");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw std::invalid_argument("PolicyNetwork: layer " + std::to_string(k) +
                                  ": non-finite parameters");
    }
  }
}

ForwardResult forward(const PolicyNetwork& net, const EnvState& state) {
  if (net.layers.size() < 2) {
    throw std::invalid_argument("forward: need at least two layers");
  }
  if (!std::isfinite(state.position) || !std::isfinite(state.velocity)) {
    throw std::invalid_argument("forward: non-finite state");
  }
  Eigen::VectorXd h(2);
  h << state.position, state.velocity;
  Eigen::VectorXd latent;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const DenseLayer& layer = net.layers[k];
    if (layer.weights.cols() != h.size()) {
      throw std::invalid_argument("forward: layer " + std::to_string(k) +
                                  " dimension mismatch");
    }
    Eigen::VectorXd z = layer.weights * h + layer.bias;
    h = activate(z, layer.activation);
    if (k == net.layers.size() - 2) {
      latent = h;
    }
  }
  if (h.size() != 1) {
    throw std::invalid_argument("forward: final layer must produce one output");
  }
  return ForwardResult{h(0), std::move(latent)};
}

double teacher_action(const EnvState& state) {
  if (!std::isfinite(state.position) || !std::isfinite(state.velocity)) {
    throw std::invalid_argument("teacher_action: non-finite state");
  }
  return state.velocity >= 0.0 ? 1.0 : -1.0;
}

void BCConfig::validate() const {
  if (hidden_sizes.empty()) {
    throw std::invalid_argument("BCConfig: need at least one hidden layer");
  }
  for (int h : hidden_sizes) {
    if (h < 1) throw std::invalid_argument("BCConfig: hidden sizes must be positive");
  }
  if (learning_rate <= 0.0) throw std::invalid_argument("BCConfig: learning_rate must be positive");
  if (epochs < 0) throw std::invalid_argument("BCConfig: epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("BCConfig: batch_size must be positive");
  if (sample_n_pos < 1 || sample_n_vel < 1) {
    throw std::invalid_argument("BCConfig: sample grid counts must be positive");
  }
}

PolicyNetwork init_network(const std::vector<int>& hidden_sizes, std::uint64_t seed) {
  if (hidden_sizes.empty()) {
    throw std::invalid_argument("init_network: need at least one hidden layer");
  }
  std::vector<int> dims;
  dims.push_back(2);
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(1);

  Rng rng(seed);
  PolicyNetwork net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const int in = dims[k];
    const int out = dims[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    DenseLayer layer;
    layer.weights.resize(out, in);
    for (int i = 0; i < out; ++i) {
      for (int j = 0; j < in; ++j) {
        layer.weights(i, j) = rng.uniform(-bound, bound);
      }
    }
    layer.bias.resize(out);
    for (int i = 0; i < out; ++i) {
      layer.bias(i) = rng.uniform(-bound, bound);
    }
    layer.activation = Activation::Tanh;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

MseGradient mse_gradient(const PolicyNetwork& net, const Eigen::MatrixXd& states,
                         const Eigen::VectorXd& targets) {
  if (states.cols() != targets.size() || states.cols() == 0) {
    throw std::invalid_argument("mse_gradient: batch size mismatch");
  }
  const auto batch = static_cast<double>(states.cols());
  const std::vector<Eigen::MatrixXd> acts = forward_all(net, states);

  const Eigen::RowVectorXd outputs = acts.back().row(0);
  const Eigen::RowVectorXd err = outputs - targets.transpose();

  MseGradient result;
  result.loss = err.squaredNorm() / batch;
  result.d_weights.resize(net.layers.size());
  result.d_bias.resize(net.layers.size());

  // dL/d(output), then walk the layers backwards.
  Eigen::MatrixXd dh = (2.0 / batch) * err;
  for (int k = static_cast<int>(net.layers.size()) - 1; k >= 0; --k) {
    const DenseLayer& layer = net.layers[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd& h = acts[static_cast<std::size_t>(k) + 1];
    const Eigen::MatrixXd dz =
        (dh.array() * activate_grad(h, layer.activation)).matrix();
    result.d_weights[static_cast<std::size_t>(k)] =
        dz * acts[static_cast<std::size_t>(k)].transpose();
    result.d_bias[static_cast<std::size_t>(k)] = dz.rowwise().sum();
    if (k > 0) {
      dh = layer.weights.transpose() * dz;
    }
  }
  return result;
}

BCResult train_bc(const BCConfig& config) {
  config.validate();

  PolicyNetwork net = init_network(config.hidden_sizes, config.seed);

  // Teacher targets over a dense grid of the dynamics box.
  const std::vector<EnvState> grid =
      initial_state_grid(config.sample_n_pos, config.sample_n_vel,
                         {kMinPosition, kMaxPosition}, {-kMaxSpeed, kMaxSpeed});
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd states(2, n);
  Eigen::VectorXd targets(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    states(0, i) = grid[static_cast<std::size_t>(i)].position;
    states(1, i) = grid[static_cast<std::size_t>(i)].velocity;
    targets(i) = teacher_action(grid[static_cast<std::size_t>(i)]);
  }

  BCResult result;
  result.initial_loss = mse_gradient(net, states, targets).loss;

  // One Adam state per parameter tensor, a single shared step counter.
  const AdamHyper hyper{config.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t n_layers = net.layers.size();
  std::vector<Eigen::ArrayXd> mw(n_layers), vw(n_layers), mb(n_layers), vb(n_layers);
  for (std::size_t k = 0; k < n_layers; ++k) {
    mw[k] = Eigen::ArrayXd::Zero(net.layers[k].weights.size());
    vw[k] = Eigen::ArrayXd::Zero(net.layers[k].weights.size());
    mb[k] = Eigen::ArrayXd::Zero(net.layers[k].bias.size());
    vb[k] = Eigen::ArrayXd::Zero(net.layers[k].bias.size());
  }

  Rng shuffle_rng(Rng::derive(config.seed, 0x6263u));  // "bc" shuffle stream
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  long t = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (Eigen::Index begin = 0; begin < n; begin += config.batch_size) {
      const Eigen::Index size = std::min<Eigen::Index>(config.batch_size, n - begin);
      Eigen::MatrixXd xb(2, size);
      Eigen::VectorXd yb(size);
      for (Eigen::Index c = 0; c < size; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(begin + c)];
        xb.col(c) = states.col(src);
        yb(c) = targets(src);
      }
      const MseGradient grad = mse_gradient(net, xb, yb);
      ++t;
      for (std::size_t k = 0; k < n_layers; ++k) {
        Eigen::Map<Eigen::ArrayXd> w(net.layers[k].weights.data(),
                                     net.layers[k].weights.size());
        Eigen::Map<const Eigen::ArrayXd> gw(grad.d_weights[k].data(),
                                            grad.d_weights[k].size());
        Eigen::ArrayXd w_copy = w;
        adam_update(w_copy, gw, mw[k], vw[k], hyper, t);
        w = w_copy;

        Eigen::Map<Eigen::ArrayXd> b(net.layers[k].bias.data(),
                                     net.layers[k].bias.size());
        Eigen::Map<const Eigen::ArrayXd> gb(grad.d_bias[k].data(),
                                            grad.d_bias[k].size());
        Eigen::ArrayXd b_copy = b;
        adam_update(b_copy, gb, mb[k], vb[k], hyper, t);
        b = b_copy;
      }
    }
  }

  result.final_loss = config.epochs == 0 ? result.initial_loss
                                         : mse_gradient(net, states, targets).loss;
  result.net = std::move(net);
  return result;
}

void save_weights(const PolicyNetwork& net, const std::filesystem::path& path) {
  net.validate();
  json doc;
  doc["input_dim"] = net.input_dim();
  doc["layers"] = json::array();
  for (const DenseLayer& layer : net.layers) {
    json jl;
    json rows = json::array();
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        row.push_back(layer.weights(i, j));
      }
      rows.push_back(std::move(row));
    }
    jl["weights"] = std::move(rows);
    json bias = json::array();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      bias.push_back(layer.bias(i));
    }
    jl["bias"] = std::move(bias);
    jl["activation"] = activation_name(layer.activation);
    doc["layers"].push_back(std::move(jl));
  }

  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_weights: cannot open " + path.string());
  }
  out << doc.dump(2) << '\n';
  if (!out) {
    throw std::runtime_error("save_weights: write failed for " + path.string());
  }
}

PolicyNetwork load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_weights: cannot open " + path.string());
  }
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("load_weights: " + path.string() + ": " + e.what());
  }

  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw std::runtime_error("load_weights: missing or empty 'layers' array");
  }

  try {
  const int declared_input = doc.value("input_dim", 2);

  PolicyNetwork net;
  int expected_in = declared_input;
  std::size_t k = 0;
  for (const json& jl : doc["layers"]) {
    const std::string where = "layer " + std::to_string(k);
    if (!jl.contains("weights") || !jl["weights"].is_array() || jl["weights"].empty()) {
      throw std::runtime_error("load_weights: " + where + ": missing weights");
    }
    const auto rows = static_cast<Eigen::Index>(jl["weights"].size());
    const auto cols = static_cast<Eigen::Index>(jl["weights"][0].size());
    if (cols != expected_in) {
      throw std::runtime_error("load_weights: " + where + ": expected in_dim " +
                               std::to_string(expected_in) + ", got " +
                               std::to_string(cols));
    }
    DenseLayer layer;
    layer.weights.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const json& row = jl["weights"][static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(row.size()) != cols) {
        throw std::runtime_error("load_weights: " + where + ": ragged weight rows");
      }
      for (Eigen::Index j = 0; j < cols; ++j) {
        layer.weights(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
    if (!jl.contains("bias") || static_cast<Eigen::Index>(jl["bias"].size()) != rows) {
      throw std::runtime_error("load_weights: " + where + ": bias size must be " +
                               std::to_string(rows));
    }
    layer.bias.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      layer.bias(i) = jl["bias"][static_cast<std::size_t>(i)].get<double>();
    }
    layer.activation = activation_from_name(jl.value("activation", "tanh"));
    net.layers.push_back(std::move(layer));
    expected_in = static_cast<int>(rows);
    ++k;
  }
  net.validate();
  return net;
  } catch (const json::exception& e) {
    throw std::runtime_error("load_weights: " + path.string() + ": " + e.what());
  }
}

}  // namespace lmc
