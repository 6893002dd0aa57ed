#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "lmc/mountain_car.hpp"

namespace lmc {

enum class Activation { Tanh, Relu, Identity };

struct DenseLayer {
  Eigen::MatrixXd weights;  // out_dim x in_dim
  Eigen::VectorXd bias;     // out_dim
  Activation activation = Activation::Tanh;
};

// Small dense policy head: state in, squashed action mean out. The
// activations of the second-to-last layer are the latent representation the
// rest of the pipeline analyzes.
struct PolicyNetwork {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
  int latent_dim() const;  // width of the second-to-last layer

  // >= 2 layers, dims chain 2 -> ... -> 1, all parameters finite.
  void validate() const;
};

struct ForwardResult {
  double action_mean = 0.0;
  Eigen::VectorXd latent;
};

// Deterministic forward pass. The latent vector is the second-to-last
// layer's post-activation output at `state`.
ForwardResult forward(const PolicyNetwork& net, const EnvState& state);

// Bang-bang energy pumping: accelerate with the current velocity sign.
// Ties at zero velocity go right.
double teacher_action(const EnvState& state);

struct BCConfig {
  std::vector<int> hidden_sizes = {64, 64};
  double learning_rate = 1e-3;
  int epochs = 60;
  int batch_size = 128;
  std::uint64_t seed = 1;
  int sample_n_pos = 64;  // teacher-state grid over the dynamics box
  int sample_n_vel = 64;

  void validate() const;
};

struct BCResult {
  PolicyNetwork net;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

// Fresh network with uniform [-1/sqrt(in_dim), +1/sqrt(in_dim)] weights and
// biases, tanh hidden layers, tanh-squashed scalar output.
PolicyNetwork init_network(const std::vector<int>& hidden_sizes, std::uint64_t seed);

// MSE between the net's action means on `states` (one column per state) and
// `targets`, plus the exact gradient for every layer parameter.
struct MseGradient {
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_bias;
};
MseGradient mse_gradient(const PolicyNetwork& net, const Eigen::MatrixXd& states,
                         const Eigen::VectorXd& targets);

// Behavior-clones the teacher controller onto a fresh network with
// minibatch Adam. Deterministic for a fixed config; epochs = 0 returns the
// seeded initialization untouched.
BCResult train_bc(const BCConfig& config);

void save_weights(const PolicyNetwork& net, const std::filesystem::path& path);
PolicyNetwork load_weights(const std::filesystem::path& path);

}  // namespace lmc
