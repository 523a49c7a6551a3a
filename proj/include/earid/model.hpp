#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "earid/features.hpp"
#include "earid/rng.hpp"

namespace earid::model {

enum class Optimizer { adam, sgd };

Optimizer optimizer_from_string(const std::string& name);
std::string optimizer_to_string(Optimizer opt);

struct ModelConfig {
  int input_dim = 272;
  std::vector<int> hidden_dims = {256, 128, 64, 32};
  int n_classes = 6;
  double dropout_rate = 0.4;
  double l2_lambda = 0.001;
  double learning_rate = 0.001;
  int batch_size = 64;
  int max_epochs = 200;
  int early_stop_patience = 20;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

struct BatchNormLayer {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd run_mean, run_var;
};

/// Fully connected classifier: per hidden layer linear -> batch norm ->
/// ReLU -> dropout, then a dense softmax output layer.
struct Mlp {
  ModelConfig cfg;
  std::vector<DenseLayer> hidden;
  std::vector<BatchNormLayer> norms;
  DenseLayer output;

  /// Weights, biases, and batch-norm scale/shift (running stats excluded).
  std::size_t trainable_parameter_count() const;
  /// Throws unless layer widths chain input -> hidden dims -> n_classes.
  void validate_shapes() const;
};

/// He fan-in initialization, zero biases, identity batch norm, running
/// stats (0, 1). Bit-identical for a given cfg.rng_seed.
Mlp init_mlp(const ModelConfig& cfg);

struct ForwardOptions {
  bool batch_stats = false;  // batch norm from batch stats (training) vs running stats
  bool dropout = false;      // apply inverted dropout (needs rng)
  RngStream* rng = nullptr;
};

/// Intermediates kept for backprop and for the running-stat update.
struct ForwardCache {
  bool batch_stats = false;
  std::vector<Eigen::MatrixXd> inputs;     // input to each linear layer
  std::vector<Eigen::MatrixXd> xhat;       // normalized pre-activation
  std::vector<Eigen::VectorXd> inv_std;    // 1/sqrt(var + eps) per layer
  std::vector<Eigen::VectorXd> batch_mean; // batch stats (batch mode only)
  std::vector<Eigen::VectorXd> batch_var;
  std::vector<Eigen::MatrixXd> pre_relu;
  std::vector<Eigen::MatrixXd> activations;  // post-ReLU, post-dropout
  std::vector<Eigen::MatrixXd> drop_scale;   // mask / (1 - rate), empty if off
  Eigen::MatrixXd probs;
};

/// Softmax probabilities for a batch (rows). Train-mode batch norm needs
/// at least two rows. Pure; running stats are updated by the caller from
/// the cache (see update_running_stats).
Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& batch,
                        const ForwardOptions& opt,
                        ForwardCache* cache = nullptr);

/// Inference-mode forward (running stats, no dropout).
Eigen::MatrixXd forward_eval(const Mlp& m, const Eigen::MatrixXd& batch);

/// Exponential moving average update (momentum 0.9) from a batch-stats
/// forward cache.
void update_running_stats(Mlp& m, const ForwardCache& cache,
                          double momentum = 0.9);

/// Mean weighted cross-entropy plus l2_lambda * sum of squared linear
/// weights (biases and batch-norm parameters excluded). Logs clamped at
/// 1e-12.
double loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& soft_labels,
            const std::vector<double>& class_weights, const Mlp& m,
            double l2_lambda);

struct BatchNormGrad {
  Eigen::VectorXd gamma, beta;
};

struct Gradients {
  std::vector<DenseLayer> hidden;  // same shapes as the model
  std::vector<BatchNormGrad> norms;
  DenseLayer output;
};

/// Backprop through softmax cross-entropy, dropout masks, batch norm (batch
/// or frozen statistics, per the cache), ReLU, and the linear layers,
/// including the L2 term.
Gradients backward(const Mlp& m, const ForwardCache& cache,
                   const Eigen::MatrixXd& soft_labels,
                   const std::vector<double>& class_weights);

struct AdamState {
  std::vector<DenseLayer> m_hidden, v_hidden;
  std::vector<BatchNormGrad> m_norms, v_norms;
  DenseLayer m_out, v_out;
  long step = 0;

  static AdamState init_like(const Mlp& m);
};

/// One optimizer update: Adam (beta1 0.9, beta2 0.999, eps 1e-8) or plain
/// SGD, per the model config.
void optimizer_step(Mlp& m, const Gradients& g, AdamState& state,
                    double learning_rate);

/// Full training step on one batch: forward (batch stats + dropout),
/// loss, backward, Adam, running-stat update. Returns the batch loss.
double backward_and_step(Mlp& m, const Eigen::MatrixXd& batch,
                         const Eigen::MatrixXd& soft_labels,
                         const std::vector<double>& class_weights,
                         AdamState& state, RngStream& dropout_rng);

struct TrainHistory {
  struct Epoch {
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
  };
  std::vector<Epoch> epochs;
  int best_epoch = 0;     // index into epochs, minimizes val_loss
  int stopped_epoch = 0;  // last epoch that ran
};

struct TrainResult {
  Mlp mlp;  // parameters from the best validation epoch
  TrainHistory history;
};

/// Mini-batch training with per-epoch seeded shuffling and early stopping
/// on validation loss. Inputs are expected standardized.
TrainResult train(const std::vector<features::FeatureVector>& train_set,
                  const std::vector<features::FeatureVector>& val_set,
                  const ModelConfig& cfg,
                  const std::vector<double>& class_weights);

/// Argmax prediction (ties break toward the lowest class index) plus the
/// full probability row.
std::pair<int, std::vector<double>> predict(const Mlp& m,
                                            const features::FeatureVector& fv);

/// JSON model file: {format_version, config, layers:[{w,b,gamma,beta,
/// run_mean,run_var}], output:{w,b}}.
void save_model(const Mlp& m, const std::string& path);
Mlp load_model(const std::string& path);

/// Rows of a feature dataset as (X, Y) matrices.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> to_matrices(
    const std::vector<features::FeatureVector>& dataset);

}  // namespace earid::model
