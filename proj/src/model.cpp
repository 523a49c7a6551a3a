#include "earid/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "earid/error.hpp"

namespace earid::model {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;
constexpr double kLogClamp = 1e-12;

Eigen::MatrixXd he_matrix(int rows, int cols, RngStream& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(cols));
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) w(r, c) = scale * rng.normal();
  return w;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    Eigen::ArrayXd ex = (logits.row(r).array() - mx).exp();
    out.row(r) = (ex / ex.sum()).matrix();
  }
  return out;
}

/// Per-sample loss weight: w(y) = sum_k y_k w_k.
Eigen::VectorXd sample_weights(const Eigen::MatrixXd& labels,
                               const std::vector<double>& class_weights) {
  if (static_cast<Eigen::Index>(class_weights.size()) != labels.cols())
    throw data_error("loss: class weight arity mismatch");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(labels.rows());
  for (Eigen::Index r = 0; r < labels.rows(); ++r)
    for (Eigen::Index k = 0; k < labels.cols(); ++k)
      w(r) += labels(r, k) * class_weights[static_cast<std::size_t>(k)];
  return w;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty())
    throw data_error("model file: expected a non-empty matrix");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw data_error("model file: ragged matrix rows");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          j[r][c].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw data_error("model file: expected an array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

Optimizer optimizer_from_string(const std::string& name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw config_error("model: unknown optimizer '" + name + "'");
}

std::string optimizer_to_string(Optimizer opt) {
  return opt == Optimizer::adam ? "adam" : "sgd";
}

void ModelConfig::validate() const {
  if (input_dim < 1) throw config_error("model: input_dim must be >= 1");
  if (hidden_dims.empty()) throw config_error("model: need >= 1 hidden layer");
  for (int d : hidden_dims)
    if (d < 1) throw config_error("model: hidden dims must be >= 1");
  if (n_classes < 2) throw config_error("model: n_classes must be >= 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw config_error("model: dropout_rate must lie in [0, 1)");
  if (l2_lambda < 0.0) throw config_error("model: l2_lambda must be >= 0");
  if (!(learning_rate > 0.0))
    throw config_error("model: learning_rate must be positive");
  if (batch_size < 2) throw config_error("model: batch_size must be >= 2");
  if (max_epochs < 1) throw config_error("model: max_epochs must be >= 1");
  if (early_stop_patience < 0)
    throw config_error("model: early_stop_patience must be >= 0");
}

std::size_t Mlp::trainable_parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : hidden)
    count += static_cast<std::size_t>(layer.w.size() + layer.b.size());
  for (const auto& bn : norms)
    count += static_cast<std::size_t>(bn.gamma.size() + bn.beta.size());
  count += static_cast<std::size_t>(output.w.size() + output.b.size());
  return count;
}

void Mlp::validate_shapes() const {
  if (hidden.size() != norms.size() ||
      hidden.size() != cfg.hidden_dims.size())
    throw data_error("model: layer count mismatch");
  int in_dim = cfg.input_dim;
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const int out_dim = cfg.hidden_dims[l];
    if (hidden[l].w.rows() != out_dim || hidden[l].w.cols() != in_dim ||
        hidden[l].b.size() != out_dim)
      throw data_error("model: layer " + std::to_string(l) +
                       " breaks the shape chain");
    if (norms[l].gamma.size() != out_dim || norms[l].beta.size() != out_dim ||
        norms[l].run_mean.size() != out_dim ||
        norms[l].run_var.size() != out_dim)
      throw data_error("model: batch norm " + std::to_string(l) +
                       " breaks the shape chain");
    for (Eigen::Index i = 0; i < norms[l].run_var.size(); ++i)
      if (!(norms[l].run_var(i) > 0.0))
        throw data_error("model: non-positive running variance");
    in_dim = out_dim;
  }
  if (output.w.rows() != cfg.n_classes || output.w.cols() != in_dim ||
      output.b.size() != cfg.n_classes)
    throw data_error("model: output layer breaks the shape chain");

  auto check_finite = [](const Eigen::MatrixXd& m) {
    if (!m.allFinite()) throw numeric_error("model: non-finite parameter");
  };
  for (const auto& layer : hidden) {
    check_finite(layer.w);
    check_finite(layer.b);
  }
  for (const auto& bn : norms) {
    check_finite(bn.gamma);
    check_finite(bn.beta);
    check_finite(bn.run_mean);
    check_finite(bn.run_var);
  }
  check_finite(output.w);
  check_finite(output.b);
}

Mlp init_mlp(const ModelConfig& cfg) {
  cfg.validate();
  Mlp m;
  m.cfg = cfg;
  int in_dim = cfg.input_dim;
  for (std::size_t l = 0; l < cfg.hidden_dims.size(); ++l) {
    const int out_dim = cfg.hidden_dims[l];
    RngStream rng(derive_seed(cfg.rng_seed, "init.layer", l));
    DenseLayer layer;
    layer.w = he_matrix(out_dim, in_dim, rng);
    layer.b = Eigen::VectorXd::Zero(out_dim);
    m.hidden.push_back(std::move(layer));

    BatchNormLayer bn;
    bn.gamma = Eigen::VectorXd::Ones(out_dim);
    bn.beta = Eigen::VectorXd::Zero(out_dim);
    bn.run_mean = Eigen::VectorXd::Zero(out_dim);
    bn.run_var = Eigen::VectorXd::Ones(out_dim);
    m.norms.push_back(std::move(bn));
    in_dim = out_dim;
  }
  RngStream rng(derive_seed(cfg.rng_seed, "init.output"));
  m.output.w = he_matrix(cfg.n_classes, in_dim, rng);
  m.output.b = Eigen::VectorXd::Zero(cfg.n_classes);
  m.validate_shapes();
  return m;
}

Eigen::MatrixXd forward(const Mlp& m, const Eigen::MatrixXd& batch,
                        const ForwardOptions& opt, ForwardCache* cache) {
  if (batch.cols() != m.cfg.input_dim)
    throw data_error("forward: batch width " + std::to_string(batch.cols()) +
                     " != input_dim " + std::to_string(m.cfg.input_dim));
  if (opt.batch_stats && batch.rows() < 2)
    throw data_error("forward: batch statistics need at least 2 rows");
  if (opt.dropout && opt.rng == nullptr)
    throw config_error("forward: dropout requested without an rng stream");

  const Eigen::Index b_rows = batch.rows();
  const double keep = 1.0 - m.cfg.dropout_rate;
  if (cache) {
    *cache = ForwardCache{};
    cache->batch_stats = opt.batch_stats;
  }

  Eigen::MatrixXd a = batch;
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    if (cache) cache->inputs.push_back(a);
    Eigen::MatrixXd z =
        (a * m.hidden[l].w.transpose()).rowwise() + m.hidden[l].b.transpose();

    Eigen::VectorXd mean, var;
    if (opt.batch_stats) {
      mean = z.colwise().mean();
      var = (z.rowwise() - mean.transpose())
                .array()
                .square()
                .colwise()
                .sum()
                .transpose() /
            static_cast<double>(b_rows);
    } else {
      mean = m.norms[l].run_mean;
      var = m.norms[l].run_var;
    }
    Eigen::VectorXd inv_std = (var.array() + kBnEps).sqrt().inverse();
    Eigen::MatrixXd xhat =
        (z.rowwise() - mean.transpose()).array().rowwise() *
        inv_std.transpose().array();
    Eigen::MatrixXd y =
        (xhat.array().rowwise() * m.norms[l].gamma.transpose().array())
            .rowwise() +
        m.norms[l].beta.transpose().array();

    Eigen::MatrixXd act = y.cwiseMax(0.0);
    if (cache) {
      cache->xhat.push_back(xhat);
      cache->inv_std.push_back(inv_std);
      if (opt.batch_stats) {
        cache->batch_mean.push_back(mean);
        cache->batch_var.push_back(var);
      }
      cache->pre_relu.push_back(y);
    }

    if (opt.dropout && m.cfg.dropout_rate > 0.0) {
      Eigen::MatrixXd scale(act.rows(), act.cols());
      for (Eigen::Index r = 0; r < act.rows(); ++r)
        for (Eigen::Index c = 0; c < act.cols(); ++c)
          scale(r, c) = opt.rng->uniform() < m.cfg.dropout_rate ? 0.0 : 1.0 / keep;
      act = act.cwiseProduct(scale);
      if (cache) cache->drop_scale.push_back(std::move(scale));
    } else if (cache) {
      cache->drop_scale.emplace_back();
    }
    if (cache) cache->activations.push_back(act);
    a = std::move(act);
  }

  if (cache) cache->inputs.push_back(a);
  Eigen::MatrixXd logits =
      (a * m.output.w.transpose()).rowwise() + m.output.b.transpose();
  Eigen::MatrixXd probs = softmax_rows(logits);
  if (cache) cache->probs = probs;
  return probs;
}

Eigen::MatrixXd forward_eval(const Mlp& m, const Eigen::MatrixXd& batch) {
  return forward(m, batch, ForwardOptions{});
}

void update_running_stats(Mlp& m, const ForwardCache& cache, double momentum) {
  if (!cache.batch_stats)
    throw data_error("running stats: cache was not built with batch stats");
  for (std::size_t l = 0; l < m.norms.size(); ++l) {
    m.norms[l].run_mean =
        momentum * m.norms[l].run_mean + (1.0 - momentum) * cache.batch_mean[l];
    m.norms[l].run_var =
        momentum * m.norms[l].run_var + (1.0 - momentum) * cache.batch_var[l];
  }
}

double loss(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& soft_labels,
            const std::vector<double>& class_weights, const Mlp& m,
            double l2_lambda) {
  if (probs.rows() != soft_labels.rows() || probs.cols() != soft_labels.cols())
    throw data_error("loss: probs/labels shape mismatch");
  for (Eigen::Index r = 0; r < soft_labels.rows(); ++r) {
    const double sum = soft_labels.row(r).sum();
    if (std::abs(sum - 1.0) > 1e-6 || soft_labels.row(r).minCoeff() < 0.0)
      throw data_error("loss: labels are not on the probability simplex");
  }
  const Eigen::VectorXd w = sample_weights(soft_labels, class_weights);
  double acc = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double ce = 0.0;
    for (Eigen::Index k = 0; k < probs.cols(); ++k) {
      if (soft_labels(r, k) == 0.0) continue;
      ce -= soft_labels(r, k) * std::log(std::max(probs(r, k), kLogClamp));
    }
    acc += w(r) * ce;
  }
  double total = acc / static_cast<double>(probs.rows());
  if (l2_lambda > 0.0) {
    double sq = 0.0;
    for (const auto& layer : m.hidden) sq += layer.w.array().square().sum();
    sq += m.output.w.array().square().sum();
    total += l2_lambda * sq;
  }
  return total;
}

Gradients backward(const Mlp& m, const ForwardCache& cache,
                   const Eigen::MatrixXd& soft_labels,
                   const std::vector<double>& class_weights) {
  const Eigen::Index b_rows = soft_labels.rows();
  const double inv_b = 1.0 / static_cast<double>(b_rows);
  const Eigen::VectorXd w = sample_weights(soft_labels, class_weights);

  Gradients g;
  g.hidden.resize(m.hidden.size());
  g.norms.resize(m.norms.size());

  // softmax + cross-entropy: dL/dlogits = w_i/B * (p_i - y_i)
  Eigen::MatrixXd dlogits =
      ((cache.probs - soft_labels).array().colwise() * w.array()).matrix() *
      inv_b;

  const Eigen::MatrixXd& last_act = cache.inputs.back();
  g.output.w = dlogits.transpose() * last_act;
  if (m.cfg.l2_lambda > 0.0) g.output.w += 2.0 * m.cfg.l2_lambda * m.output.w;
  g.output.b = dlogits.colwise().sum();
  Eigen::MatrixXd da = dlogits * m.output.w;

  for (std::size_t li = m.hidden.size(); li-- > 0;) {
    if (cache.drop_scale[li].size() > 0)
      da = da.cwiseProduct(cache.drop_scale[li]);

    // ReLU
    Eigen::MatrixXd dy =
        (cache.pre_relu[li].array() > 0.0).select(da, 0.0);

    // batch norm
    const Eigen::MatrixXd& xhat = cache.xhat[li];
    g.norms[li].gamma = dy.cwiseProduct(xhat).colwise().sum();
    g.norms[li].beta = dy.colwise().sum();
    Eigen::MatrixXd dxhat =
        dy.array().rowwise() * m.norms[li].gamma.transpose().array();

    Eigen::MatrixXd dz;
    if (cache.batch_stats) {
      const Eigen::RowVectorXd sum_dxhat = dxhat.colwise().sum();
      const Eigen::RowVectorXd sum_dxhat_xhat =
          dxhat.cwiseProduct(xhat).colwise().sum();
      dz = (((dxhat * static_cast<double>(b_rows)).rowwise() - sum_dxhat) -
            (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix()) *
           inv_b;
      dz = dz.array().rowwise() * cache.inv_std[li].transpose().array();
    } else {
      dz = dxhat.array().rowwise() * cache.inv_std[li].transpose().array();
    }

    g.hidden[li].w = dz.transpose() * cache.inputs[li];
    if (m.cfg.l2_lambda > 0.0)
      g.hidden[li].w += 2.0 * m.cfg.l2_lambda * m.hidden[li].w;
    g.hidden[li].b = dz.colwise().sum();
    if (li > 0) da = dz * m.hidden[li].w;
  }
  return g;
}

AdamState AdamState::init_like(const Mlp& m) {
  AdamState s;
  auto zero_like = [](const DenseLayer& l) {
    DenseLayer z;
    z.w = Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols());
    z.b = Eigen::VectorXd::Zero(l.b.size());
    return z;
  };
  for (const auto& l : m.hidden) {
    s.m_hidden.push_back(zero_like(l));
    s.v_hidden.push_back(zero_like(l));
  }
  for (const auto& bn : m.norms) {
    BatchNormGrad z;
    z.gamma = Eigen::VectorXd::Zero(bn.gamma.size());
    z.beta = Eigen::VectorXd::Zero(bn.beta.size());
    s.m_norms.push_back(z);
    s.v_norms.push_back(z);
  }
  s.m_out = zero_like(m.output);
  s.v_out = zero_like(m.output);
  return s;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m1, T& m2, double lr,
                 double bc1, double bc2) {
  m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * grad;
  m2.array() = kAdamBeta2 * m2.array() + (1.0 - kAdamBeta2) * grad.array().square();
  param.array() -=
      lr * (m1.array() / bc1) / ((m2.array() / bc2).sqrt() + kAdamEps);
}

}  // namespace

void optimizer_step(Mlp& m, const Gradients& g, AdamState& state,
                    double learning_rate) {
  if (m.cfg.optimizer == Optimizer::sgd) {
    for (std::size_t l = 0; l < m.hidden.size(); ++l) {
      m.hidden[l].w -= learning_rate * g.hidden[l].w;
      m.hidden[l].b -= learning_rate * g.hidden[l].b;
      m.norms[l].gamma -= learning_rate * g.norms[l].gamma;
      m.norms[l].beta -= learning_rate * g.norms[l].beta;
    }
    m.output.w -= learning_rate * g.output.w;
    m.output.b -= learning_rate * g.output.b;
    return;
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, state.step);
  const double bc2 = 1.0 - std::pow(kAdamBeta2, state.step);
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    adam_update(m.hidden[l].w, g.hidden[l].w, state.m_hidden[l].w,
                state.v_hidden[l].w, learning_rate, bc1, bc2);
    adam_update(m.hidden[l].b, g.hidden[l].b, state.m_hidden[l].b,
                state.v_hidden[l].b, learning_rate, bc1, bc2);
    adam_update(m.norms[l].gamma, g.norms[l].gamma, state.m_norms[l].gamma,
                state.v_norms[l].gamma, learning_rate, bc1, bc2);
    adam_update(m.norms[l].beta, g.norms[l].beta, state.m_norms[l].beta,
                state.v_norms[l].beta, learning_rate, bc1, bc2);
  }
  adam_update(m.output.w, g.output.w, state.m_out.w, state.v_out.w,
              learning_rate, bc1, bc2);
  adam_update(m.output.b, g.output.b, state.m_out.b, state.v_out.b,
              learning_rate, bc1, bc2);
}

double backward_and_step(Mlp& m, const Eigen::MatrixXd& batch,
                         const Eigen::MatrixXd& soft_labels,
                         const std::vector<double>& class_weights,
                         AdamState& state, RngStream& dropout_rng) {
  ForwardOptions opt;
  opt.batch_stats = true;
  opt.dropout = m.cfg.dropout_rate > 0.0;
  opt.rng = &dropout_rng;
  ForwardCache cache;
  forward(m, batch, opt, &cache);
  const double batch_loss =
      loss(cache.probs, soft_labels, class_weights, m, m.cfg.l2_lambda);
  Gradients g = backward(m, cache, soft_labels, class_weights);

  auto finite = [](const Eigen::MatrixXd& x) { return x.allFinite(); };
  for (const auto& layer : g.hidden)
    if (!finite(layer.w) || !finite(layer.b))
      throw numeric_error("training: non-finite gradient in a hidden layer");
  if (!finite(g.output.w) || !finite(g.output.b))
    throw numeric_error("training: non-finite gradient in the output layer");

  optimizer_step(m, g, state, m.cfg.learning_rate);
  update_running_stats(m, cache);
  return batch_loss;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> to_matrices(
    const std::vector<features::FeatureVector>& dataset) {
  if (dataset.empty()) throw data_error("dataset: empty");
  const std::size_t dim = dataset[0].values.size();
  const std::size_t n_classes = dataset[0].soft_label.size();
  Eigen::MatrixXd x(dataset.size(), dim);
  Eigen::MatrixXd y(dataset.size(), n_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].values.size() != dim ||
        dataset[i].soft_label.size() != n_classes)
      throw data_error("dataset: inconsistent row shapes");
    for (std::size_t j = 0; j < dim; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          dataset[i].values[j];
    for (std::size_t k = 0; k < n_classes; ++k)
      y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          dataset[i].soft_label[k];
  }
  return {std::move(x), std::move(y)};
}

TrainResult train(const std::vector<features::FeatureVector>& train_set,
                  const std::vector<features::FeatureVector>& val_set,
                  const ModelConfig& cfg,
                  const std::vector<double>& class_weights) {
  cfg.validate();
  if (train_set.empty()) throw data_error("train: empty training set");
  if (val_set.empty()) throw data_error("train: empty validation set");

  auto [x_train, y_train] = to_matrices(train_set);
  auto [x_val, y_val] = to_matrices(val_set);
  if (x_train.cols() != cfg.input_dim)
    throw data_error("train: feature dim " + std::to_string(x_train.cols()) +
                     " != configured input_dim " +
                     std::to_string(cfg.input_dim));

  Mlp m = init_mlp(cfg);
  AdamState adam = AdamState::init_like(m);

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  TrainResult result;
  result.mlp = m;
  double best_val = std::numeric_limits<double>::infinity();
  int patience_left = cfg.early_stop_patience;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    // seeded Fisher-Yates; std::shuffle is implementation-defined
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream shuffle_rng(
        derive_seed(cfg.rng_seed, "train.shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    RngStream dropout_rng(
        derive_seed(cfg.rng_seed, "train.dropout", static_cast<std::uint64_t>(epoch)));

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    std::size_t start = 0;
    while (start < n) {
      std::size_t stop = std::min(start + static_cast<std::size_t>(cfg.batch_size), n);
      // a trailing single row cannot feed batch statistics; fold it in
      if (n - stop == 1) stop = n;
      const std::size_t b = stop - start;

      Eigen::MatrixXd xb(b, x_train.cols());
      Eigen::MatrixXd yb(b, y_train.cols());
      for (std::size_t i = 0; i < b; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) =
            x_train.row(static_cast<Eigen::Index>(order[start + i]));
        yb.row(static_cast<Eigen::Index>(i)) =
            y_train.row(static_cast<Eigen::Index>(order[start + i]));
      }
      const double batch_loss =
          backward_and_step(m, xb, yb, class_weights, adam, dropout_rng);
      epoch_loss += batch_loss * static_cast<double>(b);
      seen += b;
      start = stop;
    }

    const Eigen::MatrixXd val_probs = forward_eval(m, x_val);
    const double val_loss = loss(val_probs, y_val, class_weights, m, 0.0);
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < val_probs.rows(); ++r) {
      Eigen::Index pred, truth;
      val_probs.row(r).maxCoeff(&pred);
      y_val.row(r).maxCoeff(&truth);
      if (pred == truth) ++correct;
    }

    TrainHistory::Epoch entry;
    entry.train_loss = epoch_loss / static_cast<double>(seen);
    entry.val_loss = val_loss;
    entry.val_accuracy =
        static_cast<double>(correct) / static_cast<double>(val_probs.rows());
    result.history.epochs.push_back(entry);
    result.history.stopped_epoch = epoch;

    if (val_loss < best_val) {
      best_val = val_loss;
      result.history.best_epoch = epoch;
      result.mlp = m;
      patience_left = cfg.early_stop_patience;
    } else {
      if (patience_left == 0) break;
      --patience_left;
    }
  }
  return result;
}

std::pair<int, std::vector<double>> predict(const Mlp& m,
                                            const features::FeatureVector& fv) {
  if (static_cast<int>(fv.values.size()) != m.cfg.input_dim)
    throw data_error("predict: wrong feature dimension");
  Eigen::MatrixXd x(1, m.cfg.input_dim);
  for (std::size_t i = 0; i < fv.values.size(); ++i)
    x(0, static_cast<Eigen::Index>(i)) = fv.values[i];
  const Eigen::MatrixXd probs = forward_eval(m, x);

  int best = 0;
  for (Eigen::Index k = 1; k < probs.cols(); ++k)
    if (probs(0, k) > probs(0, best)) best = static_cast<int>(k);
  std::vector<double> row(probs.cols());
  for (Eigen::Index k = 0; k < probs.cols(); ++k)
    row[static_cast<std::size_t>(k)] = probs(0, k);
  return {best, std::move(row)};
}

void save_model(const Mlp& m, const std::string& path) {
  m.validate_shapes();
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["config"] = {
      {"input_dim", m.cfg.input_dim},
      {"hidden_dims", m.cfg.hidden_dims},
      {"n_classes", m.cfg.n_classes},
      {"dropout_rate", m.cfg.dropout_rate},
      {"l2_lambda", m.cfg.l2_lambda},
      {"learning_rate", m.cfg.learning_rate},
      {"batch_size", m.cfg.batch_size},
      {"max_epochs", m.cfg.max_epochs},
      {"early_stop_patience", m.cfg.early_stop_patience},
      {"optimizer", optimizer_to_string(m.cfg.optimizer)},
      {"rng_seed", m.cfg.rng_seed},
  };
  doc["layers"] = nlohmann::json::array();
  for (std::size_t l = 0; l < m.hidden.size(); ++l) {
    doc["layers"].push_back({
        {"w", matrix_to_json(m.hidden[l].w)},
        {"b", vector_to_json(m.hidden[l].b)},
        {"gamma", vector_to_json(m.norms[l].gamma)},
        {"beta", vector_to_json(m.norms[l].beta)},
        {"run_mean", vector_to_json(m.norms[l].run_mean)},
        {"run_var", vector_to_json(m.norms[l].run_var)},
    });
  }
  doc["output"] = {{"w", matrix_to_json(m.output.w)},
                   {"b", vector_to_json(m.output.b)}};

  std::ofstream os(path, std::ios::trunc);
  if (!os) throw data_error("cannot open for writing: " + path);
  os << doc.dump() << '\n';
  os.flush();
  if (!os) throw data_error("write failed: " + path);
}

Mlp load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw data_error("cannot open: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const std::exception& e) {
    throw data_error("model parse error: " + std::string(e.what()));
  }

  Mlp m;
  try {
    if (doc.at("format_version").get<int>() != 1)
      throw data_error("model file: unsupported format_version");
    const auto& cfg = doc.at("config");
    m.cfg.input_dim = cfg.at("input_dim").get<int>();
    m.cfg.hidden_dims = cfg.at("hidden_dims").get<std::vector<int>>();
    m.cfg.n_classes = cfg.at("n_classes").get<int>();
    m.cfg.dropout_rate = cfg.at("dropout_rate").get<double>();
    m.cfg.l2_lambda = cfg.at("l2_lambda").get<double>();
    m.cfg.learning_rate = cfg.at("learning_rate").get<double>();
    m.cfg.batch_size = cfg.at("batch_size").get<int>();
    m.cfg.max_epochs = cfg.at("max_epochs").get<int>();
    m.cfg.early_stop_patience = cfg.at("early_stop_patience").get<int>();
    m.cfg.optimizer =
        optimizer_from_string(cfg.at("optimizer").get<std::string>());
    m.cfg.rng_seed = cfg.at("rng_seed").get<std::uint64_t>();

    for (const auto& layer : doc.at("layers")) {
      DenseLayer dense;
      dense.w = matrix_from_json(layer.at("w"));
      dense.b = vector_from_json(layer.at("b"));
      m.hidden.push_back(std::move(dense));
      BatchNormLayer bn;
      bn.gamma = vector_from_json(layer.at("gamma"));
      bn.beta = vector_from_json(layer.at("beta"));
      bn.run_mean = vector_from_json(layer.at("run_mean"));
      bn.run_var = vector_from_json(layer.at("run_var"));
      m.norms.push_back(std::move(bn));
    }
    m.output.w = matrix_from_json(doc.at("output").at("w"));
    m.output.b = vector_from_json(doc.at("output").at("b"));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw data_error("model schema error: " + std::string(e.what()));
  }
  m.validate_shapes();
  return m;
}

}  // namespace earid::model
