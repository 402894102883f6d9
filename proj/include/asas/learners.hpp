#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace asas::learners {

// ---------------------------------------------------------------------------
// MLP head: D -> H (rectifier) -> k

/// Parameters live in one flat vector (W1 | b1 | W2 | b2, column-major) so
/// the optimizer sees a single contiguous buffer; the accessors map views.
struct MlpModel {
  int input_dim = 0;
  int hidden_dim = 0;
  int k = 0;
  Eigen::VectorXd params;

  static MlpModel zeros(int input_dim, int hidden_dim, int k);
  /// Normal weights scaled by 1/sqrt(fan_in), zero biases.
  static MlpModel init(int input_dim, int hidden_dim, int k, std::uint64_t seed);

  static Eigen::Index param_count(int input_dim, int hidden_dim, int k);

  Eigen::Map<const Eigen::MatrixXd> w1() const;
  Eigen::Map<const Eigen::VectorXd> b1() const;
  Eigen::Map<const Eigen::MatrixXd> w2() const;
  Eigen::Map<const Eigen::VectorXd> b2() const;
  Eigen::Map<Eigen::MatrixXd> w1();
  Eigen::Map<Eigen::VectorXd> b1();
  Eigen::Map<Eigen::MatrixXd> w2();
  Eigen::Map<Eigen::VectorXd> b2();
};

inline constexpr int kDefaultHidden = 256;

/// N x k logits.
Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& features);

/// Mean per-class sigmoid binary cross-entropy over N*k entries with one-hot
/// targets. When `grad` is given it receives dLoss/dLogits.
double bce_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, Eigen::MatrixXd* grad = nullptr);

/// BCE of the MLP on (features, labels) and its gradient w.r.t. `params`.
double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, std::span<const int> labels,
                Eigen::VectorXd* grad = nullptr);

// ---------------------------------------------------------------------------
// Optimization

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;

  static AdamState zeros(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0}; }
};

/// Bias-corrected Adam moments with decoupled decay:
/// theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
void adamw_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
                double lr, double weight_decay);

/// base_lr * (1 - step / total_steps), no warmup.
double linear_lr(long step, long total_steps, double base_lr);

// ---------------------------------------------------------------------------
// Training with early stopping on dev QWK

struct TrainConfig {
  double learning_rate = 5e-5;
  int batch_size = 8;
  int epochs = 20;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
};

struct Dataset {
  Eigen::MatrixXd x;
  std::vector<int> y;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double dev_qwk = 0.0;
};

struct TrainResult {
  MlpModel best;
  int best_epoch = 0;
  std::vector<EpochRecord> history;
};

using QwkFn = std::function<double(std::span<const int> gold, std::span<const int> predicted)>;

/// Highest dev QWK; the earliest epoch wins ties. Returns a 1-based epoch.
int best_epoch(std::span<const EpochRecord> history);

/// Seeded shuffled minibatches for `config.epochs` epochs with AdamW under a
/// linear schedule; after each epoch scores dev by argmax and keeps the
/// parameter snapshot with the best dev QWK.
TrainResult train_early_stop(MlpModel model, const Dataset& train, const Dataset& dev, const TrainConfig& config,
                             const QwkFn& qwk_fn);

std::string history_tsv(std::span<const EpochRecord> history);

// ---------------------------------------------------------------------------
// Multinomial logistic regression

struct LogRegModel {
  Eigen::MatrixXd weights;  // F x k
  Eigen::VectorXd bias;     // k
  double l2 = 0.0;
  int iterations = 0;
  double grad_inf_norm = 0.0;

  int k() const { return static_cast<int>(bias.size()); }
};

struct LogRegOptions {
  double tolerance = 1e-6;
  int max_iterations = 5000;
};

/// Mean cross-entropy of softmax(XW + b) plus (l2/2)*||W||^2; the bias is
/// not penalized. Gradients are written when the pointers are non-null.
double logreg_objective(const Eigen::MatrixXd& x, std::span<const int> labels, double l2,
                        const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias, Eigen::MatrixXd* grad_w = nullptr,
                        Eigen::VectorXd* grad_b = nullptr);

/// Full-batch gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking, until the gradient's inf-norm drops to the tolerance.
LogRegModel logreg_fit(const Eigen::MatrixXd& x, std::span<const int> labels, int k, double l2,
                       const LogRegOptions& options = {});

/// Row-wise log-softmax of the linear scores.
Eigen::MatrixXd logreg_logprobs(const LogRegModel& model, const Eigen::MatrixXd& x);

std::string serialize_mlp(const MlpModel& model);
MlpModel parse_mlp(std::string_view text);
std::string serialize_logreg(const LogRegModel& model);
LogRegModel parse_logreg(std::string_view text);

}  // namespace asas::learners
