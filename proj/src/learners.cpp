#include "asas/learners.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "asas/error.hpp"
#include "asas/numeric.hpp"
#include "asas/rng.hpp"
#include "asas/textio.hpp"

namespace asas::learners {

// ---------------------------------------------------------------------------
// MLP

Eigen::Index MlpModel::param_count(int d, int h, int k) {
  return static_cast<Eigen::Index>(h) * d + h + static_cast<Eigen::Index>(k) * h + k;
}

MlpModel MlpModel::zeros(int input_dim, int hidden_dim, int k) {
  if (input_dim < 1 || hidden_dim < 1 || k < 2) fail(Errc::InvalidArgument, "bad MLP shape");
  return {input_dim, hidden_dim, k, Eigen::VectorXd::Zero(param_count(input_dim, hidden_dim, k))};
}

MlpModel MlpModel::init(int input_dim, int hidden_dim, int k, std::uint64_t seed) {
  MlpModel m = zeros(input_dim, hidden_dim, k);
  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto w = m.w1(); auto& x : w.reshaped()) x = s1 * rng.normal();
  for (auto w = m.w2(); auto& x : w.reshaped()) x = s2 * rng.normal();
  return m;
}

namespace {

struct Offsets {
  Eigen::Index w1, b1, w2, b2;
};

Offsets offsets(const MlpModel& m) {
  const Eigen::Index w1 = 0;
  const Eigen::Index b1 = w1 + static_cast<Eigen::Index>(m.hidden_dim) * m.input_dim;
  const Eigen::Index w2 = b1 + m.hidden_dim;
  const Eigen::Index b2 = w2 + static_cast<Eigen::Index>(m.k) * m.hidden_dim;
  return {w1, b1, w2, b2};
}

}  // namespace

Eigen::Map<const Eigen::MatrixXd> MlpModel::w1() const {
  return {params.data() + offsets(*this).w1, hidden_dim, input_dim};
}
Eigen::Map<const Eigen::VectorXd> MlpModel::b1() const { return {params.data() + offsets(*this).b1, hidden_dim}; }
Eigen::Map<const Eigen::MatrixXd> MlpModel::w2() const { return {params.data() + offsets(*this).w2, k, hidden_dim}; }
Eigen::Map<const Eigen::VectorXd> MlpModel::b2() const { return {params.data() + offsets(*this).b2, k}; }
Eigen::Map<Eigen::MatrixXd> MlpModel::w1() { return {params.data() + offsets(*this).w1, hidden_dim, input_dim}; }
Eigen::Map<Eigen::VectorXd> MlpModel::b1() { return {params.data() + offsets(*this).b1, hidden_dim}; }
Eigen::Map<Eigen::MatrixXd> MlpModel::w2() { return {params.data() + offsets(*this).w2, k, hidden_dim}; }
Eigen::Map<Eigen::VectorXd> MlpModel::b2() { return {params.data() + offsets(*this).b2, k}; }

namespace {

Eigen::MatrixXd hidden_pre(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_dim)
    fail(Errc::DimMismatch, "features have " + std::to_string(x.cols()) + " columns, model expects " +
                                std::to_string(m.input_dim));
  Eigen::MatrixXd a = x * m.w1().transpose();
  a.rowwise() += m.b1().transpose();
  return a;
}

Eigen::MatrixXd output(const MlpModel& m, const Eigen::MatrixXd& hidden) {
  Eigen::MatrixXd z = hidden * m.w2().transpose();
  z.rowwise() += m.b2().transpose();
  return z;
}

void check_labels(std::span<const int> labels, Eigen::Index rows, int k) {
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    fail(Errc::LengthMismatch, std::to_string(labels.size()) + " labels for " + std::to_string(rows) + " rows");
  for (int y : labels)
    if (y < 0 || y >= k) fail(Errc::LabelOutOfRange, "label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
}

}  // namespace

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& features) {
  return output(model, hidden_pre(model, features).cwiseMax(0.0));
}

double bce_loss(const Eigen::MatrixXd& logits, std::span<const int> labels, Eigen::MatrixXd* grad) {
  const auto k = static_cast<int>(logits.cols());
  check_labels(labels, logits.rows(), k);
  const double scale = 1.0 / static_cast<double>(logits.size());
  if (grad) grad->resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double z = logits(i, j);
      const double t = labels[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0;
      // -[t ln s(z) + (1-t) ln(1-s(z))] = softplus(z) - t z
      total += softplus(z) - t * z;
      if (grad) (*grad)(i, j) = (sigmoid(z) - t) * scale;
    }
  }
  return total * scale;
}

double mlp_loss(const MlpModel& model, const Eigen::MatrixXd& features, std::span<const int> labels,
                Eigen::VectorXd* grad) {
  const Eigen::MatrixXd a = hidden_pre(model, features);
  const Eigen::MatrixXd h = a.cwiseMax(0.0);
  const Eigen::MatrixXd z = output(model, h);
  if (!grad) return bce_loss(z, labels);

  Eigen::MatrixXd dz;
  const double loss = bce_loss(z, labels, &dz);
  MlpModel g = MlpModel::zeros(model.input_dim, model.hidden_dim, model.k);
  g.w2() = dz.transpose() * h;
  g.b2() = dz.colwise().sum().transpose();
  const Eigen::MatrixXd da = (dz * model.w2()).cwiseProduct((a.array() > 0.0).cast<double>().matrix());
  g.w1() = da.transpose() * features;
  g.b1() = da.colwise().sum().transpose();
  *grad = std::move(g.params);
  return loss;
}

// ---------------------------------------------------------------------------
// Optimization

void adamw_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads, AdamState& state,
                double lr, double weight_decay) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    fail(Errc::DimMismatch, "AdamW shapes disagree");
  if (state.step < 0) fail(Errc::InvalidArgument, "negative step counter");
  if (!grads.allFinite()) fail(Errc::NonFiniteGradient, "gradient has non-finite entries");
  ++state.step;
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grads;
  state.v = kAdamBeta2 * state.v + (1.0 - kAdamBeta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  params.array() -= lr * ((state.m.array() / c1) / ((state.v.array() / c2).sqrt() + kAdamEps) +
                          weight_decay * params.array());
}

double linear_lr(long step, long total_steps, double base_lr) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    fail(Errc::InvalidArgument, "linear_lr needs 0 <= step <= total_steps, total_steps >= 1");
  return base_lr * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

// ---------------------------------------------------------------------------
// Training

int best_epoch(std::span<const EpochRecord> history) {
  if (history.empty()) fail(Errc::EmptyInput, "empty training history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].dev_qwk > history[best].dev_qwk) best = i;
  return history[best].epoch;
}

TrainResult train_early_stop(MlpModel model, const Dataset& train, const Dataset& dev, const TrainConfig& config,
                             const QwkFn& qwk_fn) {
  if (!(config.learning_rate > 0.0) || config.batch_size < 1 || config.epochs < 1)
    fail(Errc::InvalidArgument, "train config needs lr > 0, batch >= 1, epochs >= 1");
  check_labels(train.y, train.x.rows(), model.k);
  check_labels(dev.y, dev.x.rows(), model.k);
  if (train.x.rows() == 0 || dev.x.rows() == 0) fail(Errc::EmptyInput, "train and dev must be non-empty");

  const auto n = static_cast<std::size_t>(train.x.rows());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  const long total_steps = steps_per_epoch * config.epochs;

  Rng rng(derive_seed(config.seed, 1));
  AdamState state = AdamState::zeros(model.params.size());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  double best_qwk = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd xb;
  std::vector<int> yb;
  Eigen::VectorXd grad;
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      xb.resize(static_cast<Eigen::Index>(len), train.x.cols());
      yb.resize(len);
      for (std::size_t r = 0; r < len; ++r) {
        xb.row(static_cast<Eigen::Index>(r)) = train.x.row(static_cast<Eigen::Index>(order[start + r]));
        yb[r] = train.y[order[start + r]];
      }
      const double loss = mlp_loss(model, xb, yb, &grad);
      if (!std::isfinite(loss)) fail(Errc::NonFiniteLoss, "non-finite training loss in epoch " + std::to_string(epoch));
      loss_sum += loss * static_cast<double>(len);
      adamw_step(model.params, grad, state, linear_lr(step, total_steps, config.learning_rate), config.weight_decay);
      ++step;
    }
    const auto predicted = argmax_rows(mlp_forward(model, dev.x));
    const double q = qwk_fn(dev.y, predicted);
    result.history.push_back({epoch, loss_sum / static_cast<double>(n), q});
    if (q > best_qwk) {
      best_qwk = q;
      result.best = model;
      result.best_epoch = epoch;
    }
  }
  if (result.best_epoch == 0) {  // every epoch produced NaN QWK
    result.best = model;
    result.best_epoch = config.epochs;
  }
  return result;
}

std::string history_tsv(std::span<const EpochRecord> history) {
  std::ostringstream os;
  os << "epoch\tloss\tdev_qwk\n";
  for (const auto& h : history)
    os << h.epoch << '\t' << textio::format_double(h.train_loss) << '\t' << textio::format_double(h.dev_qwk) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Logistic regression

double logreg_objective(const Eigen::MatrixXd& x, std::span<const int> labels, double l2,
                        const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias, Eigen::MatrixXd* grad_w,
                        Eigen::VectorXd* grad_b) {
  const auto k = static_cast<int>(bias.size());
  check_labels(labels, x.rows(), k);
  Eigen::MatrixXd scores = x * weights;
  scores.rowwise() += bias.transpose();
  const Eigen::MatrixXd logp = log_softmax_rows(scores);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  double ce = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) ce -= logp(i, labels[static_cast<std::size_t>(i)]);
  const double value = ce * inv_n + 0.5 * l2 * weights.squaredNorm();
  if (grad_w || grad_b) {
    Eigen::MatrixXd residual = logp.array().exp().matrix();
    for (Eigen::Index i = 0; i < x.rows(); ++i) residual(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    residual *= inv_n;
    if (grad_w) *grad_w = x.transpose() * residual + l2 * weights;
    if (grad_b) *grad_b = residual.colwise().sum().transpose();
  }
  return value;
}

LogRegModel logreg_fit(const Eigen::MatrixXd& x, std::span<const int> labels, int k, double l2,
                       const LogRegOptions& options) {
  if (k < 2) fail(Errc::InvalidArgument, "logistic regression needs k >= 2");
  check_labels(labels, x.rows(), k);
  if (x.rows() < k) fail(Errc::InvalidArgument, "need at least k rows");
  bool two = false;
  for (int y : labels) two |= y != labels.front();
  if (!two) fail(Errc::SingleClass, "labels span a single class");

  LogRegModel m;
  m.l2 = l2;
  m.weights = Eigen::MatrixXd::Zero(x.cols(), k);
  m.bias = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd gw, gw_new;
  Eigen::VectorXd gb, gb_new;
  double f = logreg_objective(x, labels, l2, m.weights, m.bias, &gw, &gb);
  double step = 1.0;
  int it = 0;
  auto inf_norm = [](const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    return std::max(a.size() ? a.cwiseAbs().maxCoeff() : 0.0, b.cwiseAbs().maxCoeff());
  };
  for (; it < options.max_iterations; ++it) {
    if (inf_norm(gw, gb) <= options.tolerance) break;
    const double g2 = gw.squaredNorm() + gb.squaredNorm();
    double t = step;
    Eigen::MatrixXd w_new;
    Eigen::VectorXd b_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      w_new = m.weights - t * gw;
      b_new = m.bias - t * gb;
      f_new = logreg_objective(x, labels, l2, w_new, b_new, &gw_new, &gb_new);
      if (f_new <= f - 1e-4 * t * g2) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no descent possible at double precision
    const double sy = (w_new - m.weights).cwiseProduct(gw_new - gw).sum() + (b_new - m.bias).dot(gb_new - gb);
    const double ss = (w_new - m.weights).squaredNorm() + (b_new - m.bias).squaredNorm();
    step = sy > 0.0 ? ss / sy : 2.0 * t;
    m.weights = std::move(w_new);
    m.bias = std::move(b_new);
    gw.swap(gw_new);
    gb.swap(gb_new);
    f = f_new;
  }
  m.iterations = it;
  m.grad_inf_norm = inf_norm(gw, gb);
  return m;
}

Eigen::MatrixXd logreg_logprobs(const LogRegModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.weights.rows())
    fail(Errc::DimMismatch, "design has " + std::to_string(x.cols()) + " columns, head expects " +
                                std::to_string(model.weights.rows()));
  Eigen::MatrixXd scores = x * model.weights;
  scores.rowwise() += model.bias.transpose();
  return log_softmax_rows(scores);
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_mlp(const MlpModel& m) {
  std::ostringstream os;
  os << "asas-mlp v1\n";
  os << "input_dim=" << m.input_dim << "\nhidden_dim=" << m.hidden_dim << "\nk=" << m.k << '\n';
  textio::write_vector(os, "params", m.params);
  os << "end\n";
  return os.str();
}

MlpModel parse_mlp(std::string_view text) {
  textio::LineReader in{std::string(text)};
  if (in.expect("magic") != "asas-mlp v1") fail(Errc::HeaderMismatch, "not an MLP model file");
  MlpModel m;
  m.input_dim = static_cast<int>(textio::parse_int(in.expect_value("input_dim")));
  m.hidden_dim = static_cast<int>(textio::parse_int(in.expect_value("hidden_dim")));
  m.k = static_cast<int>(textio::parse_int(in.expect_value("k")));
  m.params = textio::read_vector(in, "params");
  if (m.params.size() != MlpModel::param_count(m.input_dim, m.hidden_dim, m.k))
    fail(Errc::DimMismatch, "parameter count does not match the declared shape");
  if (in.expect("end") != "end") fail(Errc::HeaderMismatch, "missing end marker");
  return m;
}

std::string serialize_logreg(const LogRegModel& m) {
  std::ostringstream os;
  os << "asas-logreg v1\n";
  os << "l2=" << textio::format_double(m.l2) << "\niterations=" << m.iterations
     << "\ngrad_inf_norm=" << textio::format_double(m.grad_inf_norm) << '\n';
  textio::write_matrix(os, "weights", m.weights);
  textio::write_vector(os, "bias", m.bias);
  os << "end\n";
  return os.str();
}

LogRegModel parse_logreg(std::string_view text) {
  textio::LineReader in{std::string(text)};
  if (in.expect("magic") != "asas-logreg v1") fail(Errc::HeaderMismatch, "not a logistic-regression model file");
  LogRegModel m;
  m.l2 = textio::parse_double(in.expect_value("l2"));
  m.iterations = static_cast<int>(textio::parse_int(in.expect_value("iterations")));
  m.grad_inf_norm = textio::parse_double(in.expect_value("grad_inf_norm"));
  m.weights = textio::read_matrix(in, "weights");
  m.bias = textio::read_vector(in, "bias");
  if (m.weights.cols() != m.bias.size()) fail(Errc::DimMismatch, "weights and bias disagree on k");
  if (in.expect("end") != "end") fail(Errc::HeaderMismatch, "missing end marker");
  return m;
}

}  // namespace asas::learners
