#include <Eigen/Cholesky>
#include <cmath>
#include <random>

#include "icpcov/error.hpp"
#include "icpcov/predictor.hpp"

namespace icpcov {

namespace {

// Lower-triangle position of raw index k (row-major).
constexpr std::array<std::pair<int, int>, 21> kLowerIndex = [] {
  std::array<std::pair<int, int>, 21> idx{};
  int k = 0;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c <= r; ++c) idx[static_cast<std::size_t>(k++)] = {r, c};
  return idx;
}();

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double huber_derivative(double d, double d0) {
  if (std::abs(d) <= d0) return d;
  return d > 0 ? d0 : -d0;
}

struct Activations {
  std::vector<Eigen::VectorXd> h;  // h[0] = standardized input, h[i] = output of layer i
};

Eigen::VectorXd standardize(const ModelParams& p, const Eigen::VectorXd& f) {
  if (f.size() != p.feature_mean.size()) {
    throw Error(ErrorCode::InvalidArgument, "feature dimension " + std::to_string(f.size()) + " != model input " +
                                                std::to_string(p.feature_mean.size()));
  }
  return (f - p.feature_mean).cwiseQuotient(p.feature_std);
}

Vector21d run_layers(const ModelParams& p, const Eigen::VectorXd& f, Activations* act) {
  Eigen::VectorXd h = standardize(p, f);
  if (act) act->h.push_back(h);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    Eigen::VectorXd a = p.layers[i].W * h + p.layers[i].b;
    if (i + 1 < p.layers.size()) a = a.array().tanh().matrix();
    h = std::move(a);
    if (act) act->h.push_back(h);
  }
  if (h.size() != 21) throw Error(ErrorCode::InvalidArgument, "output layer must emit 21 values");
  return h;
}

}  // namespace

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  return n;
}

ModelParams init_params(int input_dim, const std::vector<int>& hidden, std::uint64_t seed, double epsilon) {
  ModelParams p;
  p.epsilon = epsilon;
  p.feature_mean = Eigen::VectorXd::Zero(input_dim);
  p.feature_std = Eigen::VectorXd::Ones(input_dim);
  std::mt19937_64 rng(seed);
  std::vector<int> sizes{input_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(21);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i], out = sizes[i + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer l;
    l.W.resize(out, in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.W(r, c) = u(rng);
    l.b = Eigen::VectorXd::Zero(out);
    p.layers.push_back(std::move(l));
  }
  return p;
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double inverse_softplus(double y) {
  if (!(y > 0)) throw Error(ErrorCode::InvalidArgument, "softplus is positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

Matrix6d assemble_cholesky(const Vector21d& raw) {
  Matrix6d L = Matrix6d::Zero();
  for (int k = 0; k < 21; ++k) {
    const auto [r, c] = kLowerIndex[static_cast<std::size_t>(k)];
    L(r, c) = r == c ? softplus(raw[k]) : raw[k];
  }
  return L;
}

Vector21d raw_from_cholesky(const Matrix6d& L) {
  Vector21d raw;
  for (int k = 0; k < 21; ++k) {
    const auto [r, c] = kLowerIndex[static_cast<std::size_t>(k)];
    raw[k] = r == c ? inverse_softplus(L(r, c)) : L(r, c);
  }
  return raw;
}

Cov6 covariance_from_raw(const Vector21d& raw, double epsilon) {
  const Matrix6d L = assemble_cholesky(raw);
  Cov6 Y = L * L.transpose();
  Y = 0.5 * (Y + Y.transpose()).eval();
  Y.diagonal().array() += epsilon;
  return Y;
}

ForwardResult forward(const ModelParams& params, const Eigen::VectorXd& features) {
  ForwardResult out;
  out.raw = run_layers(params, features, nullptr);
  out.L = assemble_cholesky(out.raw);
  out.Yhat = covariance_from_raw(out.raw, params.epsilon);
  return out;
}

void TrainConfig::validate() const {
  if (alpha < 0 || beta < 0 || !(huber_delta > 0) || !(epsilon > 0) || !(learning_rate > 0) || epochs < 1 ||
      batch_size < 1 || weight_floor_fraction < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid training configuration");
  }
}

double kl_divergence(const Cov6& A, const Cov6& B) {
  Eigen::LLT<Matrix6d> lb(B), la(A);
  if (lb.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, "reference covariance is not positive definite");
  if (la.info() != Eigen::Success) throw Error(ErrorCode::NotPSD, "covariance is not positive definite");
  const double logdet_b = 2.0 * lb.matrixLLT().diagonal().array().log().sum();
  const double logdet_a = 2.0 * la.matrixLLT().diagonal().array().log().sum();
  const double tr = lb.solve(A).trace();
  return 0.5 * (tr - 6.0 + logdet_b - logdet_a);
}

double huber(double delta, double delta0) {
  const double a = std::abs(delta);
  return a <= delta0 ? 0.5 * delta * delta : delta0 * (a - 0.5 * delta0);
}

LossTerms loss(const Cov6& Yhat, const Cov6& Ybar, const TrainConfig& cfg) {
  Cov6 floored = Ybar;
  floored.diagonal().array() += cfg.epsilon;
  LossTerms t;
  t.kl = kl_divergence(Yhat, floored);
  for (int r = 0; r < 6; ++r)
    for (int c = r; c < 6; ++c) t.huber += huber(Yhat(r, c) - Ybar(r, c), cfg.huber_delta);
  t.total = cfg.alpha * t.kl + cfg.beta * t.huber;
  return t;
}

Matrix6d loss_gradient_wrt_yhat(const Cov6& Yhat, const Cov6& Ybar, const TrainConfig& cfg) {
  Cov6 floored = Ybar;
  floored.diagonal().array() += cfg.epsilon;
  Eigen::LLT<Matrix6d> lb(floored), la(Yhat);
  if (lb.info() != Eigen::Success || la.info() != Eigen::Success) {
    throw Error(ErrorCode::NotPSD, "loss gradient needs positive definite covariances");
  }
  const Matrix6d I = Matrix6d::Identity();
  Matrix6d G = 0.5 * cfg.alpha * (lb.solve(I) - la.solve(I));
  for (int r = 0; r < 6; ++r)
    for (int c = r; c < 6; ++c) G(r, c) += cfg.beta * huber_derivative(Yhat(r, c) - Ybar(r, c), cfg.huber_delta);
  return G;
}

std::vector<DenseLayer> gradient(const ModelParams& params, const Eigen::VectorXd& features, const Cov6& Ybar,
                                 const TrainConfig& cfg, LossTerms* terms) {
  Activations act;
  const Vector21d raw = run_layers(params, features, &act);
  const Matrix6d L = assemble_cholesky(raw);
  const Cov6 Yhat = covariance_from_raw(raw, params.epsilon);
  if (terms) *terms = loss(Yhat, Ybar, cfg);

  const Matrix6d G = loss_gradient_wrt_yhat(Yhat, Ybar, cfg);
  const Matrix6d dL = (G + G.transpose()) * L;
  Eigen::VectorXd delta(21);
  for (int k = 0; k < 21; ++k) {
    const auto [r, c] = kLowerIndex[static_cast<std::size_t>(k)];
    delta[k] = r == c ? dL(r, c) * sigmoid(raw[k]) : dL(r, c);
  }

  std::vector<DenseLayer> grads(params.layers.size());
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const Eigen::VectorXd& input = act.h[i];
    grads[i].W = delta * input.transpose();
    grads[i].b = delta;
    if (i == 0) break;
    Eigen::VectorXd back = params.layers[i].W.transpose() * delta;
    const Eigen::VectorXd& h = act.h[i];  // tanh output of layer i-1
    delta = back.array() * (1.0 - h.array().square());
  }
  return grads;
}

Eigen::VectorXd flatten(const std::vector<DenseLayer>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
  Eigen::VectorXd flat(static_cast<Eigen::Index>(n));
  Eigen::Index o = 0;
  for (const auto& l : layers) {
    flat.segment(o, l.W.size()) = l.W.reshaped();
    o += l.W.size();
    flat.segment(o, l.b.size()) = l.b;
    o += l.b.size();
  }
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, std::vector<DenseLayer>& layers) {
  Eigen::Index o = 0;
  for (auto& l : layers) {
    l.W.reshaped() = flat.segment(o, l.W.size());
    o += l.W.size();
    l.b = flat.segment(o, l.b.size());
    o += l.b.size();
  }
  if (o != flat.size()) throw Error(ErrorCode::InvalidArgument, "flat parameter vector has the wrong size");
}

}  // namespace icpcov
