#include "ufg/optim.hpp"

#include <cmath>

#include "ufg/errors.hpp"

namespace ufg {

void LookaheadConfig::validate() const {
  if (k < 1) throw ConfigError("lookahead: k must be >= 1");
  if (alpha < 0.0 || alpha > 1.0)
    throw ConfigError("lookahead: alpha must be in [0,1]");
}

void lookahead_step(Tensor& fast, Tensor& slow, int k, double alpha,
                    int64_t step) {
  if (k < 1) throw ConfigError("lookahead_step: k must be >= 1");
  require_same_shape(fast, slow, "lookahead_step");
  if (step % k != 0) return;
  for (int64_t i = 0; i < fast.size(); ++i) {
    slow[i] += alpha * (fast[i] - slow[i]);
    fast[i] = slow[i];
  }
}

Optimizer::Optimizer(std::vector<ad::NodePtr> params, AdamConfig acfg,
                     LookaheadConfig lcfg)
    : params_(std::move(params)), acfg_(acfg), lcfg_(lcfg) {
  lcfg_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  slow_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
    slow_.push_back(p->value);  // slow weights start at the init point
  }
}

void Optimizer::zero_grad() {
  for (auto& p : params_) {
    p->ensure_grad();
    p->zero_grad();
  }
}

void Optimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(acfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(acfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i]->value;
    const Tensor& g = params_[i]->grad;
    if (g.size() != p.size()) continue;  // no gradient seen this step
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < p.size(); ++j) {
      m[j] = acfg_.beta1 * m[j] + (1.0 - acfg_.beta1) * g[j];
      v[j] = acfg_.beta2 * v[j] + (1.0 - acfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] -= acfg_.lr * mhat / (std::sqrt(vhat) + acfg_.eps);
    }
    lookahead_step(p, slow_[i], lcfg_.k, lcfg_.alpha, t_);
  }
}

}  // namespace ufg
