#pragma once

#include <cstdint>
#include <vector>

#include "ufg/autodiff.hpp"
#include "ufg/tensor.hpp"

namespace ufg {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct LookaheadConfig {
  int k = 5;
  double alpha = 0.5;
  void validate() const;
};

// slow += alpha * (fast - slow); fast := slow, applied when step % k == 0.
void lookahead_step(Tensor& fast, Tensor& slow, int k, double alpha,
                    int64_t step);

// Adam wrapped in Lookahead. Parameter order is fixed at construction and
// matches the owning ParamStore, which keeps checkpoints deterministic.
class Optimizer {
 public:
  Optimizer(std::vector<ad::NodePtr> params, AdamConfig acfg,
            LookaheadConfig lcfg);

  void zero_grad();
  void step();
  int64_t step_count() const { return t_; }

  // state access for TrainState serialization
  const std::vector<ad::NodePtr>& params() const { return params_; }
  std::vector<Tensor>& moments_m() { return m_; }
  std::vector<Tensor>& moments_v() { return v_; }
  std::vector<Tensor>& slow_weights() { return slow_; }
  void set_step_count(int64_t t) { t_ = t; }

 private:
  std::vector<ad::NodePtr> params_;
  std::vector<Tensor> m_, v_, slow_;
  int64_t t_ = 0;
  AdamConfig acfg_;
  LookaheadConfig lcfg_;
};

}  // namespace ufg
