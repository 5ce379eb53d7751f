#pragma once

#include <cmath>
#include <vector>

namespace ggf {

// Adaptive-moment first-order optimizer on a flat parameter vector.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(size_t n, double lr = 1e-4, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

  void set_learning_rate(double lr) { lr_ = lr; }

  void step(const std::vector<double>& grad, std::vector<double>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace ggf
