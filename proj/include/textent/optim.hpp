#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "textent/common.hpp"

namespace textent {

/// Adadelta on one block of parameters with its two running averages:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
template <typename Real>
void adadelta_step(std::span<Real> x, std::span<Real> sq_grad, std::span<Real> sq_delta,
                   std::span<const Real> grad, double rho, double eps) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = grad[i];
    const double eg2 = rho * sq_grad[i] + (1.0 - rho) * g * g;
    const double dx = -std::sqrt(sq_delta[i] + eps) / std::sqrt(eg2 + eps) * g;
    sq_grad[i] = static_cast<Real>(eg2);
    sq_delta[i] = static_cast<Real>(rho * sq_delta[i] + (1.0 - rho) * dx * dx);
    x[i] = static_cast<Real>(x[i] + dx);
  }
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. step is the 1-based update count.
template <typename Real>
void adam_step(std::span<Real> x, std::span<Real> m, std::span<Real> v, std::span<const Real> grad,
               std::size_t step, const AdamConfig& cfg) {
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<Real>(mi);
    v[i] = static_cast<Real>(vi);
    x[i] = static_cast<Real>(x[i] - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

/// Moment buffers for a dense parameter block.
template <typename Real>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg) : cfg_(cfg), m_(n, Real(0)), v_(n, Real(0)) {}

  void step(std::span<Real> x, std::span<const Real> grad) {
    require(x.size() == m_.size() && grad.size() == m_.size(), ErrorKind::shape_mismatch,
            "Adam state does not match parameter size");
    adam_step(x, std::span<Real>(m_), std::span<Real>(v_), grad, ++t_, cfg_);
  }

  std::size_t steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<Real> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace textent
