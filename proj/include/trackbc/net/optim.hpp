#pragma once

#include <cmath>
#include <cstdint>

#include "trackbc/net/lstm.hpp"

namespace trackbc::net {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  NetworkParams m1, m2;
  std::int64_t step = 0;
};

inline AdamState adam_init(const NetworkParams& p, AdamConfig cfg = {}) { return {cfg, zeros_like(p), zeros_like(p), 0}; }

inline void adam_step(NetworkParams& p, const NetworkParams& grad, AdamState& st) {
  ++st.step;
  const auto& c = st.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
  const auto gs = tensors(grad);
  auto ws = tensors(p);
  auto m1s = tensors(st.m1);
  auto m2s = tensors(st.m2);
  if (gs.size() != ws.size() || m1s.size() != ws.size()) throw ShapeError("adam_step: parameter/gradient mismatch");
  for (std::size_t k = 0; k < ws.size(); ++k) {
    if (gs[k].size() != ws[k].size()) throw ShapeError("adam_step: parameter/gradient mismatch");
    for (std::size_t i = 0; i < ws[k].size(); ++i) {
      const double g = gs[k][i];
      double& a = m1s[k][i];
      double& b = m2s[k][i];
      a = c.beta1 * a + (1.0 - c.beta1) * g;
      b = c.beta2 * b + (1.0 - c.beta2) * g * g;
      ws[k][i] -= c.lr * (a / bc1) / (std::sqrt(b / bc2) + c.eps);
    }
  }
}

}  // namespace trackbc::net
