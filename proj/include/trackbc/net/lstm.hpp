#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "trackbc/domain.hpp"
#include "trackbc/error.hpp"

namespace trackbc::net {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

struct NetworkShape {
  int input_dim = 4;
  int hidden = 64;
  int layers = 2;
  int output_dim = kNumActions;
  int m = 25;

  bool operator==(const NetworkShape&) const = default;
};

inline void check_shape(const NetworkShape& s) {
  if (s.input_dim <= 0 || s.hidden <= 0 || s.layers <= 0 || s.m <= 0) throw ShapeError("network shape must be positive");
  if (s.output_dim != kNumActions) throw ShapeError("output_dim must be 45");
}

// Gate blocks are stacked i, f, g, o along the rows.
struct LstmLayer {
  Mat w_ih;  // 4H x in
  Mat w_hh;  // 4H x H
  Vec bias;  // 4H
};

struct NetworkParams {
  std::vector<LstmLayer> lstm;
  Mat head_w;  // 45 x H
  Vec head_b;  // 45

  bool operator==(const NetworkParams& o) const {
    if (lstm.size() != o.lstm.size() || head_w != o.head_w || head_b != o.head_b) return false;
    for (std::size_t l = 0; l < lstm.size(); ++l) {
      if (lstm[l].w_ih != o.lstm[l].w_ih || lstm[l].w_hh != o.lstm[l].w_hh || lstm[l].bias != o.lstm[l].bias)
        return false;
    }
    return true;
  }
};

// Visits every tensor in a fixed order. `f(name, data, rows, cols)`.
template <class P, class F>
void for_each_tensor(P& p, F&& f) {
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    const std::string pre = "lstm" + std::to_string(l) + ".";
    f(pre + "weight_ih", p.lstm[l].w_ih.data(), p.lstm[l].w_ih.rows(), p.lstm[l].w_ih.cols());
    f(pre + "weight_hh", p.lstm[l].w_hh.data(), p.lstm[l].w_hh.rows(), p.lstm[l].w_hh.cols());
    f(pre + "bias", p.lstm[l].bias.data(), p.lstm[l].bias.size(), Eigen::Index{1});
  }
  f(std::string("head.weight"), p.head_w.data(), p.head_w.rows(), p.head_w.cols());
  f(std::string("head.bias"), p.head_b.data(), p.head_b.size(), Eigen::Index{1});
}

inline std::vector<std::span<double>> tensors(NetworkParams& p) {
  std::vector<std::span<double>> out;
  for_each_tensor(p, [&](const std::string&, double* d, Eigen::Index r, Eigen::Index c) {
    out.emplace_back(d, static_cast<std::size_t>(r * c));
  });
  return out;
}

inline std::vector<std::span<const double>> tensors(const NetworkParams& p) {
  std::vector<std::span<const double>> out;
  for_each_tensor(p, [&](const std::string&, const double* d, Eigen::Index r, Eigen::Index c) {
    out.emplace_back(d, static_cast<std::size_t>(r * c));
  });
  return out;
}

inline std::size_t param_count(const NetworkParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const double*, Eigen::Index r, Eigen::Index c) {
    n += static_cast<std::size_t>(r * c);
  });
  return n;
}

inline NetworkParams zero_params(const NetworkShape& s) {
  check_shape(s);
  NetworkParams p;
  const int h = s.hidden;
  for (int l = 0; l < s.layers; ++l) {
    const int in = l == 0 ? s.input_dim : h;
    p.lstm.push_back({Mat::Zero(4 * h, in), Mat::Zero(4 * h, h), Vec::Zero(4 * h)});
  }
  p.head_w = Mat::Zero(s.output_dim, h);
  p.head_b = Vec::Zero(s.output_dim);
  return p;
}

inline NetworkParams zeros_like(const NetworkParams& p) {
  NetworkParams z = p;
  for_each_tensor(z, [](const std::string&, double* d, Eigen::Index r, Eigen::Index c) {
    std::fill(d, d + r * c, 0.0);
  });
  return z;
}

namespace detail {
inline void fill_uniform(double* d, Eigen::Index n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = u(rng);
}
}  // namespace detail

inline void init_head(NetworkParams& p, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(p.head_w.cols()));
  detail::fill_uniform(p.head_w.data(), p.head_w.size(), bound, rng);
  p.head_b.setZero();
}

inline NetworkParams init_params(const NetworkShape& s, std::uint64_t seed) {
  NetworkParams p = zero_params(s);
  std::mt19937_64 rng(seed);
  const int h = s.hidden;
  for (auto& layer : p.lstm) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.w_ih.cols() + h));
    detail::fill_uniform(layer.w_ih.data(), layer.w_ih.size(), bound, rng);
    detail::fill_uniform(layer.w_hh.data(), layer.w_hh.size(), bound, rng);
    layer.bias.setZero();
    layer.bias.segment(h, h).setConstant(1.0);
  }
  init_head(p, rng);
  return p;
}

inline NetworkShape shape_of(const NetworkParams& p, int m) {
  NetworkShape s;
  s.input_dim = static_cast<int>(p.lstm.front().w_ih.cols());
  s.hidden = static_cast<int>(p.lstm.front().w_hh.cols());
  s.layers = static_cast<int>(p.lstm.size());
  s.output_dim = static_cast<int>(p.head_w.rows());
  s.m = m;
  return s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Inputs for a batch: one (input_dim x B) matrix per time step.
using Sequence = std::vector<Eigen::MatrixXd>;

struct LayerCache {
  std::vector<Eigen::MatrixXd> i, f, g, o, c, tanh_c, h;
};

struct ForwardCache {
  Sequence x;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd logits;  // 45 x B
};

inline ForwardCache forward_batch(const NetworkParams& p, Sequence x) {
  if (x.empty()) throw ShapeError("forward: empty sequence");
  const Eigen::Index in = p.lstm.front().w_ih.cols();
  for (const auto& xt : x) {
    if (xt.rows() != in || xt.cols() != x.front().cols()) throw ShapeError("forward: input dimension mismatch");
  }
  const Eigen::Index h = p.lstm.front().w_hh.cols();
  const Eigen::Index b = x.front().cols();
  const std::size_t m = x.size();

  ForwardCache cache;
  cache.x = std::move(x);
  const Sequence* below = &cache.x;
  for (const auto& layer : p.lstm) {
    LayerCache lc;
    Eigen::MatrixXd h_prev = Eigen::MatrixXd::Zero(h, b);
    Eigen::MatrixXd c_prev = Eigen::MatrixXd::Zero(h, b);
    for (std::size_t t = 0; t < m; ++t) {
      Eigen::MatrixXd a = layer.w_ih * (*below)[t] + layer.w_hh * h_prev;
      a.colwise() += layer.bias;
      Eigen::MatrixXd ig = a.middleRows(0, h).unaryExpr(&sigmoid);
      Eigen::MatrixXd fg = a.middleRows(h, h).unaryExpr(&sigmoid);
      Eigen::MatrixXd gg = a.middleRows(2 * h, h).array().tanh().matrix();
      Eigen::MatrixXd og = a.middleRows(3 * h, h).unaryExpr(&sigmoid);
      Eigen::MatrixXd c = (fg.array() * c_prev.array() + ig.array() * gg.array()).matrix();
      Eigen::MatrixXd tc = c.array().tanh().matrix();
      Eigen::MatrixXd hn = (og.array() * tc.array()).matrix();
      lc.i.push_back(std::move(ig));
      lc.f.push_back(std::move(fg));
      lc.g.push_back(std::move(gg));
      lc.o.push_back(std::move(og));
      lc.c.push_back(c);
      lc.tanh_c.push_back(std::move(tc));
      lc.h.push_back(hn);
      h_prev = std::move(hn);
      c_prev = std::move(c);
    }
    cache.layers.push_back(std::move(lc));
    below = &cache.layers.back().h;
  }
  cache.logits = p.head_w * cache.layers.back().h.back();
  cache.logits.colwise() += p.head_b;
  return cache;
}

// Packs already-normalized windows (each m x input_dim, row-major) into a sequence.
inline Sequence pack(std::span<const double* const> windows, int m, int input_dim) {
  Sequence x(static_cast<std::size_t>(m), Eigen::MatrixXd(input_dim, static_cast<Eigen::Index>(windows.size())));
  for (std::size_t s = 0; s < windows.size(); ++s) {
    for (int t = 0; t < m; ++t) {
      for (int k = 0; k < input_dim; ++k) {
        x[static_cast<std::size_t>(t)](k, static_cast<Eigen::Index>(s)) = windows[s][t * input_dim + k];
      }
    }
  }
  return x;
}

// X is m x input_dim, row-major.
inline Vec forward(const NetworkParams& p, std::span<const double> x, int m) {
  const int in = static_cast<int>(p.lstm.front().w_ih.cols());
  if (m <= 0 || static_cast<int>(x.size()) != m * in) throw ShapeError("forward: window must be m x input_dim");
  const double* w = x.data();
  return forward_batch(p, pack(std::span<const double* const>(&w, 1), m, in)).logits.col(0);
}

inline Vec softmax(const Vec& z) {
  const double mx = z.maxCoeff();
  Vec e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

inline double log_softmax_at(const Vec& z, int c) {
  const double mx = z.maxCoeff();
  return z(c) - mx - std::log((z.array() - mx).exp().sum());
}

using Weights = std::array<double, kNumActions>;

inline Weights unit_weights() {
  Weights w;
  w.fill(1.0);
  return w;
}

// -w_c ln softmax(z)_c for the true class c.
inline double loss(const Vec& z, int label, const Weights& w) {
  check_action_id(label);
  return -w[static_cast<std::size_t>(label)] * log_softmax_at(z, label);
}

inline double loss(const Vec& z, const OneHot45& label, const Weights& w) {
  double out = 0.0;
  for (int c = 0; c < kNumActions; ++c) {
    if (label[static_cast<std::size_t>(c)] != 0.0) out -= w[static_cast<std::size_t>(c)] * label[static_cast<std::size_t>(c)] * log_softmax_at(z, c);
  }
  return out;
}

// Lowest id wins ties.
inline int argmax(const Eigen::Ref<const Eigen::VectorXd>& z) {
  int best = 0;
  for (int c = 1; c < z.size(); ++c) {
    if (z(c) > z(best)) best = c;
  }
  return best;
}

struct BatchResult {
  double loss = 0.0;  // mean over the batch
  int correct = 0;
  NetworkParams grad;
};

// Mean weighted loss over the batch and its exact gradient by BPTT.
inline BatchResult backward(const NetworkParams& p, Sequence x, std::span<const int> labels, const Weights& w) {
  ForwardCache fc = forward_batch(p, std::move(x));
  const Eigen::Index b = fc.logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != b) throw ShapeError("backward: label count mismatch");
  const Eigen::Index h = p.lstm.front().w_hh.cols();
  const std::size_t m = fc.x.size();
  const double inv_b = 1.0 / static_cast<double>(b);

  BatchResult r;
  r.grad = zeros_like(p);
  Eigen::MatrixXd dz(fc.logits.rows(), b);
  for (Eigen::Index s = 0; s < b; ++s) {
    const int c = labels[static_cast<std::size_t>(s)];
    check_action_id(c);
    const Vec z = fc.logits.col(s);
    const Vec prob = softmax(z);
    const double wc = w[static_cast<std::size_t>(c)];
    r.loss += -wc * log_softmax_at(z, c);
    if (argmax(z) == c) ++r.correct;
    dz.col(s) = wc * inv_b * prob;
    dz(c, s) -= wc * inv_b;
  }
  r.loss *= inv_b;

  const Eigen::MatrixXd& h_top = fc.layers.back().h.back();
  r.grad.head_w = dz * h_top.transpose();
  r.grad.head_b = dz.rowwise().sum();

  // dh_ext[t]: gradient arriving at layer output h_t from above.
  std::vector<Eigen::MatrixXd> dh_ext(m, Eigen::MatrixXd::Zero(h, b));
  dh_ext.back() = p.head_w.transpose() * dz;

  for (std::size_t li = p.lstm.size(); li-- > 0;) {
    const LstmLayer& layer = p.lstm[li];
    const LayerCache& lc = fc.layers[li];
    LstmLayer& g = r.grad.lstm[li];
    const Sequence& in = li == 0 ? fc.x : fc.layers[li - 1].h;
    std::vector<Eigen::MatrixXd> dx(m);
    Eigen::MatrixXd dh_next = Eigen::MatrixXd::Zero(h, b);
    Eigen::MatrixXd dc_next = Eigen::MatrixXd::Zero(h, b);
    Eigen::MatrixXd da(4 * h, b);
    for (std::size_t t = m; t-- > 0;) {
      const Eigen::ArrayXXd dh = (dh_ext[t] + dh_next).array();
      const Eigen::ArrayXXd o = lc.o[t].array(), tc = lc.tanh_c[t].array();
      const Eigen::ArrayXXd i = lc.i[t].array(), f = lc.f[t].array(), gg = lc.g[t].array();
      const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc.square());
      const Eigen::ArrayXXd c_prev = t > 0 ? Eigen::ArrayXXd(lc.c[t - 1].array()) : Eigen::ArrayXXd::Zero(h, b);
      da.middleRows(0, h) = (dc * gg * i * (1.0 - i)).matrix();
      da.middleRows(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
      da.middleRows(2 * h, h) = (dc * i * (1.0 - gg.square())).matrix();
      da.middleRows(3 * h, h) = (dh * tc * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();

      g.w_ih.noalias() += da * in[t].transpose();
      if (t > 0) g.w_hh.noalias() += da * lc.h[t - 1].transpose();
      g.bias += da.rowwise().sum();
      dh_next.noalias() = layer.w_hh.transpose() * da;
      if (li > 0) dx[t] = layer.w_ih.transpose() * da;
    }
    if (li > 0) dh_ext = std::move(dx);
  }
  return r;
}

}  // namespace trackbc::net
