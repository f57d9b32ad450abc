#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackbc/demo.hpp"
#include "trackbc/net/checkpoint.hpp"
#include "trackbc/net/lstm.hpp"
#include "trackbc/net/optim.hpp"

namespace trackbc::net {

struct TrainConfig {
  int steps = 3000;
  int batch = 32;
  double lr = 0.001;
  int eval_every = 50;
  std::optional<double> target_accuracy;  // stop at the first evaluation reaching it
  std::vector<double> thresholds{0.9, 0.95};
  bool balance_classes = true;
};

struct EvalPoint {
  int step = 0;
  double accuracy = 0.0;
  double loss = 0.0;
};

struct TrainReport {
  std::vector<double> loss;      // per step, batch mean
  std::vector<double> accuracy;  // per step, batch
  std::vector<EvalPoint> evals;  // full training set
  std::vector<std::pair<double, std::optional<int>>> steps_to_threshold;
  bool transfer = false;
  int steps_run = 0;
  double final_loss = 0.0;
  double final_accuracy = 0.0;

  std::optional<int> steps_to(double threshold) const {
    for (const auto& [t, s] : steps_to_threshold) {
      if (t == threshold) return s;
    }
    return std::nullopt;
  }
};

inline nlohmann::json report_to_json(const TrainReport& r) {
  nlohmann::json thr = nlohmann::json::array();
  for (const auto& [t, s] : r.steps_to_threshold) {
    thr.push_back({{"threshold", t}, {"steps", s ? nlohmann::json(*s) : nlohmann::json(nullptr)}});
  }
  nlohmann::json evals = nlohmann::json::array();
  for (const auto& e : r.evals) evals.push_back({{"step", e.step}, {"accuracy", e.accuracy}, {"loss", e.loss}});
  return {{"transfer", r.transfer},
          {"steps_run", r.steps_run},
          {"final_loss", r.final_loss},
          {"final_accuracy", r.final_accuracy},
          {"steps_to_threshold", thr},
          {"evals", evals},
          {"loss", r.loss},
          {"accuracy", r.accuracy}};
}

inline Normalization fit_normalization(const WindowedDataset& ds) {
  Normalization n;
  if (ds.windows.empty()) return n;
  const double count = static_cast<double>(ds.windows.size());
  for (const auto& o : ds.windows) {
    const auto v = o.as_array();
    for (std::size_t k = 0; k < 4; ++k) n.mean[k] += v[k];
  }
  for (auto& m : n.mean) m /= count;
  std::array<double, 4> var{};
  for (const auto& o : ds.windows) {
    const auto v = o.as_array();
    for (std::size_t k = 0; k < 4; ++k) var[k] += (v[k] - n.mean[k]) * (v[k] - n.mean[k]);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double sd = std::sqrt(var[k] / count);
    n.scale[k] = sd > 1e-6 ? sd : 1.0;
  }
  return n;
}

// Normalized windows, flat: sample-major, then time, then feature.
struct PreparedSet {
  int m = 0;
  std::vector<double> x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  const double* window(std::size_t i) const { return x.data() + i * static_cast<std::size_t>(m) * 4; }
};

inline PreparedSet prepare(const WindowedDataset& ds, const Normalization& norm) {
  PreparedSet p;
  p.m = ds.m;
  p.labels = ds.labels;
  p.x.reserve(ds.windows.size() * 4);
  for (const auto& o : ds.windows) {
    const auto v = norm.apply(o);
    p.x.insert(p.x.end(), v.begin(), v.end());
  }
  return p;
}

inline Sequence gather(const PreparedSet& set, std::span<const std::size_t> idx) {
  std::vector<const double*> ptrs;
  ptrs.reserve(idx.size());
  for (auto i : idx) ptrs.push_back(set.window(i));
  return pack(ptrs, set.m, 4);
}

// Full-set accuracy and mean weighted loss, evaluated in fixed-size chunks.
inline EvalPoint evaluate(const NetworkParams& p, const PreparedSet& set, const Weights& w) {
  EvalPoint e;
  if (set.size() == 0) return e;
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  int correct = 0;
  double total = 0.0;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + kChunk); ++i) idx.push_back(i);
    const auto fc = forward_batch(p, gather(set, idx));
    for (std::size_t s = 0; s < idx.size(); ++s) {
      const Vec z = fc.logits.col(static_cast<Eigen::Index>(s));
      const int c = set.labels[idx[s]];
      if (argmax(z) == c) ++correct;
      total += loss(z, c, w);
    }
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  e.loss = total / static_cast<double>(set.size());
  return e;
}

inline double evaluate_accuracy(const NetworkCheckpoint& ck, const WindowedDataset& ds) {
  if (ds.m != ck.shape.m) throw ShapeError("evaluate_accuracy: dataset m does not match checkpoint");
  if (ds.size() == 0) throw SizeError("evaluate_accuracy: empty dataset");
  return evaluate(ck.params, prepare(ds, ck.norm), unit_weights()).accuracy;
}

namespace detail {

inline std::uint64_t batch_seed(std::uint64_t seed) { return seed ^ 0xd1b54a32d192ed03ULL; }

inline TrainReport run_training(NetworkParams& params, const PreparedSet& set, const Weights& w, const TrainConfig& cfg,
                                std::uint64_t seed) {
  if (cfg.batch <= 0 || cfg.steps < 0 || cfg.eval_every <= 0) throw DomainError("train: bad config");
  TrainReport rep;
  for (double t : cfg.thresholds) rep.steps_to_threshold.push_back({t, std::nullopt});
  AdamState adam = adam_init(params, AdamConfig{cfg.lr});
  std::mt19937_64 rng(batch_seed(seed));
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  std::vector<std::size_t> idx;

  auto record_eval = [&](int step) {
    const EvalPoint e = evaluate(params, set, w);
    rep.evals.push_back({step, e.accuracy, e.loss});
    for (auto& [t, s] : rep.steps_to_threshold) {
      if (!s && e.accuracy >= t) s = step;
    }
    return e;
  };

  EvalPoint last = record_eval(0);
  bool stop = cfg.target_accuracy && last.accuracy >= *cfg.target_accuracy;
  for (int step = 1; step <= cfg.steps && !stop; ++step) {
    idx.clear();
    const std::size_t bsz = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch), set.size());
    while (idx.size() < bsz) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    std::vector<int> labels;
    for (auto i : idx) labels.push_back(set.labels[i]);
    const BatchResult br = backward(params, gather(set, idx), labels, w);
    adam_step(params, br.grad, adam);
    rep.loss.push_back(br.loss);
    rep.accuracy.push_back(static_cast<double>(br.correct) / static_cast<double>(bsz));
    rep.steps_run = step;
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      last = record_eval(step);
      stop = cfg.target_accuracy && last.accuracy >= *cfg.target_accuracy;
    }
  }
  rep.final_accuracy = last.accuracy;
  rep.final_loss = last.loss;
  return rep;
}

}  // namespace detail

struct TrainResult {
  NetworkCheckpoint checkpoint;
  TrainReport report;
};

inline TrainResult train(const WindowedDataset& ds, const NetworkShape& shape, const TrainConfig& cfg, std::uint64_t seed,
                         const std::string& demo_digest = {}) {
  check_shape(shape);
  if (ds.size() == 0) throw SizeError("train: empty dataset");
  if (ds.m != shape.m) throw ShapeError("train: dataset m does not match shape");
  TrainResult r;
  auto& ck = r.checkpoint;
  ck.shape = shape;
  ck.params = init_params(shape, seed);
  ck.norm = fit_normalization(ds);
  const Weights w = cfg.balance_classes ? class_weights(ds) : unit_weights();
  r.report = detail::run_training(ck.params, prepare(ds, ck.norm), w, cfg, seed);
  ck.meta = {seed, r.report.steps_run, r.report.final_loss, r.report.final_accuracy, demo_digest, cfg.batch, cfg.lr, false};
  return r;
}

// Recurrent layers and normalization come from `source`; the head is redrawn from `seed`.
inline NetworkCheckpoint transfer_init(const NetworkCheckpoint& source, std::uint64_t seed) {
  NetworkCheckpoint ck = source;
  std::mt19937_64 rng(seed);
  init_head(ck.params, rng);
  return ck;
}

inline TrainResult transfer_train(const NetworkCheckpoint& source, const WindowedDataset& ds, const TrainConfig& cfg,
                                  std::uint64_t seed, const std::string& demo_digest = {}) {
  if (ds.size() == 0) throw SizeError("transfer_train: empty dataset");
  if (ds.m != source.shape.m) throw ShapeError("transfer_train: dataset m does not match checkpoint");
  TrainResult r;
  r.checkpoint = transfer_init(source, seed);
  auto& ck = r.checkpoint;
  const Weights w = cfg.balance_classes ? class_weights(ds) : unit_weights();
  r.report = detail::run_training(ck.params, prepare(ds, ck.norm), w, cfg, seed);
  r.report.transfer = true;
  ck.meta = {seed, r.report.steps_run, r.report.final_loss, r.report.final_accuracy, demo_digest, cfg.batch, cfg.lr, true};
  return r;
}

}  // namespace trackbc::net
