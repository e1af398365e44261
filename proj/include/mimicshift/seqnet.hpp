#pragma once

// Minimal deterministic recurrent substrate: single-layer LSTM forward pass,
// exact backpropagation through time, Adam updates, categorical sampling and
// a binary checkpoint format. All arithmetic is 64-bit.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimicshift/rng.hpp"

namespace mimicshift::seqnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Dims {
  int input = 0;
  int hidden = 0;
  int output = 0;
  int noise = 0;  // 0 = no noise-to-state head

  bool operator==(const Dims&) const = default;
};

// Gate row layout in the stacked 4H weight blocks: input, forget, candidate,
// output.
struct Params {
  Dims dims;
  MatrixXd Wx;    // 4H x Din
  MatrixXd Wh;    // 4H x H
  VectorXd b;     // 4H
  MatrixXd Wout;  // Dout x H
  VectorXd bout;  // Dout
  MatrixXd Wzh;   // H x noise
  MatrixXd Wzc;   // H x noise
  VectorXd bzh;   // H
  VectorXd bzc;   // H

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(Wx);
    fn(Wh);
    fn(b);
    fn(Wout);
    fn(bout);
    if (dims.noise > 0) {
      fn(Wzh);
      fn(Wzc);
      fn(bzh);
      fn(bzc);
    }
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn(Wx);
    fn(Wh);
    fn(b);
    fn(Wout);
    fn(bout);
    if (dims.noise > 0) {
      fn(Wzh);
      fn(Wzc);
      fn(bzh);
      fn(bzc);
    }
  }
};

inline Params zeros_like(const Dims& d) {
  Params p;
  p.dims = d;
  const int H = d.hidden;
  p.Wx = MatrixXd::Zero(4 * H, d.input);
  p.Wh = MatrixXd::Zero(4 * H, H);
  p.b = VectorXd::Zero(4 * H);
  p.Wout = MatrixXd::Zero(d.output, H);
  p.bout = VectorXd::Zero(d.output);
  if (d.noise > 0) {
    p.Wzh = MatrixXd::Zero(H, d.noise);
    p.Wzc = MatrixXd::Zero(H, d.noise);
    p.bzh = VectorXd::Zero(H);
    p.bzc = VectorXd::Zero(H);
  }
  return p;
}

// uniform(-0.1, 0.1) weights, forget-gate bias +1
inline Params init_params(const Dims& d, Rng rng) {
  Params p = zeros_like(d);
  p.for_each_tensor([&](auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-0.1, 0.1);
  });
  p.b.segment(d.hidden, d.hidden).array() += 1.0;
  return p;
}

inline Params init_params(const Dims& d, std::uint64_t seed) {
  Rng rng(seed);
  return init_params(d, rng);
}

struct State {
  VectorXd h;
  VectorXd c;
};

inline State zero_state(const Dims& d) {
  return {VectorXd::Zero(d.hidden), VectorXd::Zero(d.hidden)};
}

// m0 = tanh(affine(z)) for both hidden and cell components
inline State init_state_from_noise(const Params& p, const VectorXd& z) {
  if (p.dims.noise == 0 || z.size() != p.dims.noise)
    throw std::invalid_argument("init_state_from_noise: noise dimension mismatch");
  State s;
  s.h = (p.Wzh * z + p.bzh).array().tanh();
  s.c = (p.Wzc * z + p.bzc).array().tanh();
  return s;
}

inline VectorXd sigmoid(const VectorXd& v) {
  return 1.0 / (1.0 + (-v.array()).exp());
}

inline VectorXd softmax(const VectorXd& logits) {
  VectorXd shifted = logits.array() - logits.maxCoeff();
  VectorXd e = shifted.array().exp();
  return e / e.sum();
}

inline VectorXd log_softmax(const VectorXd& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

struct StepCache {
  VectorXd x;
  VectorXd i, f, g, o;  // post-activation gates
  VectorXd c, h;
  VectorXd logits;
};

inline StepCache lstm_step(const Params& p, const VectorXd& x, const State& prev) {
  const int H = p.dims.hidden;
  if (x.size() != p.dims.input) throw std::invalid_argument("lstm_step: input dimension mismatch");
  VectorXd a = p.Wx * x + p.Wh * prev.h + p.b;
  StepCache sc;
  sc.x = x;
  sc.i = sigmoid(a.segment(0, H));
  sc.f = sigmoid(a.segment(H, H));
  sc.g = a.segment(2 * H, H).array().tanh();
  sc.o = sigmoid(a.segment(3 * H, H));
  sc.c = sc.f.cwiseProduct(prev.c) + sc.i.cwiseProduct(sc.g);
  sc.h = sc.o.cwiseProduct(sc.c.array().tanh().matrix());
  sc.logits = p.Wout * sc.h + p.bout;
  return sc;
}

struct Trace {
  State initial;
  std::vector<StepCache> steps;
};

inline Trace lstm_forward(const Params& p, const std::vector<VectorXd>& inputs,
                          const State& initial) {
  Trace tr;
  tr.initial = initial;
  State cur = initial;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    StepCache sc = lstm_step(p, inputs[t], cur);
    if (!sc.h.allFinite() || !sc.logits.allFinite())
      throw std::runtime_error("lstm_forward: non-finite value at step " + std::to_string(t));
    cur = {sc.h, sc.c};
    tr.steps.push_back(std::move(sc));
  }
  return tr;
}

inline Trace lstm_forward(const Params& p, const std::vector<VectorXd>& inputs) {
  return lstm_forward(p, inputs, zero_state(p.dims));
}

// One reverse step. dh/dc carry the running state gradient (in: from step
// t+1, out: for step t-1). Accumulates parameter gradients into `grads` and
// writes the input gradient to `dx`.
inline void lstm_step_backward(const Params& p, const StepCache& sc, const State& prev,
                               const VectorXd& dlogits, VectorXd& dh, VectorXd& dc, Params& grads,
                               VectorXd& dx) {
  const int H = p.dims.hidden;
  grads.Wout.noalias() += dlogits * sc.h.transpose();
  grads.bout += dlogits;
  VectorXd dh_total = dh + p.Wout.transpose() * dlogits;
  VectorXd tanh_c = sc.c.array().tanh();
  VectorXd do_ = dh_total.cwiseProduct(tanh_c);
  VectorXd dc_total = dc + dh_total.cwiseProduct(sc.o).cwiseProduct(
                               (1.0 - tanh_c.array().square()).matrix());
  VectorXd di = dc_total.cwiseProduct(sc.g);
  VectorXd dg = dc_total.cwiseProduct(sc.i);
  VectorXd df = dc_total.cwiseProduct(prev.c);
  VectorXd da(4 * H);
  da.segment(0, H) = di.cwiseProduct(sc.i).cwiseProduct((1.0 - sc.i.array()).matrix());
  da.segment(H, H) = df.cwiseProduct(sc.f).cwiseProduct((1.0 - sc.f.array()).matrix());
  da.segment(2 * H, H) = dg.cwiseProduct((1.0 - sc.g.array().square()).matrix());
  da.segment(3 * H, H) = do_.cwiseProduct(sc.o).cwiseProduct((1.0 - sc.o.array()).matrix());
  grads.Wx.noalias() += da * sc.x.transpose();
  grads.Wh.noalias() += da * prev.h.transpose();
  grads.b += da;
  dx = p.Wx.transpose() * da;
  dh = p.Wh.transpose() * da;
  dc = dc_total.cwiseProduct(sc.f);
}

struct BackwardResult {
  Params grads;
  std::vector<VectorXd> dinputs;
  VectorXd dh0, dc0;
};

// Full BPTT for a per-step logit gradient. dlogits[t] may be zero-sized to
// mean "no loss at this step".
inline BackwardResult lstm_backward(const Params& p, const Trace& tr,
                                    const std::vector<VectorXd>& dlogits) {
  if (dlogits.size() != tr.steps.size())
    throw std::invalid_argument("lstm_backward: dlogits/step count mismatch");
  BackwardResult out;
  out.grads = zeros_like(p.dims);
  out.dinputs.resize(tr.steps.size());
  VectorXd dh = VectorXd::Zero(p.dims.hidden);
  VectorXd dc = VectorXd::Zero(p.dims.hidden);
  const VectorXd zero_dl = VectorXd::Zero(p.dims.output);
  for (std::size_t t = tr.steps.size(); t-- > 0;) {
    const State prev = t == 0 ? tr.initial : State{tr.steps[t - 1].h, tr.steps[t - 1].c};
    const VectorXd& dl = dlogits[t].size() == 0 ? zero_dl : dlogits[t];
    lstm_step_backward(p, tr.steps[t], prev, dl, dh, dc, out.grads, out.dinputs[t]);
  }
  out.dh0 = dh;
  out.dc0 = dc;
  return out;
}

// Backprop of the noise head given gradients at the initial state. The state
// components satisfy m0 = tanh(affine(z)).
inline void noise_head_backward(const Params& p, const State& m0, const VectorXd& z,
                                const VectorXd& dh0, const VectorXd& dc0, Params& grads) {
  VectorXd dah = dh0.cwiseProduct((1.0 - m0.h.array().square()).matrix());
  VectorXd dac = dc0.cwiseProduct((1.0 - m0.c.array().square()).matrix());
  grads.Wzh.noalias() += dah * z.transpose();
  grads.Wzc.noalias() += dac * z.transpose();
  grads.bzh += dah;
  grads.bzc += dac;
}

// ---------------------------------------------------------------------------
// losses

struct LossResult {
  double loss = 0.0;
  Params grads;
};

// Mean per-step softmax cross-entropy against integer targets. target < 0
// skips the step.
inline LossResult cross_entropy_loss(const Params& p, const std::vector<VectorXd>& inputs,
                                     const std::vector<int>& targets, const State& initial) {
  if (inputs.size() != targets.size())
    throw std::invalid_argument("cross_entropy_loss: inputs/targets length mismatch");
  Trace tr = lstm_forward(p, inputs, initial);
  std::size_t active = 0;
  for (int t : targets)
    if (t >= 0) ++active;
  if (active == 0) throw std::invalid_argument("cross_entropy_loss: no active targets");
  double loss = 0.0;
  std::vector<VectorXd> dlogits(tr.steps.size());
  for (std::size_t t = 0; t < tr.steps.size(); ++t) {
    if (targets[t] < 0) continue;
    VectorXd ls = log_softmax(tr.steps[t].logits);
    loss -= ls[targets[t]];
    VectorXd d = ls.array().exp();
    d[targets[t]] -= 1.0;
    dlogits[t] = d / static_cast<double>(active);
  }
  loss /= static_cast<double>(active);
  if (!std::isfinite(loss)) throw std::runtime_error("cross_entropy_loss: non-finite loss");
  LossResult out;
  out.loss = loss;
  out.grads = lstm_backward(p, tr, dlogits).grads;
  return out;
}

inline LossResult cross_entropy_loss(const Params& p, const std::vector<VectorXd>& inputs,
                                     const std::vector<int>& targets) {
  return cross_entropy_loss(p, inputs, targets, zero_state(p.dims));
}

// Mean per-token log-likelihood of a token sequence under a next-token model
// (Din = Dout = vocabulary). Step t input is the one-hot of token t-1 (zero
// vector at t=0).
inline double sequence_log_likelihood(const Params& p, const std::vector<int>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("sequence_log_likelihood: empty sequence");
  State cur = zero_state(p.dims);
  double total = 0.0;
  VectorXd x = VectorXd::Zero(p.dims.input);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    StepCache sc = lstm_step(p, x, cur);
    total += log_softmax(sc.logits)[tokens[t]];
    cur = {sc.h, sc.c};
    x.setZero();
    x[tokens[t]] = 1.0;
  }
  return total / static_cast<double>(tokens.size());
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamState {
  Params m, v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamState make_adam(const Dims& d, double lr) {
  AdamState s;
  s.m = zeros_like(d);
  s.v = zeros_like(d);
  s.lr = lr;
  return s;
}

inline double global_norm(const Params& grads) {
  double sq = 0.0;
  grads.for_each_tensor([&](const auto& t) { sq += t.squaredNorm(); });
  return std::sqrt(sq);
}

inline void clip_global_norm(Params& grads, double max_norm) {
  const double n = global_norm(grads);
  if (n > max_norm && n > 0.0) {
    const double scale = max_norm / n;
    grads.for_each_tensor([&](auto& t) { t *= scale; });
  }
}

// Bias-corrected Adam step; returns fresh parameters, advances the state.
inline Params adam_update(const Params& p, const Params& grads, AdamState& st) {
  Params out = p;
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  auto upd = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = st.beta1 * m + (1.0 - st.beta1) * g;
    v = (st.beta2 * v.array() + (1.0 - st.beta2) * g.array().square()).matrix();
    auto mhat = m.array() / bc1;
    auto vhat = v.array() / bc2;
    param = (param.array() - st.lr * mhat / (vhat.sqrt() + st.eps)).matrix();
  };
  upd(out.Wx, grads.Wx, st.m.Wx, st.v.Wx);
  upd(out.Wh, grads.Wh, st.m.Wh, st.v.Wh);
  upd(out.b, grads.b, st.m.b, st.v.b);
  upd(out.Wout, grads.Wout, st.m.Wout, st.v.Wout);
  upd(out.bout, grads.bout, st.m.bout, st.v.bout);
  if (p.dims.noise > 0) {
    upd(out.Wzh, grads.Wzh, st.m.Wzh, st.v.Wzh);
    upd(out.Wzc, grads.Wzc, st.m.Wzc, st.v.Wzc);
    upd(out.bzh, grads.bzh, st.m.bzh, st.v.bzh);
    upd(out.bzc, grads.bzc, st.m.bzc, st.v.bzc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// sampling

inline int categorical_sample(const VectorXd& logits, Rng& rng) {
  if (!logits.allFinite()) throw std::invalid_argument("categorical_sample: non-finite logits");
  VectorXd probs = softmax(logits);
  std::vector<double> w(probs.data(), probs.data() + probs.size());
  return static_cast<int>(rng.categorical(w));
}

inline VectorXd onehot(int index, int dim) {
  VectorXd v = VectorXd::Zero(dim);
  v[index] = 1.0;
  return v;
}

// ---------------------------------------------------------------------------
// checkpoints: magic, version, dims, seed, then row-major f64 tensors in
// declared order

inline constexpr std::uint32_t kCheckpointMagic = 0x4d53434bu;  // "MSCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Params& p, const std::string& path, std::uint64_t seed = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  auto put = [&](const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  };
  put(&kCheckpointMagic, 4);
  put(&kCheckpointVersion, 4);
  std::int32_t d[4] = {p.dims.input, p.dims.hidden, p.dims.output, p.dims.noise};
  put(d, sizeof(d));
  put(&seed, 8);
  p.for_each_tensor([&](const auto& t) {
    // Eigen stores column-major; write row-major explicitly
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double v = t(r, c);
        put(&v, 8);
      }
  });
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Params load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  auto get = [&](void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  };
  std::uint32_t magic = 0, version = 0;
  get(&magic, 4);
  get(&version, 4);
  if (magic != kCheckpointMagic) throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  std::int32_t d[4];
  get(d, sizeof(d));
  std::uint64_t seed = 0;
  get(&seed, 8);
  if (seed_out) *seed_out = seed;
  Params p = zeros_like({d[0], d[1], d[2], d[3]});
  p.for_each_tensor([&](auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        double v;
        get(&v, 8);
        t(r, c) = v;
      }
  });
  return p;
}

}  // namespace mimicshift::seqnet
