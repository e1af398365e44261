#pragma once

// Attack pipeline: the mimic model C, the conditional generator G and
// discriminator D, their adversarial training loop, request generation under
// Markov-controlled conditions, and the score-matrix view of the output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "mimicshift/markov.hpp"
#include "mimicshift/seqnet.hpp"
#include "mimicshift/traffic.hpp"

namespace mimicshift {

using seqnet::VectorXd;

struct TrainConfig {
  int omega = 3;        // discriminator loops per iteration
  int batch = 128;
  int seq_len = 16;
  double lr_mimic = 0.01;
  double lr_gan = 0.0002;
  int mimic_hidden = 10;
  int gen_hidden = 40;
  int disc_hidden = 35;
  int noise_dim = 0;    // 0 = use gen_hidden
  int mimic_iters = 200;  // iteration counts are not fixed by the protocol
  int gen_pretrain_iters = 200;  // supervised warm start before the adversarial loop
  int gan_iters = 150;
  double grad_clip = 5.0;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (omega < 1) throw std::invalid_argument("TrainConfig: omega must be >= 1");
    if (batch < 1 || seq_len < 2) throw std::invalid_argument("TrainConfig: bad batch/seq_len");
  }
  int effective_noise_dim() const { return noise_dim > 0 ? noise_dim : gen_hidden; }
};

struct MimicModel {
  seqnet::Params params;
  int k = 0;
};

struct GeneratorModel {
  seqnet::Params params;
  int n_tokens = 0;
  int k = 0;
  int noise_dim = 0;
};

struct DiscriminatorModel {
  seqnet::Params params;
  int n_tokens = 0;
  int k = 0;
};

// ---------------------------------------------------------------------------
// mimic model C: reproduces observed class sequences step by step

namespace detail {

inline std::vector<VectorXd> onehot_seq(const std::vector<int>& ids, int dim) {
  std::vector<VectorXd> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(seqnet::onehot(id, dim));
  return out;
}

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

}  // namespace detail

struct MimicTrainResult {
  MimicModel model;
  double final_loss = 0.0;
  double holdout_loss = 0.0;
};

inline MimicTrainResult train_mimic(const std::vector<std::vector<int>>& class_seqs, int k,
                                    const TrainConfig& cfg) {
  cfg.validate();
  if (class_seqs.empty()) throw std::invalid_argument("train_mimic: no class sequences");
  Rng rng = Rng(cfg.seed).fork(0x4d494d49);
  const std::size_t n_hold = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(class_seqs.size()) * cfg.holdout_fraction));
  const std::size_t n_train = class_seqs.size() > n_hold ? class_seqs.size() - n_hold : class_seqs.size();

  seqnet::Dims dims{k, cfg.mimic_hidden, k, 0};
  seqnet::Params params = seqnet::init_params(dims, rng.fork(1));
  seqnet::AdamState adam = seqnet::make_adam(dims, cfg.lr_mimic);

  double last_loss = 0.0;
  Rng batch_rng = rng.fork(2);
  for (int it = 0; it < cfg.mimic_iters; ++it) {
    seqnet::Params grads = seqnet::zeros_like(dims);
    double loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& s = class_seqs[batch_rng.uniform_int(n_train)];
      auto res = seqnet::cross_entropy_loss(params, detail::onehot_seq(s, k), s);
      loss += res.loss;
      grads.Wx += res.grads.Wx;
      grads.Wh += res.grads.Wh;
      grads.b += res.grads.b;
      grads.Wout += res.grads.Wout;
      grads.bout += res.grads.bout;
    }
    grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(cfg.batch); });
    loss /= static_cast<double>(cfg.batch);
    if (!std::isfinite(loss))
      throw std::runtime_error("train_mimic: loss diverged at iteration " + std::to_string(it));
    seqnet::clip_global_norm(grads, cfg.grad_clip);
    params = seqnet::adam_update(params, grads, adam);
    last_loss = loss;
  }

  double hold = 0.0;
  std::size_t n_eval = 0;
  for (std::size_t i = n_train; i < class_seqs.size(); ++i) {
    const auto& s = class_seqs[i];
    hold += seqnet::cross_entropy_loss(params, detail::onehot_seq(s, k), s).loss;
    ++n_eval;
  }
  if (n_eval > 0) hold /= static_cast<double>(n_eval);

  return {{params, k}, last_loss, hold};
}

// Feeds an injected class sequence and samples the model's per-step output.
inline std::vector<int> mimic_generate(const MimicModel& model, const std::vector<int>& injected,
                                       Rng& rng) {
  seqnet::State cur = seqnet::zero_state(model.params.dims);
  std::vector<int> out;
  out.reserve(injected.size());
  for (int cls : injected) {
    if (cls < 0 || cls >= model.k) throw std::invalid_argument("mimic_generate: class out of range");
    seqnet::StepCache sc = seqnet::lstm_step(model.params, seqnet::onehot(cls, model.k), cur);
    out.push_back(seqnet::categorical_sample(sc.logits, rng));
    cur = {sc.h, sc.c};
  }
  return out;
}

// ---------------------------------------------------------------------------
// generator forward passes

// Discrete generation: per-step token sampled from Cat(softmax(p_l)), fed
// back as one-hot input at the next step.
inline std::vector<int> generator_sample(const GeneratorModel& g, const std::vector<int>& conds,
                                         Rng& rng) {
  const int n = g.n_tokens;
  VectorXd z(g.noise_dim);
  for (int i = 0; i < g.noise_dim; ++i) z[i] = rng.normal();
  seqnet::State cur = seqnet::init_state_from_noise(g.params, z);
  VectorXd prev = VectorXd::Zero(n);
  std::vector<int> tokens;
  tokens.reserve(conds.size());
  for (int cls : conds) {
    VectorXd x(n + g.k);
    x << prev, seqnet::onehot(cls, g.k);
    seqnet::StepCache sc = seqnet::lstm_step(g.params, x, cur);
    const int tok = seqnet::categorical_sample(sc.logits, rng);
    tokens.push_back(tok);
    prev = seqnet::onehot(tok, n);
    cur = {sc.h, sc.c};
  }
  return tokens;
}

// Differentiable relaxation for the generator update: the softmax
// distribution over tokens is both the feedback input and the
// discriminator's token input.
struct GenSoftTrace {
  std::vector<seqnet::StepCache> steps;  // generator steps
  std::vector<VectorXd> y;               // softmax probs per step
  seqnet::State m0;
  VectorXd z;
};

inline GenSoftTrace generator_soft_forward(const GeneratorModel& g, const std::vector<int>& conds,
                                           const VectorXd& z) {
  GenSoftTrace tr;
  tr.z = z;
  tr.m0 = seqnet::init_state_from_noise(g.params, z);
  seqnet::State cur = tr.m0;
  VectorXd prev = VectorXd::Zero(g.n_tokens);
  for (int cls : conds) {
    VectorXd x(g.n_tokens + g.k);
    x << prev, seqnet::onehot(cls, g.k);
    seqnet::StepCache sc = seqnet::lstm_step(g.params, x, cur);
    VectorXd y = seqnet::softmax(sc.logits);
    cur = {sc.h, sc.c};
    prev = y;
    tr.steps.push_back(std::move(sc));
    tr.y.push_back(std::move(y));
  }
  return tr;
}

// dL/dlogits from dL/dsoftmax for one step
inline VectorXd softmax_backprop(const VectorXd& y, const VectorXd& dy) {
  const double dot = y.dot(dy);
  return y.cwiseProduct((dy.array() - dot).matrix());
}

// Generator loss per the adversarial objective: log(1 - D(G(z | conds))).
// Gradients flow through the discriminator's inputs and the softmax
// relaxation back into the generator, including the noise head.
struct GenLossResult {
  double loss = 0.0;
  seqnet::Params grads;  // generator gradients
};

inline GenLossResult generator_loss_and_grads(const GeneratorModel& g,
                                              const DiscriminatorModel& d,
                                              const std::vector<int>& conds, const VectorXd& z) {
  const int n = g.n_tokens;
  GenSoftTrace gtr = generator_soft_forward(g, conds, z);
  const std::size_t L = gtr.steps.size();

  // discriminator forward on the soft tokens
  std::vector<VectorXd> d_inputs;
  d_inputs.reserve(L);
  for (std::size_t l = 0; l < L; ++l) {
    VectorXd v(n + d.k);
    v << gtr.y[l], seqnet::onehot(conds[l], d.k);
    d_inputs.push_back(std::move(v));
  }
  seqnet::Trace dtr = seqnet::lstm_forward(d.params, d_inputs);
  const double t_logit = dtr.steps.back().logits[0];

  GenLossResult out;
  out.loss = -detail::softplus(t_logit);  // log(1 - sigmoid(t))
  // d loss / d t = -sigmoid(t)
  const double dt = -1.0 / (1.0 + std::exp(-t_logit));
  std::vector<VectorXd> dlogits(L);
  VectorXd dl(1);
  dl[0] = dt;
  dlogits.back() = dl;
  seqnet::BackwardResult dback = seqnet::lstm_backward(d.params, dtr, dlogits);

  // reverse pass through the generator with feedback connections
  out.grads = seqnet::zeros_like(g.params.dims);
  VectorXd dh = VectorXd::Zero(g.params.dims.hidden);
  VectorXd dc = VectorXd::Zero(g.params.dims.hidden);
  VectorXd dy_next = VectorXd::Zero(n);  // feedback grad from step l+1 input
  for (std::size_t l = L; l-- > 0;) {
    VectorXd dy = dback.dinputs[l].head(n) + dy_next;
    VectorXd dp = softmax_backprop(gtr.y[l], dy);
    const seqnet::State prev =
        l == 0 ? gtr.m0 : seqnet::State{gtr.steps[l - 1].h, gtr.steps[l - 1].c};
    VectorXd dx;
    seqnet::lstm_step_backward(g.params, gtr.steps[l], prev, dp, dh, dc, out.grads, dx);
    dy_next = dx.head(n);
  }
  seqnet::noise_head_backward(g.params, gtr.m0, z, dh, dc, out.grads);
  return out;
}

// Discriminator loss on one (real, fake) pair with shared conditions:
// -[log D(real | conds) + log(1 - D(fake | conds))].
struct DiscLossResult {
  double loss = 0.0;
  seqnet::Params grads;
  double d_real = 0.0;
  double d_fake = 0.0;
};

inline seqnet::Trace discriminator_forward(const DiscriminatorModel& d,
                                           const std::vector<int>& tokens,
                                           const std::vector<int>& conds) {
  std::vector<VectorXd> inputs;
  inputs.reserve(tokens.size());
  for (std::size_t l = 0; l < tokens.size(); ++l) {
    VectorXd v(d.n_tokens + d.k);
    v << seqnet::onehot(tokens[l], d.n_tokens), seqnet::onehot(conds[l], d.k);
    inputs.push_back(std::move(v));
  }
  return seqnet::lstm_forward(d.params, inputs);
}

inline double discriminator_score(const DiscriminatorModel& d, const std::vector<int>& tokens,
                                  const std::vector<int>& conds) {
  seqnet::Trace tr = discriminator_forward(d, tokens, conds);
  return 1.0 / (1.0 + std::exp(-tr.steps.back().logits[0]));
}

inline DiscLossResult discriminator_loss_and_grads(const DiscriminatorModel& d,
                                                   const std::vector<int>& real_tokens,
                                                   const std::vector<int>& fake_tokens,
                                                   const std::vector<int>& conds) {
  DiscLossResult out;
  out.grads = seqnet::zeros_like(d.params.dims);
  seqnet::Trace real_tr = discriminator_forward(d, real_tokens, conds);
  seqnet::Trace fake_tr = discriminator_forward(d, fake_tokens, conds);
  const double tr_ = real_tr.steps.back().logits[0];
  const double tf = fake_tr.steps.back().logits[0];
  const double sr = 1.0 / (1.0 + std::exp(-tr_));
  const double sf = 1.0 / (1.0 + std::exp(-tf));
  out.d_real = sr;
  out.d_fake = sf;
  out.loss = detail::softplus(-tr_) + detail::softplus(tf);  // -log sr - log(1 - sf)

  std::vector<VectorXd> dl_real(real_tr.steps.size()), dl_fake(fake_tr.steps.size());
  VectorXd v(1);
  v[0] = sr - 1.0;
  dl_real.back() = v;
  v[0] = sf;
  dl_fake.back() = v;
  seqnet::Params g1 = seqnet::lstm_backward(d.params, real_tr, dl_real).grads;
  seqnet::Params g2 = seqnet::lstm_backward(d.params, fake_tr, dl_fake).grads;
  out.grads.Wx = g1.Wx + g2.Wx;
  out.grads.Wh = g1.Wh + g2.Wh;
  out.grads.b = g1.b + g2.b;
  out.grads.Wout = g1.Wout + g2.Wout;
  out.grads.bout = g1.bout + g2.bout;
  return out;
}

// ---------------------------------------------------------------------------
// adversarial training loop

struct GanTrainLog {
  // per-iteration update counts, in order (C, G, D)
  std::vector<std::array<int, 3>> update_counts;
  std::vector<double> disc_accuracy_checks;
  bool mode_collapse_warning = false;
  double final_disc_accuracy = 0.0;
};

struct GanModels {
  MimicModel mimic;
  GeneratorModel generator;
  DiscriminatorModel discriminator;
  GanTrainLog log;
};

inline double disc_holdout_accuracy(const GeneratorModel& g, const DiscriminatorModel& d,
                                    const MimicModel& c, const std::vector<std::vector<int>>& walks,
                                    const RequestCorpus& corpus, std::size_t n_pairs, Rng& rng) {
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const auto& real = walks[rng.uniform_int(walks.size())];
    std::vector<int> conds = mimic_generate(c, walk_classes(corpus, real), rng);
    std::vector<int> fake = generator_sample(g, conds, rng);
    if (discriminator_score(d, real, conds) > 0.5) ++correct;
    if (discriminator_score(d, fake, conds) <= 0.5) ++correct;
    total += 2;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

inline GanModels train_gan(const RequestCorpus& corpus, const WalkSet& walks,
                           const TrainConfig& cfg) {
  cfg.validate();
  if (walks.walks.empty()) throw std::invalid_argument("train_gan: empty walk set");
  const int n = static_cast<int>(corpus.vocab_size());
  const int k = static_cast<int>(corpus.num_classes());
  const int d_noise = cfg.effective_noise_dim();

  Rng root(cfg.seed);
  Rng init_rng = root.fork(10);
  GanModels models;
  models.mimic = {seqnet::init_params({k, cfg.mimic_hidden, k, 0}, init_rng.fork(1)), k};
  models.generator = {seqnet::init_params({n + k, cfg.gen_hidden, n, d_noise}, init_rng.fork(2)), n,
                      k, d_noise};
  models.discriminator = {seqnet::init_params({n + k, cfg.disc_hidden, 1, 0}, init_rng.fork(3)), n,
                          k};

  seqnet::AdamState adam_c = seqnet::make_adam(models.mimic.params.dims, cfg.lr_mimic);
  seqnet::AdamState adam_g = seqnet::make_adam(models.generator.params.dims, cfg.lr_gan);
  seqnet::AdamState adam_d = seqnet::make_adam(models.discriminator.params.dims, cfg.lr_gan);

  const std::size_t n_hold = std::max<std::size_t>(
      1, static_cast<std::size_t>(static_cast<double>(walks.walks.size()) * cfg.holdout_fraction));
  const std::size_t n_train = walks.walks.size() > n_hold ? walks.walks.size() - n_hold
                                                          : walks.walks.size();

  Rng batch_rng = root.fork(11);
  Rng eval_rng = root.fork(12);
  const int check_every = 10;
  int pinned_checks = 0;
  // batch size is capped at the training pool to keep toy runs meaningful
  const int m = static_cast<int>(std::min<std::size_t>(cfg.batch, n_train));

  auto add_grads = [](seqnet::Params& acc, const seqnet::Params& g) {
    acc.Wx += g.Wx;
    acc.Wh += g.Wh;
    acc.b += g.b;
    acc.Wout += g.Wout;
    acc.bout += g.bout;
    if (acc.dims.noise > 0) {
      acc.Wzh += g.Wzh;
      acc.Wzc += g.Wzc;
      acc.bzh += g.bzh;
      acc.bzc += g.bzc;
    }
  };

  // Supervised warm start: teacher-forced next-token prediction on real walks
  // under their own class conditions, with the initial state drawn from the
  // noise head. Without it the generator tends to settle on an unconditional
  // marginal and never picks up the condition/token coupling that the
  // adversarial loop is supposed to refine.
  if (cfg.gen_pretrain_iters > 0) {
    seqnet::AdamState adam_pre = seqnet::make_adam(models.generator.params.dims, cfg.lr_mimic);
    Rng pre_rng = root.fork(13);
    for (int it = 0; it < cfg.gen_pretrain_iters; ++it) {
      seqnet::Params grads = seqnet::zeros_like(models.generator.params.dims);
      double loss = 0.0;
      for (int b = 0; b < m; ++b) {
        const auto& walk = walks.walks[pre_rng.uniform_int(n_train)];
        const std::vector<int> cls = walk_classes(corpus, walk);
        VectorXd z(d_noise);
        for (int i = 0; i < d_noise; ++i) z[i] = pre_rng.normal();
        const seqnet::State m0 = seqnet::init_state_from_noise(models.generator.params, z);
        std::vector<VectorXd> inputs;
        inputs.reserve(walk.size());
        for (std::size_t l = 0; l < walk.size(); ++l) {
          VectorXd x = VectorXd::Zero(n + k);
          if (l > 0) x[walk[l - 1]] = 1.0;
          x[n + cls[l]] = 1.0;
          inputs.push_back(std::move(x));
        }
        seqnet::Trace tr = seqnet::lstm_forward(models.generator.params, inputs, m0);
        std::vector<VectorXd> dlogits(tr.steps.size());
        for (std::size_t l = 0; l < tr.steps.size(); ++l) {
          VectorXd ls = seqnet::log_softmax(tr.steps[l].logits);
          loss -= ls[walk[l]] / static_cast<double>(walk.size());
          VectorXd dl = ls.array().exp();
          dl[walk[l]] -= 1.0;
          dlogits[l] = dl / static_cast<double>(walk.size());
        }
        seqnet::BackwardResult back = seqnet::lstm_backward(models.generator.params, tr, dlogits);
        add_grads(grads, back.grads);
        seqnet::noise_head_backward(models.generator.params, m0, z, back.dh0, back.dc0, grads);
      }
      grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(m); });
      if (!std::isfinite(loss))
        throw std::runtime_error("train_gan: generator pretraining diverged at iteration " +
                                 std::to_string(it));
      seqnet::clip_global_norm(grads, cfg.grad_clip);
      models.generator.params = seqnet::adam_update(models.generator.params, grads, adam_pre);
    }
  }

  for (int it = 0; it < cfg.gan_iters; ++it) {
    std::array<int, 3> counts{0, 0, 0};

    // sample m real walks and their class sequences
    std::vector<const std::vector<int>*> batch;
    std::vector<std::vector<int>> feats;
    for (int b = 0; b < m; ++b) {
      batch.push_back(&walks.walks[batch_rng.uniform_int(n_train)]);
      feats.push_back(walk_classes(corpus, *batch.back()));
    }

    // C update on the observed feature sequences
    {
      seqnet::Params grads = seqnet::zeros_like(models.mimic.params.dims);
      double loss = 0.0;
      for (int b = 0; b < m; ++b) {
        auto res = seqnet::cross_entropy_loss(models.mimic.params,
                                              detail::onehot_seq(feats[b], k), feats[b]);
        loss += res.loss;
        add_grads(grads, res.grads);
      }
      grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(m); });
      if (!std::isfinite(loss))
        throw std::runtime_error("train_gan: mimic loss diverged at iteration " +
                                 std::to_string(it));
      seqnet::clip_global_norm(grads, cfg.grad_clip);
      models.mimic.params = seqnet::adam_update(models.mimic.params, grads, adam_c);
      counts[0] += 1;
    }

    // mimic features and noise for this iteration
    std::vector<std::vector<int>> mimic_feats;
    std::vector<VectorXd> zs;
    for (int b = 0; b < m; ++b) {
      mimic_feats.push_back(mimic_generate(models.mimic, feats[b], batch_rng));
      VectorXd z(d_noise);
      for (int i = 0; i < d_noise; ++i) z[i] = batch_rng.normal();
      zs.push_back(std::move(z));
    }

    // G update
    {
      seqnet::Params grads = seqnet::zeros_like(models.generator.params.dims);
      double loss = 0.0;
      for (int b = 0; b < m; ++b) {
        auto res = generator_loss_and_grads(models.generator, models.discriminator, mimic_feats[b],
                                            zs[b]);
        loss += res.loss;
        add_grads(grads, res.grads);
      }
      grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(m); });
      if (!std::isfinite(loss))
        throw std::runtime_error("train_gan: generator loss diverged at iteration " +
                                 std::to_string(it));
      seqnet::clip_global_norm(grads, cfg.grad_clip);
      models.generator.params = seqnet::adam_update(models.generator.params, grads, adam_g);
      counts[1] += 1;
    }

    // omega D updates
    for (int loop = 0; loop < cfg.omega; ++loop) {
      seqnet::Params grads = seqnet::zeros_like(models.discriminator.params.dims);
      double loss = 0.0;
      for (int b = 0; b < m; ++b) {
        std::vector<int> fake = generator_sample(models.generator, mimic_feats[b], batch_rng);
        auto res = discriminator_loss_and_grads(models.discriminator, *batch[b], fake,
                                                mimic_feats[b]);
        loss += res.loss;
        add_grads(grads, res.grads);
      }
      grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(m); });
      if (!std::isfinite(loss))
        throw std::runtime_error("train_gan: discriminator loss diverged at iteration " +
                                 std::to_string(it));
      seqnet::clip_global_norm(grads, cfg.grad_clip);
      models.discriminator.params = seqnet::adam_update(models.discriminator.params, grads, adam_d);
      counts[2] += 1;
    }

    models.log.update_counts.push_back(counts);

    if ((it + 1) % check_every == 0) {
      double acc = disc_holdout_accuracy(models.generator, models.discriminator, models.mimic,
                                         walks.walks, corpus, 32, eval_rng);
      models.log.disc_accuracy_checks.push_back(acc);
      if (acc >= 1.0)
        ++pinned_checks;
      else
        pinned_checks = 0;
      if (pinned_checks >= 50) models.log.mode_collapse_warning = true;
    }
  }

  models.log.final_disc_accuracy = disc_holdout_accuracy(
      models.generator, models.discriminator, models.mimic, walks.walks, corpus, 64, eval_rng);
  return models;
}

// ---------------------------------------------------------------------------
// request generation under Markov control

struct GeneratedBatch {
  RequestCorpus corpus;                    // shares the vocabulary of the source corpus
  std::vector<std::vector<int>> conditions;  // condition classes per request, for auditing
};

inline GeneratedBatch generate_requests(const GeneratorModel& g, const MimicModel& c,
                                        const MarkovParams& params, const RequestCorpus& source,
                                        std::size_t count, std::size_t seq_len, Rng& rng,
                                        int interval_index = -1) {
  GeneratedBatch out;
  out.corpus.vocab = source.vocab;
  out.corpus.feature_name = source.feature_name;
  out.corpus.class_map = source.class_map;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<int> injected = sample_class_sequence(params, seq_len, rng);
    std::vector<int> conds = mimic_generate(c, injected, rng);
    std::vector<int> tokens = generator_sample(g, conds, rng);
    std::string src = "172.16." + std::to_string((i / 250) % 256) + "." + std::to_string(i % 250 + 1);
    out.corpus.requests.push_back(
        request_from_tokens(source, tokens, Label::attack, src, interval_index));
    out.conditions.push_back(std::move(conds));
  }
  return out;
}

// ---------------------------------------------------------------------------
// score matrix

struct ScoreMatrix {
  std::size_t n = 0;
  std::vector<long long> counts;  // row-major, symmetrized by elementwise max
  bool symmetrized = false;

  long long at(std::size_t i, std::size_t j) const { return counts[i * n + j]; }
  void add(std::size_t i, std::size_t j) { counts[i * n + j] += 1; }
};

inline ScoreMatrix build_score_matrix(const RequestCorpus& corpus) {
  if (corpus.requests.empty()) throw std::invalid_argument("build_score_matrix: empty corpus");
  ScoreMatrix s;
  s.n = corpus.vocab_size();
  s.counts.assign(s.n * s.n, 0);
  for (const auto& r : corpus.requests)
    for (std::size_t l = 0; l + 1 < r.subs.size(); ++l)
      s.add(r.subs[l].token_id, r.subs[l + 1].token_id);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = i + 1; j < s.n; ++j) {
      const long long m = std::max(s.at(i, j), s.at(j, i));
      s.counts[i * s.n + j] = m;
      s.counts[j * s.n + i] = m;
    }
  s.symmetrized = true;
  return s;
}

enum class BinarizeStrategy { threshold, top_k };

struct BinarizeResult {
  AdjacencyMatrix adj;
  bool truncated_k = false;  // top-k asked for more than the nonzero support
};

inline BinarizeResult binarize(const ScoreMatrix& s, BinarizeStrategy strategy, double tau = 1.0,
                               std::size_t k = 0) {
  if (!s.symmetrized) throw std::invalid_argument("binarize: score matrix not symmetrized");
  BinarizeResult out;
  out.adj.n = s.n;
  out.adj.entries.assign(s.n * s.n, 0);
  if (strategy == BinarizeStrategy::threshold) {
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.n; ++j)
        if (static_cast<double>(s.at(i, j)) >= tau) out.adj.set(i, j, 1);
    return out;
  }
  // top-k over unordered pairs, ties by (row, col) lexicographic
  std::vector<std::tuple<long long, std::size_t, std::size_t>> entries;
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = i; j < s.n; ++j)
      if (s.at(i, j) > 0) entries.emplace_back(s.at(i, j), i, j);
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  if (k > entries.size()) {
    out.truncated_k = true;
    k = entries.size();
  }
  for (std::size_t e = 0; e < k; ++e) {
    out.adj.set(std::get<1>(entries[e]), std::get<2>(entries[e]), 1);
    out.adj.set(std::get<2>(entries[e]), std::get<1>(entries[e]), 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// shift schedule

struct ShiftSchedule {
  std::vector<int> picks;  // index into the profile list, one per interval
};

inline ShiftSchedule make_shift_schedule(const ShiftProfile& profile, std::size_t n_intervals,
                                         std::uint64_t seed) {
  if (profile.profiles.empty()) throw std::invalid_argument("make_shift_schedule: no profiles");
  for (const auto& p : profile.profiles) validate_params(p);
  Rng rng(seed);
  ShiftSchedule sched;
  sched.picks.reserve(n_intervals);
  for (std::size_t i = 0; i < n_intervals; ++i)
    sched.picks.push_back(static_cast<int>(rng.uniform_int(profile.profiles.size())));
  return sched;
}

}  // namespace mimicshift
