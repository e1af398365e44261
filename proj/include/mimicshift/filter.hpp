#pragma once

// Online filtering: the normal-traffic model N, the N-over-D and Iterative
// Classifier online filters, interval scheduling (including the randomized
// countermeasure), and per-interval accept/reject decisions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimicshift/seqnet.hpp"
#include "mimicshift/traffic.hpp"

namespace mimicshift {

struct FilterConfig {
  int hidden = 10;
  double lr = 0.01;
  int batch = 64;
  int normal_iters = 500;
  int interval_epochs = 1;      // density-model passes over each interval
  double alpha = 0.8;           // estimated attack fraction
  double rejection_rate = 0.8;
  int replay_per_interval = 64;   // normal requests replayed per iterative update
  bool score_after_update = true; // score A_t with the model updated on A_t
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
};

// ---------------------------------------------------------------------------
// token language model over a fixed vocabulary plus a reserved UNK slot

struct TokenLm {
  seqnet::Params params;
  int vocab = 0;  // UNK id == vocab; model dimension is vocab + 1
};

namespace filter_detail {

inline std::vector<int> mapped_tokens(const Request& r, int vocab, std::size_t* unk_counter) {
  std::vector<int> tokens;
  tokens.reserve(r.subs.size());
  for (const auto& s : r.subs) {
    if (s.token_id >= 0 && s.token_id < vocab) {
      tokens.push_back(s.token_id);
    } else {
      tokens.push_back(vocab);  // UNK
      if (unk_counter) ++(*unk_counter);
    }
  }
  return tokens;
}

inline std::vector<seqnet::VectorXd> next_token_inputs(const std::vector<int>& tokens, int dim) {
  std::vector<seqnet::VectorXd> inputs;
  inputs.reserve(tokens.size());
  seqnet::VectorXd x = seqnet::VectorXd::Zero(dim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    inputs.push_back(x);
    x = seqnet::onehot(tokens[t], dim);
  }
  return inputs;
}

inline void add_grads(seqnet::Params& acc, const seqnet::Params& g) {
  acc.Wx += g.Wx;
  acc.Wh += g.Wh;
  acc.b += g.b;
  acc.Wout += g.Wout;
  acc.bout += g.bout;
}

}  // namespace filter_detail

inline TokenLm make_token_lm(int vocab, int hidden, Rng& rng) {
  return {seqnet::init_params({vocab + 1, hidden, vocab + 1, 0}, rng), vocab};
}

// one Adam step over a minibatch of requests; returns the mean loss
inline double lm_train_batch(TokenLm& lm, const std::vector<const Request*>& batch,
                             seqnet::AdamState& adam, double grad_clip) {
  const int dim = lm.vocab + 1;
  seqnet::Params grads = seqnet::zeros_like(lm.params.dims);
  double loss = 0.0;
  std::size_t used = 0;
  for (const Request* r : batch) {
    if (r->subs.empty()) continue;
    std::vector<int> tokens = filter_detail::mapped_tokens(*r, lm.vocab, nullptr);
    auto res = seqnet::cross_entropy_loss(lm.params, filter_detail::next_token_inputs(tokens, dim),
                                          tokens);
    loss += res.loss;
    filter_detail::add_grads(grads, res.grads);
    ++used;
  }
  if (used == 0) return 0.0;
  grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(used); });
  seqnet::clip_global_norm(grads, grad_clip);
  lm.params = seqnet::adam_update(lm.params, grads, adam);
  return loss / static_cast<double>(used);
}

// mean per-token log-likelihood; UNK-mapped out-of-vocabulary tokens counted
inline double lm_log_likelihood(const TokenLm& lm, const Request& r,
                                std::size_t* unk_counter = nullptr) {
  if (r.subs.empty()) throw std::invalid_argument("lm_log_likelihood: empty request");
  std::vector<int> tokens = filter_detail::mapped_tokens(r, lm.vocab, unk_counter);
  return seqnet::sequence_log_likelihood(lm.params, tokens);
}

// ---------------------------------------------------------------------------
// normal model N

struct NormalModel {
  TokenLm lm;
  double train_nll = 0.0;
  double holdout_nll = 0.0;
  std::size_t unk_warnings = 0;
};

inline NormalModel train_normal_model(const RequestCorpus& corpus, const FilterConfig& cfg) {
  if (corpus.requests.empty()) throw std::invalid_argument("train_normal_model: empty corpus");
  Rng rng = Rng(cfg.seed).fork(0x4e4f524d);
  NormalModel model;
  Rng init = rng.fork(1);
  model.lm = make_token_lm(static_cast<int>(corpus.vocab_size()), cfg.hidden, init);
  seqnet::AdamState adam = seqnet::make_adam(model.lm.params.dims, cfg.lr);

  const std::size_t n = corpus.requests.size();
  const std::size_t n_hold = std::max<std::size_t>(1, n / 10);
  const std::size_t n_train = n > n_hold ? n - n_hold : n;

  Rng batch_rng = rng.fork(2);
  double last = 0.0;
  for (int it = 0; it < cfg.normal_iters; ++it) {
    std::vector<const Request*> batch;
    for (int b = 0; b < cfg.batch; ++b)
      batch.push_back(&corpus.requests[batch_rng.uniform_int(n_train)]);
    last = lm_train_batch(model.lm, batch, adam, cfg.grad_clip);
    if (!std::isfinite(last))
      throw std::runtime_error("train_normal_model: diverged at iteration " + std::to_string(it));
  }
  model.train_nll = last;

  double hold = 0.0;
  std::size_t n_eval = 0;
  for (std::size_t i = n_train; i < n; ++i) {
    if (corpus.requests[i].subs.empty()) continue;
    hold -= lm_log_likelihood(model.lm, corpus.requests[i]);
    ++n_eval;
  }
  model.holdout_nll = n_eval ? hold / static_cast<double>(n_eval) : 0.0;
  return model;
}

inline double score_normal(NormalModel& model, const Request& r) {
  return lm_log_likelihood(model.lm, r, &model.unk_warnings);
}

inline double score_normal(const NormalModel& model, const Request& r) {
  return lm_log_likelihood(model.lm, r, nullptr);
}

// ---------------------------------------------------------------------------
// decisions

enum class Verdict { accept, reject };

struct FilterDecision {
  std::size_t request_index = 0;
  double score = 0.0;
  Verdict verdict = Verdict::accept;
  int interval = -1;
};

// Rejects exactly floor(rate * n) lowest-scored requests; ties resolved by
// rejecting the earlier arrival index first.
inline std::vector<FilterDecision> decide(const std::vector<double>& scores, double rejection_rate,
                                          int interval = -1) {
  if (rejection_rate < 0.0 || rejection_rate > 1.0)
    throw std::invalid_argument("decide: rejection_rate must be in [0, 1]");
  const std::size_t n = scores.size();
  const std::size_t n_reject =
      static_cast<std::size_t>(std::floor(rejection_rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  std::vector<FilterDecision> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = {i, scores[i], Verdict::accept, interval};
  }
  for (std::size_t i = 0; i < n_reject; ++i) out[order[i]].verdict = Verdict::reject;
  return out;
}

// per-interval min-max normalization; constant scores map to 0.5
inline std::vector<double> minmax_normalize(const std::vector<double>& raw) {
  if (raw.empty()) return {};
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> out(raw.size());
  if (hi - lo < 1e-300) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - lo) / (hi - lo);
  return out;
}

// ---------------------------------------------------------------------------
// N-over-D

struct NdFilterState {
  TokenLm attack_lm;           // online density model D, warm-started
  seqnet::AdamState adam;
  int intervals_seen = 0;
};

inline NdFilterState make_nd_state(const RequestCorpus& vocab_source, const FilterConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(0x4e4f5644);
  NdFilterState st;
  st.attack_lm = make_token_lm(static_cast<int>(vocab_source.vocab_size()), cfg.hidden, rng);
  st.adam = seqnet::make_adam(st.attack_lm.params.dims, cfg.lr);
  return st;
}

// Updates D on the interval mixture and scores each request as
// logN - logD, min-max normalized within the interval.
inline std::vector<double> nd_interval_update(NdFilterState& st, const NormalModel& normal,
                                              const std::vector<const Request*>& interval,
                                              const FilterConfig& cfg, Rng& rng) {
  if (interval.empty()) return {};
  auto score_all = [&] {
    std::vector<double> raw(interval.size());
    for (std::size_t i = 0; i < interval.size(); ++i)
      raw[i] = score_normal(normal, *interval[i]) - lm_log_likelihood(st.attack_lm, *interval[i]);
    return minmax_normalize(raw);
  };
  std::vector<double> pre_scores;
  if (!cfg.score_after_update) pre_scores = score_all();

  for (int epoch = 0; epoch < cfg.interval_epochs; ++epoch) {
    std::vector<std::size_t> order(interval.size());
    std::iota(order.begin(), order.end(), 0);
    // deterministic shuffle
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    for (std::size_t off = 0; off < order.size(); off += cfg.batch) {
      std::vector<const Request*> batch;
      for (std::size_t i = off; i < std::min(order.size(), off + cfg.batch); ++i)
        batch.push_back(interval[order[i]]);
      lm_train_batch(st.attack_lm, batch, st.adam, cfg.grad_clip);
    }
  }
  st.intervals_seen += 1;
  return cfg.score_after_update ? score_all() : pre_scores;
}

// ---------------------------------------------------------------------------
// Iterative Classifier

// Like the density model above, the classifier is rebuilt on every interval so
// it always represents the latest completed chunk of attack-day traffic.
struct IterFilterState {
  seqnet::Params classifier;    // last-step two-class head; class 1 = attack
  bool has_classifier = false;  // no estimate before the first update
  int vocab = 0;
  std::uint64_t seed = 0;
  int intervals_seen = 0;
};

inline IterFilterState make_iter_state(const RequestCorpus& vocab_source, const FilterConfig& cfg) {
  IterFilterState st;
  st.vocab = static_cast<int>(vocab_source.vocab_size());
  st.seed = cfg.seed;
  return st;
}

inline double iter_attack_probability(const IterFilterState& st, const Request& r) {
  std::vector<int> tokens = filter_detail::mapped_tokens(r, st.vocab, nullptr);
  std::vector<seqnet::VectorXd> inputs;
  inputs.reserve(tokens.size());
  for (int t : tokens) inputs.push_back(seqnet::onehot(t, st.vocab + 1));
  seqnet::Trace tr = seqnet::lstm_forward(st.classifier, inputs);
  return seqnet::softmax(tr.steps.back().logits)[1];
}

// One online epoch on replayed normal data plus the alpha-quantile
// pseudo-labeled interval; scores are 1 - P(attack).
inline std::vector<double> iterative_interval_update(IterFilterState& st,
                                                     const NormalModel& normal,
                                                     const RequestCorpus& normal_pool,
                                                     const std::vector<const Request*>& interval,
                                                     const FilterConfig& cfg, Rng& rng) {
  if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0)
    throw std::invalid_argument("iterative_interval_update: alpha must be in (0, 1)");
  if (interval.empty()) return {};

  // pseudo-labels: the alpha-fraction lowest normal-scored requests are attack
  std::vector<double> nscore(interval.size());
  for (std::size_t i = 0; i < interval.size(); ++i)
    nscore[i] = score_normal(normal, *interval[i]);
  std::vector<std::size_t> order(interval.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nscore[a] != nscore[b]) return nscore[a] < nscore[b];
    return a < b;
  });
  const std::size_t n_attack =
      static_cast<std::size_t>(std::floor(cfg.alpha * static_cast<double>(interval.size())));
  std::vector<int> pseudo(interval.size(), 0);
  for (std::size_t i = 0; i < n_attack; ++i) pseudo[order[i]] = 1;

  auto score_all = [&] {
    // before any classifier exists, fall back to the normal model's ranking
    if (!st.has_classifier) return minmax_normalize(nscore);
    std::vector<double> scores(interval.size());
    for (std::size_t i = 0; i < interval.size(); ++i)
      scores[i] = 1.0 - iter_attack_probability(st, *interval[i]);
    return scores;
  };
  std::vector<double> pre_scores;
  if (!cfg.score_after_update) pre_scores = score_all();

  Rng init = Rng(st.seed).fork(0x49544552u + static_cast<std::uint64_t>(st.intervals_seen));
  st.classifier = seqnet::init_params({st.vocab + 1, cfg.hidden, 2, 0}, init);
  seqnet::AdamState adam = seqnet::make_adam(st.classifier.dims, cfg.lr);

  // training pool: pseudo-labeled interval + replayed normal sample
  std::vector<std::pair<const Request*, int>> pool;
  pool.reserve(interval.size() + cfg.replay_per_interval);
  for (std::size_t i = 0; i < interval.size(); ++i) pool.emplace_back(interval[i], pseudo[i]);
  for (int i = 0; i < cfg.replay_per_interval; ++i)
    pool.emplace_back(&normal_pool.requests[rng.uniform_int(normal_pool.requests.size())], 0);

  // single online epoch over the pool
  const int dim = st.vocab + 1;
  std::vector<std::size_t> shuffled(pool.size());
  std::iota(shuffled.begin(), shuffled.end(), 0);
  for (std::size_t i = shuffled.size(); i > 1; --i)
    std::swap(shuffled[i - 1], shuffled[rng.uniform_int(i)]);
  for (std::size_t off = 0; off < shuffled.size(); off += cfg.batch) {
    seqnet::Params grads = seqnet::zeros_like(st.classifier.dims);
    std::size_t used = 0;
    for (std::size_t i = off; i < std::min(shuffled.size(), off + cfg.batch); ++i) {
      const auto& [req, label] = pool[shuffled[i]];
      if (req->subs.empty()) continue;
      std::vector<int> tokens = filter_detail::mapped_tokens(*req, st.vocab, nullptr);
      std::vector<seqnet::VectorXd> inputs;
      for (int t : tokens) inputs.push_back(seqnet::onehot(t, dim));
      std::vector<int> targets(tokens.size(), -1);
      targets.back() = label;
      auto res = seqnet::cross_entropy_loss(st.classifier, inputs, targets);
      filter_detail::add_grads(grads, res.grads);
      ++used;
    }
    if (used == 0) continue;
    grads.for_each_tensor([&](auto& t) { t /= static_cast<double>(used); });
    seqnet::clip_global_norm(grads, cfg.grad_clip);
    st.classifier = seqnet::adam_update(st.classifier, grads, adam);
  }
  st.has_classifier = true;
  st.intervals_seen += 1;
  return cfg.score_after_update ? score_all() : pre_scores;
}

// ---------------------------------------------------------------------------
// interval schedules

enum class ScheduleMode { fixed, offline, randomized };

struct IntervalSchedule {
  ScheduleMode mode = ScheduleMode::fixed;
  std::vector<int> lengths;  // minutes per interval
};

inline IntervalSchedule make_interval_schedule(ScheduleMode mode, std::size_t n,
                                               std::uint64_t seed, int fixed_len = 1) {
  if (n < 1) throw std::invalid_argument("make_interval_schedule: n must be >= 1");
  IntervalSchedule sched;
  sched.mode = mode;
  switch (mode) {
    case ScheduleMode::fixed:
      sched.lengths.assign(n, fixed_len);
      break;
    case ScheduleMode::offline:
      sched.lengths = {-1};  // single interval covering everything
      break;
    case ScheduleMode::randomized: {
      Rng rng(seed);
      sched.lengths.push_back(5);
      for (std::size_t i = 1; i < n; ++i)
        sched.lengths.push_back(1 + static_cast<int>(rng.uniform_int(3)));
      break;
    }
  }
  return sched;
}

// Interval lengths covering `total_minutes` of attack traffic; the last
// interval is truncated to fit.
inline std::vector<int> schedule_minutes(ScheduleMode mode, int total_minutes, std::uint64_t seed,
                                         int fixed_len = 1) {
  if (total_minutes < 1) throw std::invalid_argument("schedule_minutes: need >= 1 minute");
  if (mode == ScheduleMode::offline) return {total_minutes};
  std::vector<int> out;
  Rng rng(seed);
  int covered = 0;
  bool first = true;
  while (covered < total_minutes) {
    int len;
    if (mode == ScheduleMode::fixed)
      len = fixed_len;
    else {
      len = first ? 5 : 1 + static_cast<int>(rng.uniform_int(3));
      first = false;
    }
    len = std::min(len, total_minutes - covered);
    out.push_back(len);
    covered += len;
  }
  return out;
}

}  // namespace mimicshift
