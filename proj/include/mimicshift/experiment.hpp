#pragma once

// End-to-end experiment orchestration: synthesize or ingest normal traffic,
// train the attacker, schedule distribution shifts, run the selected filters
// over the attack-day stream, and report metrics and curves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimicshift/attack.hpp"
#include "mimicshift/filter.hpp"
#include "mimicshift/markov.hpp"
#include "mimicshift/metrics.hpp"
#include "mimicshift/seqnet.hpp"
#include "mimicshift/traffic.hpp"

namespace mimicshift {

enum class FilterKind { n_only, n_over_d, iterative, enhanced_n_over_d, enhanced_iterative };

inline std::string filter_name(FilterKind k) {
  switch (k) {
    case FilterKind::n_only: return "N";
    case FilterKind::n_over_d: return "N-over-D";
    case FilterKind::iterative: return "Iterative";
    case FilterKind::enhanced_n_over_d: return "Enhanced N-over-D";
    case FilterKind::enhanced_iterative: return "Enhanced Iterative";
  }
  return "?";
}

struct ExperimentConfig {
  // corpus source
  bool use_csv = false;
  std::string csv_path;
  SynthSpec synth_spec = caida_skew_spec();
  std::size_t n_normal_requests = 2000;  // normal-day training requests
  std::size_t n_mix_requests = 2000;     // attack-day normal pool
  std::string feature_name = "request_len";
  int k = 3;

  // attacker
  ShiftProfile profiles = default_shift_profiles();
  bool shifting = true;
  // cycle through the profiles minute by minute (the filter's attack estimate
  // is then stale in every interval); false = uniform random picks per minute
  bool cycle_profiles = true;
  int static_profile_index = 0;
  TrainConfig train;
  std::size_t n_walks = 1500;
  double walk_p = 1.0, walk_q = 1.0;

  // defense
  std::vector<FilterKind> filters = {FilterKind::n_only, FilterKind::n_over_d,
                                     FilterKind::iterative, FilterKind::enhanced_n_over_d,
                                     FilterKind::enhanced_iterative};
  // Experiment runs score each interval with the model trained on the previous
  // interval (the update produced by interval t only applies to later traffic),
  // so the attack-day evaluation is strictly causal.
  FilterConfig filter = [] {
    FilterConfig f;
    f.score_after_update = false;
    return f;
  }();
  ScheduleMode schedule_mode = ScheduleMode::fixed;  // plain filters; enhanced are randomized
  int fixed_interval_len = 1;
  int attack_minutes = 14;
  int requests_per_minute = 300;
  double attack_fraction = 0.5;  // attack share of the attack-day mixture

  std::uint64_t seed = 1;
  std::string out_dir;  // empty = no files written
  std::string dataset_name = "synthetic";
};

struct FilterRun {
  FilterKind kind = FilterKind::n_only;
  MetricsRow metrics;                   // on the test minute
  RateCurve fnr_curve;                  // acceptance axis
  RateCurve fpr_curve;                  // rejection axis
  double score_overlap = 0.0;           // normal/attack histogram intersection, test minute
  std::vector<FilterDecision> decisions;  // test minute, ordered by arrival
  std::vector<double> test_scores;
  std::vector<Label> test_labels;
};

struct ExperimentResult {
  std::vector<FilterRun> runs;
  std::vector<int> shift_schedule;          // profile index per minute
  std::vector<std::string> shift_names;
  GanTrainLog gan_log;
  double normal_holdout_nll = 0.0;
  std::vector<std::vector<int>> condition_audit;  // conditions used in the final minute
};

// intersection of two normalized score histograms over [0,1]
inline double histogram_overlap(const std::vector<double>& scores, const std::vector<Label>& labels,
                                int bins = 20) {
  std::vector<double> hn(bins, 0.0), ha(bins, 0.0);
  double n_norm = 0.0, n_att = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int b = std::min(bins - 1, std::max(0, static_cast<int>(scores[i] * bins)));
    if (labels[i] == Label::normal) {
      hn[b] += 1.0;
      n_norm += 1.0;
    } else {
      ha[b] += 1.0;
      n_att += 1.0;
    }
  }
  if (n_norm == 0.0 || n_att == 0.0) return 0.0;
  double overlap = 0.0;
  for (int b = 0; b < bins; ++b) overlap += std::min(hn[b] / n_norm, ha[b] / n_att);
  return overlap;
}

namespace experiment_detail {

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error("stage '" + name + "' failed: " + e.what());
  }
}

}  // namespace experiment_detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  Rng root(cfg.seed);
  ExperimentResult result;

  // --- corpus --------------------------------------------------------------
  RequestCorpus all = experiment_detail::stage("corpus", [&] {
    if (cfg.use_csv) return ingest_csv(cfg.csv_path, cfg.feature_name, {}, cfg.k);
    // single synthesis call so the normal-day and attack-day normal pools
    // share one vocabulary
    return synth_corpus(cfg.synth_spec, cfg.n_normal_requests + cfg.n_mix_requests,
                        root.fork(1).next_u64(), cfg.feature_name, cfg.k);
  });
  RequestCorpus normal_day;
  normal_day.vocab = all.vocab;
  normal_day.feature_name = all.feature_name;
  normal_day.class_map = all.class_map;
  RequestCorpus mix_pool = normal_day;  // same vocabulary, empty requests
  {
    const std::size_t n_total = all.requests.size();
    const std::size_t n_day = cfg.use_csv
                                  ? n_total - std::min(n_total / 2, cfg.n_mix_requests)
                                  : std::min(cfg.n_normal_requests, n_total);
    for (std::size_t i = 0; i < n_total; ++i)
      (i < n_day ? normal_day : mix_pool).requests.push_back(all.requests[i]);
    if (mix_pool.requests.empty())
      throw std::runtime_error("stage 'corpus' failed: no requests left for the attack-day pool");
  }

  // --- attacker training ---------------------------------------------------
  GanModels attacker = experiment_detail::stage("train-attacker", [&] {
    AdjacencyMatrix adj = build_adjacency(normal_day);
    EdgeWeights ew = build_edge_weights(normal_day);
    WalkSet walks = sample_walks(adj, cfg.train.seq_len, cfg.n_walks, cfg.walk_p, cfg.walk_q,
                                 root.fork(2).next_u64(), &ew);
    TrainConfig tc = cfg.train;
    tc.seed = root.fork(3).next_u64();
    return train_gan(normal_day, walks, tc);
  });
  result.gan_log = attacker.log;

  // --- shift schedule ------------------------------------------------------
  experiment_detail::stage("schedule", [&] {
    if (cfg.shifting) {
      if (cfg.cycle_profiles) {
        const int k = static_cast<int>(cfg.profiles.profiles.size());
        for (int t = 0; t < cfg.attack_minutes; ++t)
          result.shift_schedule.push_back(t % k);
      } else {
        ShiftSchedule s = make_shift_schedule(cfg.profiles, cfg.attack_minutes,
                                              root.fork(4).next_u64());
        result.shift_schedule = s.picks;
      }
    } else {
      if (cfg.static_profile_index < 0 ||
          static_cast<std::size_t>(cfg.static_profile_index) >= cfg.profiles.profiles.size())
        throw std::invalid_argument("static_profile_index out of range");
      result.shift_schedule.assign(cfg.attack_minutes, cfg.static_profile_index);
    }
    for (int p : result.shift_schedule) result.shift_names.push_back(cfg.profiles.profiles[p].name);
    return 0;
  });

  // --- attack-day stream ---------------------------------------------------
  // one list of requests per simulated minute, attack mixed with normal
  std::vector<std::vector<Request>> minutes(cfg.attack_minutes);
  experiment_detail::stage("attack-generation", [&] {
    std::size_t mix_cursor = 0;
    for (int t = 0; t < cfg.attack_minutes; ++t) {
      Rng minute_rng = root.fork(100 + static_cast<std::uint64_t>(t));
      const std::size_t n_att = static_cast<std::size_t>(
          std::floor(cfg.attack_fraction * static_cast<double>(cfg.requests_per_minute)));
      const std::size_t n_norm = static_cast<std::size_t>(cfg.requests_per_minute) - n_att;
      GeneratedBatch batch =
          generate_requests(attacker.generator, attacker.mimic,
                            cfg.profiles.profiles[result.shift_schedule[t]], normal_day, n_att,
                            cfg.train.seq_len, minute_rng, t);
      if (t == cfg.attack_minutes - 1) result.condition_audit = batch.conditions;
      std::vector<Request> slot = std::move(batch.corpus.requests);
      for (std::size_t i = 0; i < n_norm; ++i) {
        Request r = mix_pool.requests[mix_cursor % mix_pool.requests.size()];
        ++mix_cursor;
        r.interval_index = t;
        slot.push_back(std::move(r));
      }
      // deterministic interleave
      for (std::size_t i = slot.size(); i > 1; --i)
        std::swap(slot[i - 1], slot[minute_rng.uniform_int(i)]);
      minutes[t] = std::move(slot);
    }
    return 0;
  });

  // --- defender ------------------------------------------------------------
  NormalModel normal_model = experiment_detail::stage("train-normal-model", [&] {
    FilterConfig fc = cfg.filter;
    fc.seed = root.fork(5).next_u64();
    return train_normal_model(normal_day, fc);
  });
  result.normal_holdout_nll = normal_model.holdout_nll;

  const int test_minute = cfg.attack_minutes - 1;
  for (std::size_t fi = 0; fi < cfg.filters.size(); ++fi) {
    const FilterKind kind = cfg.filters[fi];
    FilterRun run = experiment_detail::stage("filter-" + filter_name(kind), [&] {
      FilterRun fr;
      fr.kind = kind;
      const bool enhanced =
          kind == FilterKind::enhanced_n_over_d || kind == FilterKind::enhanced_iterative;
      const ScheduleMode mode = enhanced ? ScheduleMode::randomized : cfg.schedule_mode;
      // schedule seed depends only on the filter kind so paired runs align
      std::vector<int> lengths = schedule_minutes(
          mode, cfg.attack_minutes, Rng(cfg.seed).fork(200 + static_cast<int>(kind)).next_u64(),
          cfg.fixed_interval_len);

      FilterConfig fc = cfg.filter;
      fc.seed = Rng(cfg.seed).fork(300 + static_cast<int>(kind)).next_u64();
      Rng filter_rng = Rng(cfg.seed).fork(400 + static_cast<int>(kind));

      NdFilterState nd_state;
      IterFilterState iter_state;
      const bool is_nd = kind == FilterKind::n_over_d || kind == FilterKind::enhanced_n_over_d;
      const bool is_iter = kind == FilterKind::iterative || kind == FilterKind::enhanced_iterative;
      if (is_nd) nd_state = make_nd_state(normal_day, fc);
      if (is_iter) iter_state = make_iter_state(normal_day, fc);

      int minute_cursor = 0;
      for (std::size_t iv = 0; iv < lengths.size() && minute_cursor < cfg.attack_minutes; ++iv) {
        std::vector<const Request*> interval;
        std::vector<int> minute_of;  // per request, which minute it came from
        const int end = std::min(cfg.attack_minutes, minute_cursor + lengths[iv]);
        for (int t = minute_cursor; t < end; ++t)
          for (const Request& r : minutes[t]) {
            interval.push_back(&r);
            minute_of.push_back(t);
          }
        minute_cursor = end;
        if (interval.empty()) continue;

        std::vector<double> scores;
        if (is_nd) {
          scores = nd_interval_update(nd_state, normal_model, interval, fc, filter_rng);
        } else if (is_iter) {
          scores = iterative_interval_update(iter_state, normal_model, normal_day, interval, fc,
                                             filter_rng);
        } else {  // N-only
          std::vector<double> raw(interval.size());
          for (std::size_t i = 0; i < interval.size(); ++i)
            raw[i] = score_normal(normal_model, *interval[i]);
          scores = minmax_normalize(raw);
        }
        auto decisions = decide(scores, fc.rejection_rate, static_cast<int>(iv));

        // keep the slice belonging to the test minute
        for (std::size_t i = 0; i < interval.size(); ++i) {
          if (minute_of[i] != test_minute) continue;
          FilterDecision d = decisions[i];
          d.request_index = fr.test_scores.size();
          fr.decisions.push_back(d);
          fr.test_scores.push_back(scores[i]);
          fr.test_labels.push_back(interval[i]->label);
        }
      }

      Confusion c = confusion(fr.decisions, fr.test_labels);
      fr.metrics = compute_metrics(c);
      fr.metrics.dataset = cfg.dataset_name;
      fr.metrics.model = filter_name(kind);
      fr.metrics.interval = mode == ScheduleMode::offline
                                ? "inf"
                                : (mode == ScheduleMode::randomized
                                       ? "rand"
                                       : std::to_string(cfg.fixed_interval_len));
      fr.fnr_curve = rate_curve(fr.test_scores, fr.test_labels, CurveAxis::acceptance_fnr);
      fr.fpr_curve = rate_curve(fr.test_scores, fr.test_labels, CurveAxis::rejection_fpr);
      fr.score_overlap = histogram_overlap(fr.test_scores, fr.test_labels);
      return fr;
    });
    result.runs.push_back(std::move(run));
  }

  // --- artifacts -----------------------------------------------------------
  if (!cfg.out_dir.empty()) {
    experiment_detail::stage("report", [&] {
      fs::create_directories(cfg.out_dir);
      const fs::path dir(cfg.out_dir);
      std::vector<MetricsRow> rows;
      for (const auto& r : result.runs) rows.push_back(r.metrics);
      emit_report_csv(rows, (dir / "metrics.csv").string());
      emit_report_json(rows, (dir / "metrics.json").string());
      {
        std::ofstream sched(dir / "shift_schedule.csv");
        sched << "minute,profile_index,profile\n";
        for (std::size_t t = 0; t < result.shift_schedule.size(); ++t)
          sched << t << ',' << result.shift_schedule[t] << ',' << result.shift_names[t] << '\n';
      }
      for (const auto& r : result.runs) {
        std::string tag = filter_name(r.kind);
        std::replace(tag.begin(), tag.end(), ' ', '_');
        emit_curve_csv(r.fnr_curve, (dir / ("fnr_curve_" + tag + ".csv")).string());
        emit_curve_csv(r.fpr_curve, (dir / ("fpr_curve_" + tag + ".csv")).string());
        emit_decision_log(r.decisions, r.test_labels, (dir / ("decisions_" + tag + ".csv")).string());
      }
      seqnet::save_checkpoint(attacker.mimic.params, (dir / "mimic.ckpt").string(), cfg.seed);
      seqnet::save_checkpoint(attacker.generator.params, (dir / "generator.ckpt").string(),
                              cfg.seed);
      seqnet::save_checkpoint(attacker.discriminator.params, (dir / "discriminator.ckpt").string(),
                              cfg.seed);
      seqnet::save_checkpoint(normal_model.lm.params, (dir / "normal_model.ckpt").string(),
                              cfg.seed);
      return 0;
    });
  }

  return result;
}

}  // namespace mimicshift
