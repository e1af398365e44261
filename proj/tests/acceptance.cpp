// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Heavier end-to-end runs are shared across criteria.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mimicshift/config.hpp"
#include "mimicshift/experiment.hpp"

using namespace mimicshift;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void run_criterion(int criterion, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& fn) {
  try {
    auto [ok, detail] = fn();
    report(criterion, name, ok, detail);
  } catch (const std::exception& e) {
    report(criterion, name, false, std::string("exception: ") + e.what());
  }
}

template <typename LossFn>
double fd_max_rel_error(seqnet::Params& p, const seqnet::Params& analytic, LossFn loss,
                        double eps = 5e-4) {
  // Fourth-order central differences: negligible truncation error at a step
  // large enough that roundoff does not swamp near-zero gradient entries.
  double worst = 0.0;
  auto check = [&](auto& t, const auto& g) {
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double orig = t.data()[i];
      auto at = [&](double d) {
        t.data()[i] = orig + d;
        const double v = loss();
        t.data()[i] = orig;
        return v;
      };
      const double fd =
          (8.0 * (at(eps) - at(-eps)) - (at(2 * eps) - at(-2 * eps))) / (12.0 * eps);
      const double an = g.data()[i];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      worst = std::max(worst, std::abs(fd - an) / denom);
    }
  };
  check(p.Wx, analytic.Wx);
  check(p.Wh, analytic.Wh);
  check(p.b, analytic.b);
  check(p.Wout, analytic.Wout);
  check(p.bout, analytic.bout);
  if (p.dims.noise > 0) {
    check(p.Wzh, analytic.Wzh);
    check(p.Wzc, analytic.Wzc);
    check(p.bzh, analytic.bzh);
    check(p.bzc, analytic.bzc);
  }
  return worst;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }

// ---------------------------------------------------------------------------
// criterion 1: analytic gradients of the three adversarial-loop losses

std::pair<bool, std::string> check_gradients() {
  Rng rng(2024);
  double worst = 0.0;
  const double tol = 1e-4;
  // ~100 draws split across the three losses, all on 4-unit models
  for (int draw = 0; draw < 34; ++draw) {  // reconstruction loss (mimic)
    seqnet::Params p = seqnet::init_params({3, 4, 3, 0}, rng.next_u64());
    std::vector<seqnet::VectorXd> inputs;
    std::vector<int> targets;
    for (int t = 0; t < 5; ++t) {
      const int cls = static_cast<int>(rng.uniform_int(3));
      inputs.push_back(seqnet::onehot(cls, 3));
      targets.push_back(cls);
    }
    auto analytic = seqnet::cross_entropy_loss(p, inputs, targets).grads;
    auto loss = [&] { return seqnet::cross_entropy_loss(p, inputs, targets).loss; };
    worst = std::max(worst, fd_max_rel_error(p, analytic, loss));
  }
  for (int draw = 0; draw < 33; ++draw) {  // generator loss
    GeneratorModel g;
    g.n_tokens = 3;
    g.k = 2;
    g.noise_dim = 2;
    g.params = seqnet::init_params({5, 4, 3, 2}, rng.next_u64());
    DiscriminatorModel d;
    d.n_tokens = 3;
    d.k = 2;
    d.params = seqnet::init_params({5, 4, 1, 0}, rng.next_u64());
    std::vector<int> conds;
    for (int t = 0; t < 5; ++t) conds.push_back(static_cast<int>(rng.uniform_int(2)));
    seqnet::VectorXd z(2);
    z << rng.normal(), rng.normal();
    auto analytic = generator_loss_and_grads(g, d, conds, z);
    auto loss = [&] { return generator_loss_and_grads(g, d, conds, z).loss; };
    worst = std::max(worst, fd_max_rel_error(g.params, analytic.grads, loss));
  }
  for (int draw = 0; draw < 33; ++draw) {  // discriminator loss
    DiscriminatorModel d;
    d.n_tokens = 3;
    d.k = 2;
    d.params = seqnet::init_params({5, 4, 1, 0}, rng.next_u64());
    std::vector<int> real, fake, conds;
    for (int t = 0; t < 5; ++t) {
      real.push_back(static_cast<int>(rng.uniform_int(3)));
      fake.push_back(static_cast<int>(rng.uniform_int(3)));
      conds.push_back(static_cast<int>(rng.uniform_int(2)));
    }
    auto analytic = discriminator_loss_and_grads(d, real, fake, conds);
    auto loss = [&] { return discriminator_loss_and_grads(d, real, fake, conds).loss; };
    worst = std::max(worst, fd_max_rel_error(d.params, analytic.grads, loss));
  }
  return {worst <= tol, "max relative error " + fmt(worst) + " (tolerance 1e-4, 100 draws)"};
}

// ---------------------------------------------------------------------------
// criterion 2: Markov transition fidelity over 1e5 sampled transitions

std::pair<bool, std::string> check_markov_fidelity() {
  double worst = 0.0;
  for (const auto& p : default_shift_profiles().profiles) {
    auto seq = sample_class_sequence(p, 100001, 20240 + p.name.size());
    auto et = empirical_transition({seq}, static_cast<int>(p.k()));
    for (std::size_t i = 0; i < p.k(); ++i)
      for (std::size_t j = 0; j < p.k(); ++j)
        worst = std::max(worst, std::abs(et.matrix[i][j] - p.trans[i][j]));
  }
  return {worst <= 0.02, "max entry deviation " + fmt(worst) + " (tolerance 0.02)"};
}

// ---------------------------------------------------------------------------
// criterion 3: metric formulas against a brute-force recount

std::pair<bool, std::string> check_metric_oracle() {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    Confusion c;
    c.tp = rng.uniform_int(100);
    c.tn = rng.uniform_int(100);
    c.fp = rng.uniform_int(100);
    c.fn = rng.uniform_int(100);
    if (c.total() == 0) continue;
    MetricsRow m = compute_metrics(c);
    auto expect = [&](const std::optional<double>& got, std::uint64_t num,
                      std::uint64_t den) -> bool {
      if (den == 0) return !got.has_value();
      // recount from the raw tallies and require bit-exact agreement
      return got.has_value() && *got == static_cast<double>(num) / static_cast<double>(den);
    };
    if (!expect(m.fnr, c.fn, c.fn + c.tp)) return {false, "FNR mismatch at trial " + fmt(trial)};
    if (!expect(m.fpr, c.fp, c.fp + c.tn)) return {false, "FPR mismatch at trial " + fmt(trial)};
    if (!expect(m.acc, c.tp + c.tn, c.total()))
      return {false, "ACC mismatch at trial " + fmt(trial)};
    if (!expect(m.precision, c.tp, c.tp + c.fp))
      return {false, "precision mismatch at trial " + fmt(trial)};
    if (!expect(m.recall, c.tp, c.tp + c.fn))
      return {false, "recall mismatch at trial " + fmt(trial)};
    if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
      const double f1 = 2.0 * (*m.precision * *m.recall) / (*m.precision + *m.recall);
      if (!m.f1 || *m.f1 != f1) return {false, "F1 mismatch at trial " + fmt(trial)};
    }
  }
  return {true, "1000 random confusion matrices matched exactly"};
}

// ---------------------------------------------------------------------------
// criterion 4: static-attacker sanity on a separable corpus

std::pair<bool, std::string> check_static_sanity() {
  RequestCorpus normal = synth_corpus(caida_skew_spec(), 600, 404);
  FilterConfig cfg;
  cfg.seed = 405;
  NormalModel nmodel = train_normal_model(normal, cfg);

  // separable attack: out-of-vocabulary tokens only
  std::vector<Request> attack;
  for (int i = 0; i < 1600; ++i) {
    Request r;
    r.label = Label::attack;
    r.source_id = "172.16.9.9";
    for (int l = 0; l < 16; ++l) r.subs.push_back({9999, 4242.0, 0});
    attack.push_back(std::move(r));
  }

  NdFilterState nd = make_nd_state(normal, cfg);
  IterFilterState it = make_iter_state(normal, cfg);
  Rng rng(406);
  MetricsRow nd_row, it_row;
  std::size_t a_cursor = 0, n_cursor = 0;
  for (int interval = 0; interval < 4; ++interval) {
    std::vector<const Request*> reqs;
    std::vector<Label> labels;
    for (int i = 0; i < 200; ++i) reqs.push_back(&attack[a_cursor++]);  // alpha = 0.8
    for (int i = 0; i < 50; ++i) reqs.push_back(&normal.requests[(n_cursor++) % 500]);
    for (const Request* r : reqs) labels.push_back(r->label);

    auto nd_scores = nd_interval_update(nd, nmodel, reqs, cfg, rng);
    auto it_scores = iterative_interval_update(it, nmodel, normal, reqs, cfg, rng);
    nd_row = compute_metrics(confusion(decide(nd_scores, cfg.rejection_rate, interval), labels));
    it_row = compute_metrics(confusion(decide(it_scores, cfg.rejection_rate, interval), labels));
  }
  const bool ok = nd_row.fnr && *nd_row.fnr <= 0.10 && nd_row.fpr && *nd_row.fpr <= 0.15 &&
                  it_row.fnr && *it_row.fnr <= 0.10 && it_row.fpr && *it_row.fpr <= 0.15;
  return {ok, "density-ratio fnr=" + fmt_opt(nd_row.fnr) + " fpr=" + fmt_opt(nd_row.fpr) +
                  ", iterative fnr=" + fmt_opt(it_row.fnr) + " fpr=" + fmt_opt(it_row.fpr) +
                  " (need fnr<=0.10, fpr<=0.15)"};
}

// ---------------------------------------------------------------------------
// shared end-to-end runs for criteria 5-7 and 9

const FilterRun* find_run(const ExperimentResult& r, FilterKind k) {
  for (const auto& fr : r.runs)
    if (fr.kind == k) return &fr;
  return nullptr;
}

struct SharedRuns {
  ExperimentConfig cfg;
  ExperimentResult shifting;
  ExperimentResult static_run;
  fs::path dir_a, dir_b;
};

SharedRuns make_shared_runs() {
  SharedRuns s;
  s.cfg = preset_config("paper-defaults");
  s.dir_a = fs::temp_directory_path() / "ms_acceptance_run_a";
  s.dir_b = fs::temp_directory_path() / "ms_acceptance_run_b";
  fs::remove_all(s.dir_a);
  fs::remove_all(s.dir_b);

  s.shifting = run_experiment(s.cfg);

  // determinism check (criterion 9): the same seeded run twice, files compared
  ExperimentConfig repeat_cfg = s.cfg;
  repeat_cfg.seed = 7;
  repeat_cfg.out_dir = s.dir_a.string();
  run_experiment(repeat_cfg);
  repeat_cfg.out_dir = s.dir_b.string();
  run_experiment(repeat_cfg);

  // static baseline: one profile throughout, chosen as the shifting run's
  // final-interval profile so the held-out test minute is identical
  ExperimentConfig static_cfg = s.cfg;
  static_cfg.shifting = false;
  static_cfg.static_profile_index = s.shifting.shift_schedule.back();
  s.static_run = run_experiment(static_cfg);
  return s;
}

std::pair<bool, std::string> check_poisoning(const SharedRuns& s) {
  std::ostringstream os;
  bool ok = true;
  for (FilterKind k : {FilterKind::n_over_d, FilterKind::iterative}) {
    const FilterRun* shift = find_run(s.shifting, k);
    const FilterRun* stat = find_run(s.static_run, k);
    if (!shift || !stat || !shift->metrics.fnr || !stat->metrics.fnr || !shift->metrics.fpr ||
        !stat->metrics.fpr)
      return {false, "missing metrics for " + filter_name(k)};
    const double dfnr = *shift->metrics.fnr - *stat->metrics.fnr;
    const double dfpr = *shift->metrics.fpr - *stat->metrics.fpr;
    ok = ok && dfnr >= 0.15 && dfpr >= 0.15;
    os << filter_name(k) << " dFNR=" << fmt(dfnr) << " dFPR=" << fmt(dfpr) << "; ";
  }
  const FilterRun* n_shift = find_run(s.shifting, FilterKind::n_only);
  const FilterRun* n_stat = find_run(s.static_run, FilterKind::n_only);
  const double n_dfnr = std::abs(*n_shift->metrics.fnr - *n_stat->metrics.fnr);
  const double n_dfpr = std::abs(*n_shift->metrics.fpr - *n_stat->metrics.fpr);
  ok = ok && n_dfnr <= 0.02 && n_dfpr <= 0.02;
  os << "baseline |dFNR|=" << fmt(n_dfnr) << " |dFPR|=" << fmt(n_dfpr)
     << " (need online +0.15, baseline within 0.02)";
  return {ok, os.str()};
}

std::pair<bool, std::string> check_countermeasure(const SharedRuns& s) {
  const FilterRun* it = find_run(s.shifting, FilterKind::iterative);
  const FilterRun* eit = find_run(s.shifting, FilterKind::enhanced_iterative);
  const FilterRun* nd = find_run(s.shifting, FilterKind::n_over_d);
  const FilterRun* end_ = find_run(s.shifting, FilterKind::enhanced_n_over_d);
  if (!it->metrics.fnr || !eit->metrics.fnr || !nd->metrics.fnr || !end_->metrics.fnr)
    return {false, "missing FNR values"};
  const double rel_drop = (*it->metrics.fnr - *eit->metrics.fnr) / *it->metrics.fnr;
  const double nd_delta = std::abs(*end_->metrics.fnr - *nd->metrics.fnr);
  const bool ok = rel_drop >= 0.30 && nd_delta < 0.05;
  return {ok, "iterative fnr " + fmt_opt(it->metrics.fnr) + " -> enhanced " +
                  fmt_opt(eit->metrics.fnr) + " (relative drop " + fmt(rel_drop) +
                  ", need >=0.30); density-ratio |dFNR|=" + fmt(nd_delta) + " (need <0.05)"};
}

std::pair<bool, std::string> check_overlap(const SharedRuns& s) {
  const FilterRun* n = find_run(s.shifting, FilterKind::n_only);
  const FilterRun* nd = find_run(s.shifting, FilterKind::n_over_d);
  const double ratio = n->score_overlap > 0.0 ? nd->score_overlap / n->score_overlap
                                              : std::numeric_limits<double>::infinity();
  return {nd->score_overlap >= 2.0 * n->score_overlap,
          "overlap online=" + fmt(nd->score_overlap) + " baseline=" + fmt(n->score_overlap) +
              " ratio=" + fmt(ratio) + " (need >=2)"};
}

// ---------------------------------------------------------------------------
// criterion 8: threshold sensitivity

std::pair<bool, std::string> check_threshold_sensitivity() {
  Rng rng(808);
  std::vector<double> scores;
  std::vector<Label> labels;
  for (int i = 0; i < 1000; ++i) {
    const bool attack = rng.uniform() < 0.5;
    scores.push_back(attack ? rng.uniform(0.0, 0.7) : rng.uniform(0.3, 1.0));
    labels.push_back(attack ? Label::attack : Label::normal);
  }
  auto curve = rate_curve(scores, labels, CurveAxis::acceptance_fnr);
  const double f02 = *curve.points[4].second;   // acceptance 0.2
  const double f05 = *curve.points[10].second;  // acceptance 0.5
  const double f08 = *curve.points[16].second;  // acceptance 0.8
  if (!(f02 <= f05 && f05 <= f08))
    return {false, "FNR not monotone: " + fmt(f02) + ", " + fmt(f05) + ", " + fmt(f08)};
  for (int step : {4, 10, 16}) {
    const double r = step * 0.05;
    auto decisions = decide(scores, 1.0 - r);
    std::uint64_t fn = 0, tp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (labels[i] != Label::attack) continue;
      (decisions[i].verdict == Verdict::reject ? tp : fn) += 1;
    }
    if (*curve.points[step].second != static_cast<double>(fn) / static_cast<double>(fn + tp))
      return {false, "brute-force recount mismatch at acceptance " + fmt(r)};
  }
  return {true, "monotone at {0.2, 0.5, 0.8} and exact against the recount (" + fmt(f02) + " <= " +
                    fmt(f05) + " <= " + fmt(f08) + ")"};
}

// ---------------------------------------------------------------------------
// criterion 9: byte-identical outputs for repeated runs

std::pair<bool, std::string> check_determinism(const SharedRuns& s) {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(s.dir_a)) {
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".csv") || name.ends_with(".json")) names.push_back(name);
  }
  if (names.empty()) return {false, "no metric or curve files produced"};
  std::sort(names.begin(), names.end());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  for (const auto& name : names) {
    if (!fs::exists(s.dir_b / name)) return {false, "second run missing " + name};
    if (slurp(s.dir_a / name) != slurp(s.dir_b / name))
      return {false, "byte mismatch in " + name};
  }
  return {true, fmt(names.size()) + " metric/curve files byte-identical across repeated runs"};
}

}  // namespace

int main() {
  run_criterion(1, "gradient correctness", check_gradients);
  run_criterion(2, "Markov fidelity", check_markov_fidelity);
  run_criterion(3, "metric oracle", check_metric_oracle);
  run_criterion(4, "static-attacker sanity", check_static_sanity);

  bool shared_ok = true;
  SharedRuns shared;
  try {
    shared = make_shared_runs();
  } catch (const std::exception& e) {
    shared_ok = false;
    const std::string why = std::string("end-to-end run failed: ") + e.what();
    report(5, "poisoning effect", false, why);
    report(6, "countermeasure effect", false, why);
    report(7, "distribution-overlap analysis", false, why);
  }
  if (shared_ok) {
    run_criterion(5, "poisoning effect", [&] { return check_poisoning(shared); });
    run_criterion(6, "countermeasure effect", [&] { return check_countermeasure(shared); });
    run_criterion(7, "distribution-overlap analysis", [&] { return check_overlap(shared); });
  }
  run_criterion(8, "threshold sensitivity", check_threshold_sensitivity);
  if (shared_ok)
    run_criterion(9, "determinism", [&] { return check_determinism(shared); });
  else
    report(9, "determinism", false, "end-to-end run failed");

  std::printf("%d/9 criteria passed\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
