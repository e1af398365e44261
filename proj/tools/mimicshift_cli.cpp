// Command-line front end: synthesize traffic, train the attacker, generate
// attack streams, run the online filters, and evaluate/report results.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mimicshift/config.hpp"
#include "mimicshift/experiment.hpp"

namespace ms = mimicshift;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;  // preset name or config-file path
  std::string preset;
  std::uint64_t seed = 7;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config, "preset name or config file path");
  cmd->add_option("--preset", args.preset, "preset name (paper-defaults or caida-skew)");
  cmd->add_option("--seed", args.seed, "root random seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--out", args.out, "output file or directory");
}

ms::ExperimentConfig resolve_config(const CommonArgs& args) {
  ms::ExperimentConfig cfg;
  if (!args.config.empty())
    cfg = ms::load_experiment_config(args.config);
  else
    cfg = ms::preset_config(args.preset.empty() ? "paper-defaults" : args.preset);
  if (args.seed_set) cfg.seed = args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  return cfg;
}

ms::RequestCorpus load_or_synth_normal(const ms::ExperimentConfig& cfg, std::size_t count,
                                       std::uint64_t seed) {
  if (cfg.use_csv) return ms::ingest_csv(cfg.csv_path, cfg.feature_name, {}, cfg.k);
  return ms::synth_corpus(cfg.synth_spec, count, seed, cfg.feature_name, cfg.k);
}

int cmd_synth(const CommonArgs& args, std::size_t count) {
  ms::ExperimentConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) throw std::runtime_error("synth: --out <csv-path> is required");
  ms::RequestCorpus corpus =
      ms::synth_corpus(cfg.synth_spec, count ? count : cfg.n_normal_requests,
                       ms::Rng(cfg.seed).fork(1).next_u64(), cfg.feature_name, cfg.k);
  ms::write_corpus_csv(corpus, cfg.out_dir);
  std::cout << "wrote " << corpus.requests.size() << " requests (" << corpus.vocab.size()
            << " tokens) to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_train_attacker(const CommonArgs& args) {
  ms::ExperimentConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) throw std::runtime_error("train-attacker: --out <dir> is required");
  ms::Rng root(cfg.seed);
  ms::RequestCorpus corpus = load_or_synth_normal(cfg, cfg.n_normal_requests, root.fork(1).next_u64());
  ms::AdjacencyMatrix adj = ms::build_adjacency(corpus);
  ms::EdgeWeights ew = ms::build_edge_weights(corpus);
  ms::WalkSet walks = ms::sample_walks(adj, cfg.train.seq_len, cfg.n_walks, cfg.walk_p, cfg.walk_q,
                                       root.fork(2).next_u64(), &ew);
  ms::TrainConfig tc = cfg.train;
  tc.seed = root.fork(3).next_u64();
  ms::GanModels models = ms::train_gan(corpus, walks, tc);
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  ms::seqnet::save_checkpoint(models.mimic.params, (dir / "mimic.ckpt").string(), cfg.seed);
  ms::seqnet::save_checkpoint(models.generator.params, (dir / "generator.ckpt").string(), cfg.seed);
  ms::seqnet::save_checkpoint(models.discriminator.params, (dir / "discriminator.ckpt").string(),
                              cfg.seed);
  std::cout << "trained attacker (" << cfg.train.gan_iters
            << " iterations, final discriminator accuracy "
            << models.log.final_disc_accuracy << ") -> " << cfg.out_dir << "\n";
  if (models.log.mode_collapse_warning)
    std::cout << "warning: discriminator accuracy pinned at 1.0; possible mode collapse\n";
  return 0;
}

int cmd_attack(const CommonArgs& args, const std::string& model_dir, std::size_t count,
               int profile_index) {
  ms::ExperimentConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) throw std::runtime_error("attack: --out <csv-path> is required");
  if (model_dir.empty()) throw std::runtime_error("attack: --model <dir> is required");
  ms::Rng root(cfg.seed);
  ms::RequestCorpus corpus = load_or_synth_normal(cfg, cfg.n_normal_requests, root.fork(1).next_u64());
  const fs::path dir(model_dir);
  ms::GeneratorModel g;
  g.params = ms::seqnet::load_checkpoint((dir / "generator.ckpt").string());
  g.n_tokens = g.params.dims.output;
  g.k = g.params.dims.input - g.n_tokens;
  g.noise_dim = g.params.dims.noise;
  ms::MimicModel c;
  c.params = ms::seqnet::load_checkpoint((dir / "mimic.ckpt").string());
  c.k = c.params.dims.output;
  if (g.n_tokens != static_cast<int>(corpus.vocab.size()))
    throw std::runtime_error("attack: checkpoint vocabulary size " + std::to_string(g.n_tokens) +
                             " does not match corpus (" + std::to_string(corpus.vocab.size()) + ")");
  if (profile_index < 0 ||
      static_cast<std::size_t>(profile_index) >= cfg.profiles.profiles.size())
    throw std::runtime_error("attack: --profile index out of range");
  ms::Rng rng = root.fork(100);
  ms::GeneratedBatch batch = ms::generate_requests(g, c, cfg.profiles.profiles[profile_index],
                                                   corpus, count, cfg.train.seq_len, rng, 0);
  ms::write_corpus_csv(batch.corpus, cfg.out_dir);
  std::cout << "wrote " << batch.corpus.requests.size() << " attack requests to " << cfg.out_dir
            << "\n";
  return 0;
}

int cmd_filter(const CommonArgs& args, const std::string& traffic_csv,
               const std::string& filter_model) {
  ms::ExperimentConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) throw std::runtime_error("filter: --out <csv-path> is required");
  if (traffic_csv.empty()) throw std::runtime_error("filter: --traffic <csv-path> is required");
  ms::Rng root(cfg.seed);
  ms::RequestCorpus normal = load_or_synth_normal(cfg, cfg.n_normal_requests, root.fork(1).next_u64());
  ms::RequestCorpus traffic = ms::ingest_csv(traffic_csv, cfg.feature_name, {}, cfg.k);
  ms::FilterConfig fc = cfg.filter;
  fc.seed = root.fork(5).next_u64();
  ms::NormalModel nm = ms::train_normal_model(normal, fc);
  ms::Rng frng = root.fork(6);

  // requests are grouped into intervals by their interval_index column
  std::map<int, std::vector<const ms::Request*>> intervals;
  for (const ms::Request& r : traffic.requests) intervals[r.interval_index].push_back(&r);

  ms::NdFilterState nd = ms::make_nd_state(normal, fc);
  ms::IterFilterState it = ms::make_iter_state(normal, fc);
  std::vector<ms::FilterDecision> all_decisions;
  std::vector<ms::Label> all_labels;
  for (const auto& [iv, reqs] : intervals) {
    std::vector<double> scores;
    if (filter_model == "N-over-D") {
      scores = ms::nd_interval_update(nd, nm, reqs, fc, frng);
    } else if (filter_model == "Iterative") {
      scores = ms::iterative_interval_update(it, nm, normal, reqs, fc, frng);
    } else if (filter_model == "N") {
      std::vector<double> raw(reqs.size());
      for (std::size_t i = 0; i < reqs.size(); ++i) raw[i] = ms::score_normal(nm, *reqs[i]);
      scores = ms::minmax_normalize(raw);
    } else {
      throw std::runtime_error("filter: unknown --model '" + filter_model +
                               "' (expected N, N-over-D, or Iterative)");
    }
    auto decisions = ms::decide(scores, fc.rejection_rate, iv);
    for (auto& d : decisions) {
      d.request_index = all_labels.size() + d.request_index;
      all_decisions.push_back(d);
    }
    for (const ms::Request* r : reqs) all_labels.push_back(r->label);
  }
  ms::emit_decision_log(all_decisions, all_labels, cfg.out_dir);
  std::cout << "wrote " << all_decisions.size() << " decisions to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& decisions_csv) {
  if (decisions_csv.empty()) throw std::runtime_error("eval: --decisions <csv-path> is required");
  if (args.out.empty()) throw std::runtime_error("eval: --out <dir> is required");
  std::ifstream in(decisions_csv);
  if (!in) throw std::runtime_error("eval: cannot open " + decisions_csv);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("eval: empty decision log");
  if (line != "interval,request_index,score,verdict,label")
    throw std::runtime_error("eval: unexpected decision-log header: " + line);
  std::vector<ms::FilterDecision> decisions;
  std::vector<double> scores;
  std::vector<ms::Label> labels;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[5];
    for (int i = 0; i < 5; ++i)
      if (!std::getline(row, f[i], ','))
        throw std::runtime_error("eval: line " + std::to_string(lineno) + ": expected 5 fields");
    ms::FilterDecision d;
    d.interval = std::stoi(f[0]);
    d.request_index = labels.size();
    d.score = std::stod(f[2]);
    if (f[3] == "reject") d.verdict = ms::Verdict::reject;
    else if (f[3] == "accept") d.verdict = ms::Verdict::accept;
    else
      throw std::runtime_error("eval: line " + std::to_string(lineno) + ": bad verdict '" + f[3] +
                               "'");
    if (f[4] == "attack") labels.push_back(ms::Label::attack);
    else if (f[4] == "normal") labels.push_back(ms::Label::normal);
    else
      throw std::runtime_error("eval: line " + std::to_string(lineno) + ": bad label '" + f[4] +
                               "'");
    scores.push_back(d.score);
    decisions.push_back(d);
  }
  ms::Confusion c = ms::confusion(decisions, labels);
  ms::MetricsRow row = ms::compute_metrics(c);
  row.dataset = "decision-log";
  row.model = fs::path(decisions_csv).stem().string();
  row.interval = "-";
  fs::create_directories(args.out);
  const fs::path dir(args.out);
  ms::emit_report_csv({row}, (dir / "metrics.csv").string());
  ms::emit_report_json({row}, (dir / "metrics.json").string());
  ms::emit_curve_csv(ms::rate_curve(scores, labels, ms::CurveAxis::acceptance_fnr),
                     (dir / "fnr_curve.csv").string());
  ms::emit_curve_csv(ms::rate_curve(scores, labels, ms::CurveAxis::rejection_fpr),
                     (dir / "fpr_curve.csv").string());
  std::cout << "evaluated " << decisions.size() << " decisions -> " << args.out << "\n";
  return 0;
}

int cmd_run(const CommonArgs& args) {
  ms::ExperimentConfig cfg = resolve_config(args);
  if (cfg.out_dir.empty()) throw std::runtime_error("run: --out <dir> is required");
  ms::ExperimentResult result = ms::run_experiment(cfg);
  for (const auto& r : result.runs) {
    std::cout << ms::filter_name(r.kind) << ": fnr="
              << (r.metrics.fnr ? std::to_string(*r.metrics.fnr) : "n/a") << " fpr="
              << (r.metrics.fpr ? std::to_string(*r.metrics.fpr) : "n/a")
              << " overlap=" << r.score_overlap << "\n";
  }
  std::cout << "artifacts written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  if (run_dir.empty()) throw std::runtime_error("report: --run <dir> is required");
  std::ifstream in(fs::path(run_dir) / "metrics.json");
  if (!in) throw std::runtime_error("report: cannot open " + run_dir + "/metrics.json");
  nlohmann::json doc = nlohmann::json::parse(in);
  auto cell = [](const nlohmann::json& v) {
    if (v.is_null()) return std::string("   n/a");
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%6.4f", v.get<double>());
    return std::string(buf);
  };
  std::cout << "dataset           model                 interval   fnr      fpr\n";
  for (const auto& row : doc.at("rows")) {
    std::printf("%-17s %-21s %-10s %s   %s\n", row.at("dataset").get<std::string>().c_str(),
                row.at("model").get<std::string>().c_str(),
                row.at("interval").get<std::string>().c_str(), cell(row.at("fnr")).c_str(),
                cell(row.at("fpr")).c_str());
  }
  std::cout << "\npublished comparison values\n";
  std::cout << "dataset           model                            fnr      fpr\n";
  for (const auto& ref : ms::kReferenceRows)
    std::printf("%-17s %-30s %6.4f   %6.4f\n", ref.dataset, ref.model, ref.fnr, ref.fpr);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial testbed for shift-controlled traffic mimicry against online filters"};
  app.require_subcommand(1);

  CommonArgs synth_args, train_args, attack_args, filter_args, eval_args, run_args;
  std::size_t synth_count = 0, attack_count = 500;
  std::string attack_model_dir, filter_traffic, filter_model = "N-over-D", eval_decisions,
              report_run_dir;
  int attack_profile = 0;

  auto* synth = app.add_subcommand("synth", "synthesize a normal-traffic CSV");
  add_common(synth, synth_args);
  synth->add_option("--count", synth_count, "number of requests (default from config)");

  auto* train = app.add_subcommand("train-attacker", "train mimic/generator/discriminator");
  add_common(train, train_args);

  auto* attack = app.add_subcommand("attack", "generate an attack-traffic CSV from checkpoints");
  add_common(attack, attack_args);
  attack->add_option("--model", attack_model_dir, "checkpoint directory from train-attacker");
  attack->add_option("--count", attack_count, "number of attack requests");
  attack->add_option("--profile", attack_profile, "shift-profile index");

  auto* filter = app.add_subcommand("filter", "run an online filter over a traffic CSV");
  add_common(filter, filter_args);
  filter->add_option("--traffic", filter_traffic, "labeled traffic CSV to filter");
  filter->add_option("--model", filter_model, "N, N-over-D, or Iterative");

  auto* eval = app.add_subcommand("eval", "compute metrics and curves from a decision log");
  add_common(eval, eval_args);
  eval->add_option("--decisions", eval_decisions, "decision-log CSV");

  auto* run = app.add_subcommand("run", "full pipeline: synth, train, attack, filter, report");
  add_common(run, run_args);

  auto* report = app.add_subcommand("report", "render a metrics table from a run directory");
  report->add_option("--run", report_run_dir, "run output directory");

  std::string active = "?";
  try {
    app.parse(argc, argv);
    if (synth->parsed()) return active = "synth", cmd_synth(synth_args, synth_count);
    if (train->parsed()) return active = "train-attacker", cmd_train_attacker(train_args);
    if (attack->parsed())
      return active = "attack",
             cmd_attack(attack_args, attack_model_dir, attack_count, attack_profile);
    if (filter->parsed())
      return active = "filter", cmd_filter(filter_args, filter_traffic, filter_model);
    if (eval->parsed()) return active = "eval", cmd_eval(eval_args, eval_decisions);
    if (run->parsed()) return active = "run", cmd_run(run_args);
    if (report->parsed()) return active = "report", cmd_report(report_run_dir);
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    nlohmann::json err{{"error", {{"command", "parse"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"command", active}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
