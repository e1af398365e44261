#pragma once

// Minimal TOML-subset configuration: `key = value` pairs, [section] tables,
// scalars (string, integer, float, bool) and possibly-nested arrays.
// Unknown keys are rejected so typos fail loudly.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mimicshift/experiment.hpp"

namespace mimicshift {

struct ConfigValue;
using ConfigArray = std::vector<ConfigValue>;

struct ConfigValue {
  std::variant<std::string, std::int64_t, double, bool, ConfigArray> v;

  double as_number(const std::string& key) const {
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    throw std::runtime_error("config key '" + key + "' must be a number");
  }
  std::int64_t as_int(const std::string& key) const {
    if (auto* i = std::get_if<std::int64_t>(&v)) return *i;
    throw std::runtime_error("config key '" + key + "' must be an integer");
  }
  bool as_bool(const std::string& key) const {
    if (auto* b = std::get_if<bool>(&v)) return *b;
    throw std::runtime_error("config key '" + key + "' must be a boolean");
  }
  const std::string& as_string(const std::string& key) const {
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    throw std::runtime_error("config key '" + key + "' must be a string");
  }
  const ConfigArray& as_array(const std::string& key) const {
    if (auto* a = std::get_if<ConfigArray>(&v)) return *a;
    throw std::runtime_error("config key '" + key + "' must be an array");
  }
};

// keys are flattened as "section.key"
using ConfigTable = std::map<std::string, ConfigValue>;

namespace config_detail {

inline void skip_ws(const std::string& s, std::size_t& i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline ConfigValue parse_value(const std::string& s, std::size_t& i, int line);

inline ConfigValue parse_scalar(const std::string& s, std::size_t& i, int line) {
  skip_ws(s, i);
  if (i >= s.size()) throw std::runtime_error("config line " + std::to_string(line) + ": missing value");
  if (s[i] == '"') {
    std::string out;
    ++i;
    while (i < s.size() && s[i] != '"') {
      if (s[i] == '\\' && i + 1 < s.size()) ++i;
      out += s[i++];
    }
    if (i >= s.size())
      throw std::runtime_error("config line " + std::to_string(line) + ": unterminated string");
    ++i;
    return {out};
  }
  std::size_t start = i;
  while (i < s.size() && s[i] != ',' && s[i] != ']' && s[i] != '#') ++i;
  std::string tok = s.substr(start, i - start);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
  if (tok == "true") return {true};
  if (tok == "false") return {false};
  if (tok.empty())
    throw std::runtime_error("config line " + std::to_string(line) + ": empty value");
  const bool is_float = tok.find_first_of(".eE") != std::string::npos &&
                        tok.find_first_not_of("+-0123456789.eE") == std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      double d = std::stod(tok, &used);
      if (used == tok.size()) return {d};
    } else {
      std::int64_t n = std::stoll(tok, &used);
      if (used == tok.size()) return {n};
    }
  } catch (...) {
  }
  throw std::runtime_error("config line " + std::to_string(line) + ": cannot parse value '" + tok +
                           "'");
}

inline ConfigValue parse_value(const std::string& s, std::size_t& i, int line) {
  skip_ws(s, i);
  if (i < s.size() && s[i] == '[') {
    ++i;
    ConfigArray arr;
    skip_ws(s, i);
    while (i < s.size() && s[i] != ']') {
      arr.push_back(parse_value(s, i, line));
      skip_ws(s, i);
      if (i < s.size() && s[i] == ',') {
        ++i;
        skip_ws(s, i);
      }
    }
    if (i >= s.size())
      throw std::runtime_error("config line " + std::to_string(line) + ": unterminated array");
    ++i;  // ']'
    return {arr};
  }
  return parse_scalar(s, i, line);
}

}  // namespace config_detail

inline ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  std::string pending;  // continuation buffer for multi-line arrays
  int pending_line = 0;
  auto bracket_balance = [](const std::string& s) {
    int depth = 0;
    bool in_str = false;
    for (char c : s) {
      if (c == '"') in_str = !in_str;
      if (in_str) continue;
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == '#') break;
    }
    return depth;
  };
  auto handle = [&](const std::string& raw, int at_line) {
    std::size_t i = 0;
    config_detail::skip_ws(raw, i);
    if (i >= raw.size() || raw[i] == '#') return;
    if (raw[i] == '[' && raw.find('=') == std::string::npos) {
      std::size_t close = raw.find(']', i);
      if (close == std::string::npos)
        throw std::runtime_error("config line " + std::to_string(at_line) + ": bad section header");
      section = raw.substr(i + 1, close - i - 1);
      return;
    }
    std::size_t eq = raw.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(at_line) + ": expected key = value");
    std::string key = raw.substr(i, eq - i);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(at_line) + ": empty key");
    std::size_t vi = eq + 1;
    ConfigValue val = config_detail::parse_value(raw, vi, at_line);
    config_detail::skip_ws(raw, vi);
    if (vi < raw.size() && raw[vi] != '#')
      throw std::runtime_error("config line " + std::to_string(at_line) +
                               ": trailing characters after value");
    std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full))
      throw std::runtime_error("config line " + std::to_string(at_line) + ": duplicate key '" +
                               full + "'");
    table[full] = std::move(val);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (pending.empty()) {
      if (bracket_balance(line) > 0 && line.find('=') != std::string::npos) {
        pending = line;
        pending_line = lineno;
        continue;
      }
      handle(line, lineno);
    } else {
      // strip comments inside a continued array
      std::size_t h = line.find('#');
      pending += ' ' + (h == std::string::npos ? line : line.substr(0, h));
      if (bracket_balance(pending) <= 0) {
        handle(pending, pending_line);
        pending.clear();
      }
    }
  }
  if (!pending.empty())
    throw std::runtime_error("config line " + std::to_string(pending_line) +
                             ": unterminated array");
  return table;
}

inline ConfigTable parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// presets and application onto ExperimentConfig

inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;  // defaults carry the published hyperparameters:
  // omega=3, batch=128, seq_len=16, lr 0.01 / 0.0002, alpha=0.8, rate=0.8
  if (name == "paper-defaults") {
    // training-iteration counts are sized for a desk-scale run, not published
    cfg.train.mimic_iters = 200;
    cfg.train.gan_iters = 150;
    return cfg;
  }
  if (name == "caida-skew") {
    cfg.synth_spec = caida_skew_spec();
    cfg.dataset_name = "caida-skew";
    cfg.train.mimic_iters = 200;
    cfg.train.gan_iters = 150;
    return cfg;
  }
  throw std::runtime_error("unknown preset '" + name + "' (expected paper-defaults or caida-skew)");
}

namespace config_detail {

inline MarkovParams parse_profile(const ConfigValue& v, const std::string& key) {
  const ConfigArray& outer = v.as_array(key);
  if (outer.size() != 3)
    throw std::runtime_error("config key '" + key + "' must be [name, pi, transition-rows]");
  MarkovParams p;
  p.name = outer[0].as_string(key);
  for (const ConfigValue& x : outer[1].as_array(key)) p.pi.push_back(x.as_number(key));
  for (const ConfigValue& row : outer[2].as_array(key)) {
    std::vector<double> r;
    for (const ConfigValue& x : row.as_array(key)) r.push_back(x.as_number(key));
    p.trans.push_back(std::move(r));
  }
  validate_params(p);
  return p;
}

}  // namespace config_detail

inline void apply_config(ExperimentConfig& cfg, const ConfigTable& table) {
  std::vector<MarkovParams> profiles;
  std::vector<SynthEntry> synth_entries;
  for (const auto& [key, val] : table) {
    if (key == "preset") continue;  // handled by the caller
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(val.as_int(key));
    else if (key == "out_dir") cfg.out_dir = val.as_string(key);
    else if (key == "dataset_name") cfg.dataset_name = val.as_string(key);
    else if (key == "corpus.use_csv") cfg.use_csv = val.as_bool(key);
    else if (key == "corpus.csv_path") cfg.csv_path = val.as_string(key);
    else if (key == "corpus.n_normal_requests")
      cfg.n_normal_requests = static_cast<std::size_t>(val.as_int(key));
    else if (key == "corpus.n_mix_requests")
      cfg.n_mix_requests = static_cast<std::size_t>(val.as_int(key));
    else if (key == "corpus.feature_name") cfg.feature_name = val.as_string(key);
    else if (key == "corpus.k") cfg.k = static_cast<int>(val.as_int(key));
    else if (key == "corpus.stickiness") cfg.synth_spec.stickiness = val.as_number(key);
    else if (key == "corpus.synth_values" || key == "corpus.synth_protocols" ||
             key == "corpus.synth_probs") {
      // gathered below as parallel arrays
    } else if (key == "attacker.shifting") cfg.shifting = val.as_bool(key);
    else if (key == "attacker.cycle_profiles") cfg.cycle_profiles = val.as_bool(key);
    else if (key == "attacker.static_profile_index")
      cfg.static_profile_index = static_cast<int>(val.as_int(key));
    else if (key == "attacker.omega") cfg.train.omega = static_cast<int>(val.as_int(key));
    else if (key == "attacker.batch") cfg.train.batch = static_cast<int>(val.as_int(key));
    else if (key == "attacker.seq_len") cfg.train.seq_len = static_cast<int>(val.as_int(key));
    else if (key == "attacker.lr_mimic") cfg.train.lr_mimic = val.as_number(key);
    else if (key == "attacker.lr_gan") cfg.train.lr_gan = val.as_number(key);
    else if (key == "attacker.mimic_hidden")
      cfg.train.mimic_hidden = static_cast<int>(val.as_int(key));
    else if (key == "attacker.gen_hidden") cfg.train.gen_hidden = static_cast<int>(val.as_int(key));
    else if (key == "attacker.disc_hidden")
      cfg.train.disc_hidden = static_cast<int>(val.as_int(key));
    else if (key == "attacker.noise_dim") cfg.train.noise_dim = static_cast<int>(val.as_int(key));
    else if (key == "attacker.mimic_iters")
      cfg.train.mimic_iters = static_cast<int>(val.as_int(key));
    else if (key == "attacker.gan_iters") cfg.train.gan_iters = static_cast<int>(val.as_int(key));
    else if (key == "attacker.n_walks") cfg.n_walks = static_cast<std::size_t>(val.as_int(key));
    else if (key == "attacker.walk_p") cfg.walk_p = val.as_number(key);
    else if (key == "attacker.walk_q") cfg.walk_q = val.as_number(key);
    else if (key.rfind("attacker.profile", 0) == 0)
      profiles.push_back(config_detail::parse_profile(val, key));
    else if (key == "filter.hidden") cfg.filter.hidden = static_cast<int>(val.as_int(key));
    else if (key == "filter.lr") cfg.filter.lr = val.as_number(key);
    else if (key == "filter.batch") cfg.filter.batch = static_cast<int>(val.as_int(key));
    else if (key == "filter.normal_iters")
      cfg.filter.normal_iters = static_cast<int>(val.as_int(key));
    else if (key == "filter.interval_epochs")
      cfg.filter.interval_epochs = static_cast<int>(val.as_int(key));
    else if (key == "filter.alpha") cfg.filter.alpha = val.as_number(key);
    else if (key == "filter.rejection_rate") cfg.filter.rejection_rate = val.as_number(key);
    else if (key == "filter.replay_per_interval")
      cfg.filter.replay_per_interval = static_cast<int>(val.as_int(key));
    else if (key == "filter.score_after_update")
      cfg.filter.score_after_update = val.as_bool(key);
    else if (key == "filter.models") {
      cfg.filters.clear();
      for (const ConfigValue& m : val.as_array(key)) {
        const std::string& s = m.as_string(key);
        if (s == "N") cfg.filters.push_back(FilterKind::n_only);
        else if (s == "N-over-D") cfg.filters.push_back(FilterKind::n_over_d);
        else if (s == "Iterative") cfg.filters.push_back(FilterKind::iterative);
        else if (s == "Enhanced N-over-D") cfg.filters.push_back(FilterKind::enhanced_n_over_d);
        else if (s == "Enhanced Iterative") cfg.filters.push_back(FilterKind::enhanced_iterative);
        else throw std::runtime_error("config: unknown filter model '" + s + "'");
      }
    } else if (key == "schedule.mode") {
      const std::string& s = val.as_string(key);
      if (s == "fixed") cfg.schedule_mode = ScheduleMode::fixed;
      else if (s == "offline") cfg.schedule_mode = ScheduleMode::offline;
      else if (s == "randomized") cfg.schedule_mode = ScheduleMode::randomized;
      else throw std::runtime_error("config: unknown schedule mode '" + s + "'");
    } else if (key == "schedule.fixed_interval_len")
      cfg.fixed_interval_len = static_cast<int>(val.as_int(key));
    else if (key == "schedule.attack_minutes")
      cfg.attack_minutes = static_cast<int>(val.as_int(key));
    else if (key == "schedule.requests_per_minute")
      cfg.requests_per_minute = static_cast<int>(val.as_int(key));
    else if (key == "schedule.attack_fraction") cfg.attack_fraction = val.as_number(key);
    else
      throw std::runtime_error("config: unknown key '" + key + "'");
  }
  // custom synthesis marginal, given as parallel arrays
  auto vit = table.find("corpus.synth_values");
  if (vit != table.end()) {
    auto pit = table.find("corpus.synth_probs");
    auto prit = table.find("corpus.synth_protocols");
    if (pit == table.end())
      throw std::runtime_error("config: corpus.synth_values requires corpus.synth_probs");
    const ConfigArray& vals = vit->second.as_array("corpus.synth_values");
    const ConfigArray& probs = pit->second.as_array("corpus.synth_probs");
    if (vals.size() != probs.size())
      throw std::runtime_error("config: synth_values and synth_probs lengths differ");
    cfg.synth_spec.entries.clear();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      SynthEntry e;
      e.value = static_cast<int>(vals[i].as_int("corpus.synth_values"));
      e.prob = probs[i].as_number("corpus.synth_probs");
      e.protocol = prit == table.end()
                       ? "tcp"
                       : prit->second.as_array("corpus.synth_protocols")[i].as_string(
                             "corpus.synth_protocols");
      cfg.synth_spec.entries.push_back(std::move(e));
    }
    validate_spec(cfg.synth_spec);
  }
  if (!profiles.empty()) cfg.profiles.profiles = std::move(profiles);
}

// Resolve `--config`: a known preset name, or a path to a config file whose
// optional `preset = "..."` key selects the baseline it overrides.
inline ExperimentConfig load_experiment_config(const std::string& config_arg) {
  if (config_arg == "paper-defaults" || config_arg == "caida-skew")
    return preset_config(config_arg);
  ConfigTable table = parse_config_file(config_arg);
  std::string base = "paper-defaults";
  if (auto it = table.find("preset"); it != table.end()) base = it->second.as_string("preset");
  ExperimentConfig cfg = preset_config(base);
  apply_config(cfg, table);
  return cfg;
}

}  // namespace mimicshift
