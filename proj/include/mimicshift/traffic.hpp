#pragma once

// Traffic representation: request token sequences, corpus ingestion and
// synthesis, feature-class grouping, and the adjacency/walk view the
// generative models train on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimicshift/rng.hpp"

namespace mimicshift {

inline constexpr std::size_t kMaxRequestLen = 16;

struct SubRequest {
  int token_id = -1;
  double feature_value = 0.0;
  int class_id = -1;
};

enum class Label { normal, attack };

inline std::string label_name(Label l) { return l == Label::normal ? "normal" : "attack"; }

struct Request {
  std::vector<SubRequest> subs;
  std::string source_id;
  Label label = Label::normal;
  int interval_index = -1;  // -1 = unassigned
};

// token = (feature class bucket, protocol tag); repr_value is the raw feature
// value used when the token is rendered back into a request record
struct TokenDescriptor {
  int class_id = -1;
  std::string protocol;
  double repr_value = 0.0;
};

struct FeatureClassMap {
  std::vector<double> top_values;  // dedicated classes 0..K-2, in rank order
  int k = 0;                       // class K-1 is the catch-all

  int class_of(double value) const {
    for (std::size_t i = 0; i < top_values.size(); ++i)
      if (value == top_values[i]) return static_cast<int>(i);
    return k - 1;
  }
};

struct RequestCorpus {
  std::vector<Request> requests;
  std::vector<TokenDescriptor> vocab;
  std::string feature_name;
  FeatureClassMap class_map;

  std::size_t vocab_size() const { return vocab.size(); }
  std::size_t num_classes() const { return static_cast<std::size_t>(class_map.k); }

  std::size_t total_subs() const {
    std::size_t n = 0;
    for (const auto& r : requests) n += r.subs.size();
    return n;
  }
};

struct AdjacencyMatrix {
  std::size_t n = 0;
  std::vector<std::uint8_t> entries;  // row-major n*n, {0,1}

  std::uint8_t at(std::size_t u, std::size_t v) const { return entries[u * n + v]; }
  void set(std::size_t u, std::size_t v, std::uint8_t x) { entries[u * n + v] = x; }
  std::size_t degree(std::size_t u) const {
    std::size_t d = 0;
    for (std::size_t v = 0; v < n; ++v) d += at(u, v);
    return d;
  }
};

struct WalkSet {
  std::vector<std::vector<int>> walks;
  double p = 1.0;
  double q = 1.0;
};

// ---------------------------------------------------------------------------
// raw records, shared by CSV ingestion and synthesis

struct RawRecord {
  double timestamp = 0.0;
  std::string source;
  std::string destination;
  double feature_value = 0.0;
  std::string protocol;
  Label label = Label::normal;
};

inline FeatureClassMap group_values(const std::vector<double>& values, int k) {
  if (k < 2) throw std::invalid_argument("group_feature_classes: K must be >= 2");
  std::map<double, std::size_t> counts;
  for (double v : values) counts[v]++;
  if (counts.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("group_feature_classes: only " + std::to_string(counts.size()) +
                                " distinct values, need at least " + std::to_string(k));
  std::vector<std::pair<double, std::size_t>> ranked(counts.begin(), counts.end());
  // by frequency desc, ties toward the smaller raw value
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  FeatureClassMap cm;
  cm.k = k;
  for (int i = 0; i < k - 1; ++i) cm.top_values.push_back(ranked[i].first);
  return cm;
}

// Assigns classes and tokens, groups rows by (source, destination) in arrival
// order, and chunks to requests of length <= kMaxRequestLen.
inline RequestCorpus build_corpus_from_records(const std::vector<RawRecord>& records,
                                               const std::string& feature_name, int k) {
  if (records.empty()) throw std::runtime_error("corpus build: no records (empty input)");
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) values.push_back(r.feature_value);
  RequestCorpus corpus;
  corpus.feature_name = feature_name;
  corpus.class_map = group_values(values, k);

  std::map<std::pair<int, std::string>, int> token_ids;
  auto token_of = [&](int class_id, const std::string& proto, double value) {
    auto key = std::make_pair(class_id, proto);
    auto it = token_ids.find(key);
    if (it != token_ids.end()) return it->second;
    const int id = static_cast<int>(corpus.vocab.size());
    token_ids.emplace(key, id);
    corpus.vocab.push_back({class_id, proto, value});
    return id;
  };

  // open request per flow; chunk at kMaxRequestLen
  std::map<std::pair<std::string, std::string>, std::size_t> open;  // flow -> index in requests
  for (const auto& rec : records) {
    const int cls = corpus.class_map.class_of(rec.feature_value);
    SubRequest sub{token_of(cls, rec.protocol, rec.feature_value), rec.feature_value, cls};
    auto flow = std::make_pair(rec.source, rec.destination);
    auto it = open.find(flow);
    if (it == open.end() || corpus.requests[it->second].subs.size() >= kMaxRequestLen) {
      Request r;
      r.source_id = rec.source;
      r.label = rec.label;
      corpus.requests.push_back(std::move(r));
      open[flow] = corpus.requests.size() - 1;
      it = open.find(flow);
    }
    corpus.requests[it->second].subs.push_back(sub);
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string source = "source";
  std::string destination = "destination";
  std::string feature;  // set from feature_name by default
  std::string protocol = "protocol";
  std::string label = "label";
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_double(const std::string& s, std::size_t line_no, const std::string& col) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad numeric value '" + s +
                             "' in column " + col);
  }
}

}  // namespace detail

inline RequestCorpus ingest_csv(const std::string& path, const std::string& feature_name,
                                CsvSchema schema = {}, int k = 3) {
  if (schema.feature.empty()) schema.feature = feature_name;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("ingest_csv: empty file " + path);
  auto cols = detail::split_csv_line(header);
  auto col_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return i;
    throw std::runtime_error("ingest_csv: schema column '" + name + "' not found in header");
  };
  const std::size_t i_ts = col_index(schema.timestamp);
  const std::size_t i_src = col_index(schema.source);
  const std::size_t i_dst = col_index(schema.destination);
  const std::size_t i_feat = col_index(schema.feature);
  const std::size_t i_proto = col_index(schema.protocol);
  const std::size_t i_label = col_index(schema.label);

  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != cols.size())
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(cols.size()) + " fields, got " +
                               std::to_string(fields.size()));
    RawRecord rec;
    rec.timestamp = detail::parse_double(fields[i_ts], line_no, schema.timestamp);
    rec.source = fields[i_src];
    rec.destination = fields[i_dst];
    rec.feature_value = detail::parse_double(fields[i_feat], line_no, schema.feature);
    rec.protocol = fields[i_proto];
    if (fields[i_label] == "normal")
      rec.label = Label::normal;
    else if (fields[i_label] == "attack")
      rec.label = Label::attack;
    else
      throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad label '" +
                               fields[i_label] + "'");
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw std::runtime_error("ingest_csv: no data rows in " + path);
  return build_corpus_from_records(records, feature_name, k);
}

inline void write_corpus_csv(const RequestCorpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_corpus_csv: cannot open " + path + " for writing");
  out << "timestamp,source,destination,request_len,ip_flags,tcp_len,tcp_flags,tcp_window,"
         "protocol,label\n";
  double ts = 0.0;
  for (const auto& r : corpus.requests) {
    for (const auto& s : r.subs) {
      const long len = static_cast<long>(s.feature_value);
      out << ts << ',' << r.source_id << ",192.168.0.1," << len << ",0x00004000," << (len > 40 ? len - 40 : 0)
          << ",0x00000010,8192," << corpus.vocab[s.token_id].protocol << ',' << label_name(r.label)
          << '\n';
      ts += 0.001;
    }
  }
  if (!out) throw std::runtime_error("write_corpus_csv: write failed for " + path);
}

// ---------------------------------------------------------------------------
// synthesis

struct SynthEntry {
  double value = 0.0;
  std::string protocol = "tcp";
  double prob = 0.0;
};

struct SynthSpec {
  std::vector<SynthEntry> entries;
  double stickiness = 0.5;  // chance the next sub-request repeats the previous entry
  std::size_t request_len = kMaxRequestLen;
  Label label = Label::normal;
};

inline void validate_spec(const SynthSpec& spec) {
  if (spec.entries.empty()) throw std::invalid_argument("synth spec: no entries");
  double total = 0.0;
  for (const auto& e : spec.entries) {
    if (e.prob < 0.0) throw std::invalid_argument("synth spec: negative probability");
    total += e.prob;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "synth spec: probabilities sum to " << total;
    throw std::invalid_argument(os.str());
  }
  if (spec.stickiness < 0.0 || spec.stickiness >= 1.0)
    throw std::invalid_argument("synth spec: stickiness must be in [0, 1)");
}

// Request-length skew mirroring the dominant-value structure of normal
// traffic: three dedicated top values plus a spread tail.
inline SynthSpec caida_skew_spec() {
  SynthSpec s;
  s.entries = {
      {60, "tcp", 0.81}, {52, "tcp", 0.06},   {1500, "tcp", 0.042},
      {66, "udp", 0.04}, {1514, "udp", 0.03}, {590, "icmp", 0.018},
  };
  return s;
}

inline RequestCorpus synth_corpus(const SynthSpec& spec, std::size_t n_requests,
                                  std::uint64_t seed, const std::string& feature_name = "request_len",
                                  int k = 3) {
  validate_spec(spec);
  Rng rng(seed);
  std::vector<double> probs;
  for (const auto& e : spec.entries) probs.push_back(e.prob);
  std::vector<RawRecord> records;
  records.reserve(n_requests * spec.request_len);
  double ts = 0.0;
  for (std::size_t i = 0; i < n_requests; ++i) {
    std::ostringstream src;
    src << "10.0." << (i / 250) % 256 << '.' << i % 250 + 1;
    std::size_t prev = 0;
    for (std::size_t l = 0; l < spec.request_len; ++l) {
      std::size_t pick;
      if (l > 0 && rng.uniform() < spec.stickiness)
        pick = prev;  // sticky repeat keeps the marginal while adding sequence structure
      else
        pick = rng.categorical(probs);
      prev = pick;
      RawRecord rec;
      rec.timestamp = ts;
      rec.source = src.str();
      rec.destination = "192.168.0.1";
      rec.feature_value = spec.entries[pick].value;
      rec.protocol = spec.entries[pick].protocol;
      rec.label = spec.label;
      records.push_back(std::move(rec));
      ts += 0.001;
    }
  }
  return build_corpus_from_records(records, feature_name, k);
}

inline RequestCorpus synth_normal_corpus(const SynthSpec& spec, std::size_t n_requests,
                                         std::uint64_t seed) {
  return synth_corpus(spec, n_requests, seed);
}

// ---------------------------------------------------------------------------
// class grouping over an existing corpus

inline FeatureClassMap group_feature_classes(RequestCorpus& corpus, int k) {
  if (corpus.requests.empty()) throw std::invalid_argument("group_feature_classes: empty corpus");
  std::vector<double> values;
  for (const auto& r : corpus.requests)
    for (const auto& s : r.subs) values.push_back(s.feature_value);
  FeatureClassMap cm = group_values(values, k);
  corpus.class_map = cm;
  for (auto& r : corpus.requests)
    for (auto& s : r.subs) s.class_id = cm.class_of(s.feature_value);
  return cm;
}

// ---------------------------------------------------------------------------
// adjacency + walks

inline AdjacencyMatrix build_adjacency(const RequestCorpus& corpus) {
  const std::size_t n = corpus.vocab_size();
  if (n < 2) throw std::invalid_argument("build_adjacency: vocabulary size must be >= 2");
  AdjacencyMatrix adj;
  adj.n = n;
  adj.entries.assign(n * n, 0);
  for (const auto& r : corpus.requests)
    for (std::size_t l = 0; l + 1 < r.subs.size(); ++l) {
      adj.set(r.subs[l].token_id, r.subs[l + 1].token_id, 1);
      adj.set(r.subs[l + 1].token_id, r.subs[l].token_id, 1);
    }
  return adj;
}

// Symmetrized bigram counts of the corpus; used to bias walks toward the
// transitions that actually dominate the observed traffic.
struct EdgeWeights {
  std::size_t n = 0;
  std::vector<double> w;  // row-major n*n

  double at(std::size_t u, std::size_t v) const { return w[u * n + v]; }
};

inline EdgeWeights build_edge_weights(const RequestCorpus& corpus) {
  const std::size_t n = corpus.vocab_size();
  if (n < 2) throw std::invalid_argument("build_edge_weights: vocabulary size must be >= 2");
  EdgeWeights ew;
  ew.n = n;
  ew.w.assign(n * n, 0.0);
  for (const auto& r : corpus.requests)
    for (std::size_t l = 0; l + 1 < r.subs.size(); ++l) {
      ew.w[r.subs[l].token_id * n + r.subs[l + 1].token_id] += 1.0;
      ew.w[r.subs[l + 1].token_id * n + r.subs[l].token_id] += 1.0;
    }
  return ew;
}

// Biased second-order walk: returning to the previous node weighs 1/p,
// neighbors of the previous node weigh 1, everything else 1/q. When edge
// weights are supplied each neighbor weight is further multiplied by the
// observed bigram count, so walk statistics track the real traffic instead
// of exploring the support uniformly.
inline WalkSet sample_walks(const AdjacencyMatrix& adj, std::size_t walk_len, std::size_t count,
                            double p, double q, std::uint64_t seed,
                            const EdgeWeights* ew = nullptr) {
  if (walk_len < 2) throw std::invalid_argument("sample_walks: T must be >= 2");
  if (p <= 0.0 || q <= 0.0) throw std::invalid_argument("sample_walks: p and q must be positive");
  std::vector<std::vector<int>> neighbors(adj.n);
  std::vector<int> nonisolated;
  for (std::size_t u = 0; u < adj.n; ++u) {
    for (std::size_t v = 0; v < adj.n; ++v)
      if (adj.at(u, v)) neighbors[u].push_back(static_cast<int>(v));
    if (!neighbors[u].empty()) nonisolated.push_back(static_cast<int>(u));
  }
  if (nonisolated.empty()) throw std::invalid_argument("sample_walks: graph has no edges");
  if (ew && ew->n != adj.n)
    throw std::invalid_argument("sample_walks: edge weight dimension mismatch");
  const auto edge_w = [&](std::size_t u, std::size_t v) {
    if (!ew) return 1.0;
    // observed edges keep at least a small weight so the walk never stalls
    return std::max(ew->at(u, v), 1e-3);
  };

  Rng rng(seed);
  WalkSet ws;
  ws.p = p;
  ws.q = q;
  ws.walks.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    std::vector<int> walk;
    walk.reserve(walk_len);
    int start;
    if (ew) {
      // start at a node proportionally to its total observed traffic
      std::vector<double> strength(nonisolated.size());
      for (std::size_t i = 0; i < nonisolated.size(); ++i) {
        double s = 0.0;
        for (int v : neighbors[nonisolated[i]]) s += edge_w(nonisolated[i], v);
        strength[i] = s;
      }
      start = nonisolated[rng.categorical(strength)];
    } else {
      start = nonisolated[rng.uniform_int(nonisolated.size())];
    }
    walk.push_back(start);
    int cur = start;
    std::vector<double> first_w(neighbors[cur].size());
    for (std::size_t i = 0; i < neighbors[cur].size(); ++i)
      first_w[i] = edge_w(cur, neighbors[cur][i]);
    int first = neighbors[cur][rng.categorical(first_w)];
    walk.push_back(first);
    int prev = cur;
    cur = first;
    while (walk.size() < walk_len) {
      const auto& nbrs = neighbors[cur];
      std::vector<double> weights(nbrs.size());
      for (std::size_t i = 0; i < nbrs.size(); ++i) {
        double bias;
        if (nbrs[i] == prev)
          bias = 1.0 / p;
        else if (adj.at(nbrs[i], prev))
          bias = 1.0;
        else
          bias = 1.0 / q;
        weights[i] = bias * edge_w(cur, nbrs[i]);
      }
      int next = nbrs[rng.categorical(weights)];
      walk.push_back(next);
      prev = cur;
      cur = next;
    }
    ws.walks.push_back(std::move(walk));
  }
  return ws;
}

// class sequence of a token walk, via the vocabulary
inline std::vector<int> walk_classes(const RequestCorpus& corpus, const std::vector<int>& walk) {
  std::vector<int> cls;
  cls.reserve(walk.size());
  for (int t : walk) cls.push_back(corpus.vocab[t].class_id);
  return cls;
}

// Rebuilds full request records from generated token sequences using the
// vocabulary descriptors.
inline Request request_from_tokens(const RequestCorpus& corpus, const std::vector<int>& tokens,
                                   Label label, const std::string& source_id,
                                   int interval_index = -1) {
  Request r;
  r.source_id = source_id;
  r.label = label;
  r.interval_index = interval_index;
  for (int t : tokens) {
    const auto& d = corpus.vocab[static_cast<std::size_t>(t)];
    r.subs.push_back({t, d.repr_value, d.class_id});
  }
  return r;
}

}  // namespace mimicshift
