#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mimicshift/traffic.hpp"

using namespace mimicshift;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::vector<RawRecord> make_records(const std::vector<double>& values,
                                    const std::string& source = "a", const std::string& dest = "b") {
  std::vector<RawRecord> out;
  double ts = 0.0;
  for (double v : values) {
    RawRecord r;
    r.timestamp = ts++;
    r.source = source;
    r.destination = dest;
    r.feature_value = v;
    r.protocol = "tcp";
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("group_values keeps the K-1 most frequent values") {
  std::vector<double> vals;
  for (int i = 0; i < 8; ++i) vals.push_back(60);
  for (int i = 0; i < 5; ++i) vals.push_back(52);
  for (int i = 0; i < 3; ++i) vals.push_back(1500);
  vals.push_back(7);
  auto cm = group_values(vals, 3);
  REQUIRE(cm.top_values == std::vector<double>{60, 52});
  REQUIRE(cm.class_of(60) == 0);
  REQUIRE(cm.class_of(52) == 1);
  REQUIRE(cm.class_of(1500) == 2);  // everything else falls into the tail class
  REQUIRE(cm.class_of(7) == 2);
}

TEST_CASE("group_values breaks frequency ties toward the smaller raw value") {
  auto cm = group_values({5, 5, 3, 3, 1}, 2);
  REQUIRE(cm.top_values == std::vector<double>{3});
}

TEST_CASE("group_values validates K against the distinct-value count") {
  REQUIRE_THROWS_AS(group_values({1, 1, 2}, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(group_values({1, 2, 3}, 1), std::invalid_argument);
}

TEST_CASE("corpus building chunks flows at the maximum request length") {
  auto records = make_records(std::vector<double>(40, 60));
  records[1].feature_value = 52;
  records[2].feature_value = 7;
  auto corpus = build_corpus_from_records(records, "request_len", 3);
  REQUIRE(corpus.requests.size() == 3);  // 16 + 16 + 8
  REQUIRE(corpus.requests[0].subs.size() == kMaxRequestLen);
  REQUIRE(corpus.requests[1].subs.size() == kMaxRequestLen);
  REQUIRE(corpus.requests[2].subs.size() == 8);
}

TEST_CASE("token ids follow first appearance and encode (class, protocol)") {
  std::vector<RawRecord> records = make_records({60, 52, 60, 7});
  records[2].protocol = "udp";
  auto corpus = build_corpus_from_records(records, "request_len", 3);
  // tokens: (class0,tcp)=0, (class1,tcp)=1, (class0,udp)=2, (class2,tcp)=3
  REQUIRE(corpus.vocab.size() == 4);
  const auto& subs = corpus.requests[0].subs;
  REQUIRE(subs[0].token_id == 0);
  REQUIRE(subs[1].token_id == 1);
  REQUIRE(subs[2].token_id == 2);
  REQUIRE(subs[3].token_id == 3);
  REQUIRE(corpus.vocab[2].protocol == "udp");
  REQUIRE(corpus.vocab[2].class_id == 0);
}

TEST_CASE("separate flows become separate requests") {
  auto a = make_records({60, 60, 52}, "a", "dst");
  auto b = make_records({7, 7}, "b", "dst");
  std::vector<RawRecord> all = a;
  all.insert(all.end(), b.begin(), b.end());
  auto corpus = build_corpus_from_records(all, "request_len", 3);
  REQUIRE(corpus.requests.size() == 2);
  REQUIRE(corpus.requests[0].source_id == "a");
  REQUIRE(corpus.requests[1].source_id == "b");
}

TEST_CASE("csv ingestion reports schema and row errors with positions") {
  const std::string path = temp_path("ms_traffic_bad.csv");
  {
    std::ofstream out(path);
    out << "timestamp,source,destination,request_len,ip_flags,tcp_len,tcp_flags,tcp_window,"
           "protocol,label\n";
    out << "0.0,a,b,60,0,20,0,8192,tcp,normal\n";
    out << "0.1,a,b,not-a-number,0,20,0,8192,tcp,normal\n";
  }
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("line 3") &&
                          Catch::Matchers::ContainsSubstring("request_len"));

  {
    std::ofstream out(path);
    out << "timestamp,source,destination,length,protocol,label\n";
    out << "0.0,a,b,60,tcp,normal\n";
  }
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("request_len"));

  {
    std::ofstream out(path);
    out << "timestamp,source,destination,request_len,ip_flags,tcp_len,tcp_flags,tcp_window,"
           "protocol,label\n";
  }
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("no data rows"));

  { std::ofstream out(path); }
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("empty file"));
  std::remove(path.c_str());
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("cannot open"));
}

TEST_CASE("csv ingestion rejects bad labels naming the line") {
  const std::string path = temp_path("ms_traffic_label.csv");
  {
    std::ofstream out(path);
    out << "timestamp,source,destination,request_len,ip_flags,tcp_len,tcp_flags,tcp_window,"
           "protocol,label\n";
    out << "0.0,a,b,60,0,20,0,8192,tcp,benign\n";
  }
  REQUIRE_THROWS_WITH(ingest_csv(path, "request_len"),
                      Catch::Matchers::ContainsSubstring("line 2") &&
                          Catch::Matchers::ContainsSubstring("benign"));
  std::remove(path.c_str());
}

TEST_CASE("corpus CSV round-trips through ingestion") {
  auto corpus = synth_corpus(caida_skew_spec(), 40, 123);
  const std::string path = temp_path("ms_traffic_rt.csv");
  write_corpus_csv(corpus, path);
  auto back = ingest_csv(path, "request_len");
  REQUIRE(back.requests.size() == corpus.requests.size());
  REQUIRE(back.vocab.size() == corpus.vocab.size());
  for (std::size_t i = 0; i < corpus.requests.size(); ++i) {
    REQUIRE(back.requests[i].label == corpus.requests[i].label);
    REQUIRE(back.requests[i].subs.size() == corpus.requests[i].subs.size());
    for (std::size_t j = 0; j < corpus.requests[i].subs.size(); ++j) {
      REQUIRE(back.requests[i].subs[j].feature_value ==
              corpus.requests[i].subs[j].feature_value);
      REQUIRE(back.requests[i].subs[j].class_id == corpus.requests[i].subs[j].class_id);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("skewed synthesis reproduces the configured marginal") {
  auto spec = caida_skew_spec();
  double total = 0.0;
  for (const auto& e : spec.entries) total += e.prob;
  REQUIRE(total == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(spec.entries[0].prob + spec.entries[1].prob + spec.entries[2].prob ==
          Catch::Approx(0.912).margin(1e-12));

  auto corpus = synth_corpus(spec, 2000, 99);
  std::map<double, double> freq;
  double n = 0;
  for (const auto& r : corpus.requests)
    for (const auto& s : r.subs) {
      freq[s.feature_value] += 1.0;
      n += 1.0;
    }
  REQUIRE(freq[60] / n == Catch::Approx(0.81).margin(0.01));
  REQUIRE((freq[60] + freq[52] + freq[1500]) / n == Catch::Approx(0.912).margin(0.01));
}

TEST_CASE("synthesis is deterministic per seed and validates its spec") {
  auto a = synth_corpus(caida_skew_spec(), 50, 5);
  auto b = synth_corpus(caida_skew_spec(), 50, 5);
  REQUIRE(a.requests.size() == b.requests.size());
  for (std::size_t i = 0; i < a.requests.size(); ++i)
    for (std::size_t j = 0; j < a.requests[i].subs.size(); ++j)
      REQUIRE(a.requests[i].subs[j].token_id == b.requests[i].subs[j].token_id);

  SynthSpec bad;
  bad.entries = {{60, "tcp", 0.5}, {52, "tcp", 0.4}};
  REQUIRE_THROWS_WITH(validate_spec(bad), Catch::Matchers::ContainsSubstring("0.9"));
}

TEST_CASE("adjacency counts consecutive token pairs and is symmetric") {
  auto records = make_records({60, 52, 60, 7});
  auto corpus = build_corpus_from_records(records, "request_len", 3);
  auto adj = build_adjacency(corpus);
  REQUIRE(adj.n == corpus.vocab.size());
  for (std::size_t u = 0; u < adj.n; ++u)
    for (std::size_t v = 0; v < adj.n; ++v) REQUIRE(adj.at(u, v) == adj.at(v, u));
  // token sequence is 0,1,0,2 so edges {0,1} and {0,2} exist, {1,2} does not
  REQUIRE(adj.at(0, 1) == 1);
  REQUIRE(adj.at(0, 2) == 1);
  REQUIRE(adj.at(1, 2) == 0);
}

TEST_CASE("random walks stay on edges and honor length and seed") {
  auto corpus = synth_corpus(caida_skew_spec(), 200, 3);
  auto adj = build_adjacency(corpus);
  auto walks = sample_walks(adj, 16, 50, 1.0, 1.0, 17);
  REQUIRE(walks.walks.size() == 50);
  for (const auto& w : walks.walks) {
    REQUIRE(w.size() == 16);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) REQUIRE(adj.at(w[i], w[i + 1]) == 1);
  }
  auto again = sample_walks(adj, 16, 50, 1.0, 1.0, 17);
  REQUIRE(walks.walks == again.walks);
  auto other = sample_walks(adj, 16, 50, 1.0, 1.0, 18);
  REQUIRE(walks.walks != other.walks);
}

TEST_CASE("large return penalty suppresses immediate backtracking") {
  // triangle 0-1-2: from any node both continuing and backtracking are
  // possible; with p huge the walk should almost never return immediately
  AdjacencyMatrix adj;
  adj.n = 3;
  adj.entries.assign(9, 0);
  adj.set(0, 1, 1);
  adj.set(1, 0, 1);
  adj.set(1, 2, 1);
  adj.set(2, 1, 1);
  adj.set(2, 0, 1);
  adj.set(0, 2, 1);
  auto walks = sample_walks(adj, 32, 40, 1e9, 1.0, 5);
  int backtracks = 0, steps = 0;
  for (const auto& w : walks.walks)
    for (std::size_t i = 2; i < w.size(); ++i) {
      ++steps;
      if (w[i] == w[i - 2]) ++backtracks;
    }
  REQUIRE(static_cast<double>(backtracks) / steps < 0.01);
}

TEST_CASE("walk classes map tokens through the vocabulary") {
  auto records = make_records({60, 52, 7});
  auto corpus = build_corpus_from_records(records, "request_len", 3);
  // equal frequencies tie toward smaller values: 7 -> class 0, 52 -> class 1,
  // 60 -> tail class 2; tokens are numbered by first appearance (60, 52, 7)
  auto classes = walk_classes(corpus, {0, 1, 2});
  REQUIRE(classes == std::vector<int>{2, 1, 0});
}
