#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "mimicshift/markov.hpp"

using namespace mimicshift;

TEST_CASE("validate_params rejects malformed chains") {
  MarkovParams p;
  p.pi = {0.5, 0.5};
  p.trans = {{0.9, 0.1}, {0.4, 0.5}};  // row 1 sums to 0.9
  REQUIRE_THROWS_WITH(validate_params(p), Catch::Matchers::ContainsSubstring("row 1"));

  p.trans = {{0.9, 0.1}, {0.5, 0.5}};
  REQUIRE_NOTHROW(validate_params(p));

  p.pi = {0.7, 0.2};
  REQUIRE_THROWS_AS(validate_params(p), std::invalid_argument);

  p.pi = {0.5, 0.5};
  p.trans = {{1.0, 0.0}};
  REQUIRE_THROWS_AS(validate_params(p), std::invalid_argument);

  MarkovParams neg;
  neg.pi = {1.5, -0.5};
  neg.trans = {{1.0, 0.0}, {0.0, 1.0}};
  REQUIRE_THROWS_AS(validate_params(neg), std::invalid_argument);
}

TEST_CASE("sample_class_sequence is deterministic per seed") {
  MarkovParams p = default_shift_profiles().profiles[0];
  auto a = sample_class_sequence(p, 64, 42);
  auto b = sample_class_sequence(p, 64, 42);
  auto c = sample_class_sequence(p, 64, 43);
  REQUIRE(a == b);
  REQUIRE(a != c);
  for (int v : a) {
    REQUIRE(v >= 0);
    REQUIRE(v < 3);
  }
  REQUIRE_THROWS_AS(sample_class_sequence(p, 0, 1), std::invalid_argument);
}

TEST_CASE("empirical_transition matches a hand-computed oracle") {
  // row 0: 0->0 once, 0->1 once; row 1: 1->2 once; row 2: 2->2 once; row 3 never seen
  std::vector<std::vector<int>> seqs = {{0, 0, 1}, {1, 2, 2}};
  auto et = empirical_transition(seqs, 4);
  REQUIRE(et.matrix[0][0] == Catch::Approx(0.5));
  REQUIRE(et.matrix[0][1] == Catch::Approx(0.5));
  REQUIRE(et.matrix[0][2] == Catch::Approx(0.0));
  REQUIRE(et.matrix[1][2] == Catch::Approx(1.0));
  REQUIRE(et.matrix[2][2] == Catch::Approx(1.0));
  REQUIRE_FALSE(et.row_observed[3]);
  for (int j = 0; j < 4; ++j) REQUIRE(et.matrix[3][j] == Catch::Approx(0.25));
  REQUIRE(et.row_observed[0]);
}

TEST_CASE("stationary distribution matches the analytic two-state solution") {
  // pi0 = 0.9 pi0 + 0.5 pi1  =>  pi = (5/6, 1/6)
  MarkovParams p;
  p.pi = {0.5, 0.5};
  p.trans = {{0.9, 0.1}, {0.5, 0.5}};
  auto st = stationary_distribution(p);
  REQUIRE_FALSE(st.reducible);
  REQUIRE(st.dist[0] == Catch::Approx(5.0 / 6.0).epsilon(1e-9));
  REQUIRE(st.dist[1] == Catch::Approx(1.0 / 6.0).epsilon(1e-9));
}

TEST_CASE("stationary distribution flags the identity chain as reducible") {
  MarkovParams p;
  p.pi = {0.3, 0.7};
  p.trans = {{1.0, 0.0}, {0.0, 1.0}};
  auto st = stationary_distribution(p);
  REQUIRE(st.reducible);
  REQUIRE(st.dist == p.pi);
}

TEST_CASE("stationary distribution is a fixed point of each default profile") {
  for (const auto& p : default_shift_profiles().profiles) {
    auto st = stationary_distribution(p);
    const std::size_t k = p.k();
    for (std::size_t j = 0; j < k; ++j) {
      double next = 0.0;
      for (std::size_t i = 0; i < k; ++i) next += st.dist[i] * p.trans[i][j];
      REQUIRE(next == Catch::Approx(st.dist[j]).margin(1e-8));
    }
  }
}

TEST_CASE("default shift profiles carry the published parameters") {
  auto prof = default_shift_profiles();
  REQUIRE(prof.profiles.size() == 3);
  const auto& a0 = prof.profiles[0];
  REQUIRE(a0.pi == std::vector<double>{0.9, 0.05, 0.05});
  REQUIRE(a0.trans[0] == std::vector<double>{0.98, 0.01, 0.01});
  REQUIRE(a0.trans[1] == std::vector<double>{0.1, 0.6, 0.3});
  REQUIRE(a0.trans[2] == std::vector<double>{0.0, 0.1, 0.9});
  const auto& a1 = prof.profiles[1];
  REQUIRE(a1.pi == std::vector<double>{0.05, 0.05, 0.9});
  REQUIRE(a1.trans[0] == std::vector<double>{0.9, 0.1, 0.0});
  REQUIRE(a1.trans[1] == std::vector<double>{0.1, 0.6, 0.3});
  REQUIRE(a1.trans[2] == std::vector<double>{0.03, 0.02, 0.95});
  const auto& a2 = prof.profiles[2];
  REQUIRE(a2.pi == std::vector<double>{0.05, 0.9, 0.05});
  REQUIRE(a2.trans[0] == std::vector<double>{0.9, 0.1, 0.0});
  REQUIRE(a2.trans[1] == std::vector<double>{0.1, 0.7, 0.2});
  REQUIRE(a2.trans[2] == std::vector<double>{0.0, 0.1, 0.9});
  for (const auto& p : prof.profiles) REQUIRE_NOTHROW(validate_params(p));
}

TEST_CASE("long-run class frequencies converge to the stationary distribution") {
  for (const auto& p : default_shift_profiles().profiles) {
    // A0's 0.98 self-loop mixes slowly, so a long chain is needed for tight margins.
    auto seq = sample_class_sequence(p, 1000000, 7);
    std::vector<double> freq(p.k(), 0.0);
    for (int v : seq) freq[v] += 1.0 / seq.size();
    auto st = stationary_distribution(p);
    for (std::size_t i = 0; i < p.k(); ++i)
      REQUIRE(freq[i] == Catch::Approx(st.dist[i]).margin(0.01));
  }
}

TEST_CASE("empirical transitions of sampled chains recover the generator matrix") {
  for (const auto& p : default_shift_profiles().profiles) {
    std::vector<std::vector<int>> seqs;
    Rng rng(11);
    for (int s = 0; s < 500; ++s) seqs.push_back(sample_class_sequence(p, 200, rng));
    auto et = empirical_transition(seqs, static_cast<int>(p.k()));
    for (std::size_t i = 0; i < p.k(); ++i)
      for (std::size_t j = 0; j < p.k(); ++j)
        REQUIRE(et.matrix[i][j] == Catch::Approx(p.trans[i][j]).margin(0.02));
  }
}
