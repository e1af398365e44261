#pragma once

// Markov control layer: the attacker steers generated traffic by specifying
// an initial class distribution pi and a row-stochastic transition matrix A.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimicshift/rng.hpp"

namespace mimicshift {

struct MarkovParams {
  std::vector<double> pi;               // length K
  std::vector<std::vector<double>> trans;  // K x K, row-stochastic
  std::string name;                     // optional label for reports

  std::size_t k() const { return pi.size(); }
};

struct ShiftProfile {
  std::vector<MarkovParams> profiles;
};

namespace detail {
inline constexpr double kStochasticTol = 1e-9;
}

inline void validate_params(const MarkovParams& p) {
  const std::size_t k = p.pi.size();
  if (k == 0) throw std::invalid_argument("MarkovParams: empty pi");
  if (p.trans.size() != k)
    throw std::invalid_argument("MarkovParams: trans has " + std::to_string(p.trans.size()) +
                                " rows, expected " + std::to_string(k));
  double pisum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (p.pi[i] < 0.0)
      throw std::invalid_argument("MarkovParams: pi[" + std::to_string(i) + "] is negative");
    pisum += p.pi[i];
  }
  if (std::abs(pisum - 1.0) > detail::kStochasticTol) {
    std::ostringstream os;
    os << "MarkovParams: pi sums to " << pisum;
    throw std::invalid_argument(os.str());
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (p.trans[i].size() != k)
      throw std::invalid_argument("MarkovParams: row " + std::to_string(i) + " has wrong length");
    double rowsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (p.trans[i][j] < 0.0)
        throw std::invalid_argument("MarkovParams: entry (" + std::to_string(i) + "," +
                                    std::to_string(j) + ") is negative");
      rowsum += p.trans[i][j];
    }
    if (std::abs(rowsum - 1.0) > detail::kStochasticTol) {
      std::ostringstream os;
      os << "MarkovParams: row " << i << " sums to " << rowsum;
      throw std::invalid_argument(os.str());
    }
  }
}

inline std::vector<int> sample_class_sequence(const MarkovParams& p, std::size_t len, Rng& rng) {
  validate_params(p);
  if (len == 0) throw std::invalid_argument("sample_class_sequence: length must be >= 1");
  std::vector<int> seq;
  seq.reserve(len);
  seq.push_back(static_cast<int>(rng.categorical(p.pi)));
  for (std::size_t l = 1; l < len; ++l)
    seq.push_back(static_cast<int>(rng.categorical(p.trans[seq.back()])));
  return seq;
}

inline std::vector<int> sample_class_sequence(const MarkovParams& p, std::size_t len,
                                              std::uint64_t seed) {
  Rng rng(seed);
  return sample_class_sequence(p, len, rng);
}

struct EmpiricalTransition {
  std::vector<std::vector<double>> matrix;  // row-normalized counts
  std::vector<bool> row_observed;           // false rows were returned uniform
};

inline EmpiricalTransition empirical_transition(const std::vector<std::vector<int>>& sequences,
                                                std::size_t k) {
  if (sequences.empty()) throw std::invalid_argument("empirical_transition: no sequences");
  std::vector<std::vector<double>> counts(k, std::vector<double>(k, 0.0));
  for (const auto& s : sequences)
    for (std::size_t l = 0; l + 1 < s.size(); ++l) {
      if (s[l] < 0 || static_cast<std::size_t>(s[l]) >= k || s[l + 1] < 0 ||
          static_cast<std::size_t>(s[l + 1]) >= k)
        throw std::invalid_argument("empirical_transition: class id out of range");
      counts[s[l]][s[l + 1]] += 1.0;
    }
  EmpiricalTransition out;
  out.matrix.assign(k, std::vector<double>(k, 0.0));
  out.row_observed.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    double rowsum = 0.0;
    for (std::size_t j = 0; j < k; ++j) rowsum += counts[i][j];
    if (rowsum > 0.0) {
      out.row_observed[i] = true;
      for (std::size_t j = 0; j < k; ++j) out.matrix[i][j] = counts[i][j] / rowsum;
    } else {
      for (std::size_t j = 0; j < k; ++j) out.matrix[i][j] = 1.0 / static_cast<double>(k);
    }
  }
  return out;
}

struct StationaryResult {
  std::vector<double> dist;
  bool reducible = false;  // set when the chain has unreachable structure (e.g. identity)
};

// Left fixed point of A via power iteration, tolerance 1e-10.
inline StationaryResult stationary_distribution(const MarkovParams& p) {
  validate_params(p);
  const std::size_t k = p.k();
  // reducibility probe: identity-like rows mean pi itself is stationary
  bool identity = true;
  for (std::size_t i = 0; i < k && identity; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (std::abs(p.trans[i][j] - (i == j ? 1.0 : 0.0)) > detail::kStochasticTol) {
        identity = false;
        break;
      }
  if (identity) return {p.pi, true};

  std::vector<double> v = p.pi;
  std::vector<double> next(k, 0.0);
  const int max_iters = 100000;
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += v[i] * p.trans[i][j];
      next[j] = s;
    }
    double norm = 0.0;
    for (double x : next) norm += x;
    double diff = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      next[j] /= norm;
      diff = std::max(diff, std::abs(next[j] - v[j]));
    }
    v = next;
    if (diff < 1e-10) return {v, false};
  }
  throw std::runtime_error("stationary_distribution: no convergence after 100000 iterations");
}

// The three shift profiles used throughout the experiments.
inline ShiftProfile default_shift_profiles() {
  ShiftProfile sp;
  sp.profiles = {
      {{0.9, 0.05, 0.05},
       {{0.98, 0.01, 0.01}, {0.1, 0.6, 0.3}, {0.0, 0.1, 0.9}},
       "A0"},
      {{0.05, 0.05, 0.9},
       {{0.9, 0.1, 0.0}, {0.1, 0.6, 0.3}, {0.03, 0.02, 0.95}},
       "A1"},
      {{0.05, 0.9, 0.05},
       {{0.9, 0.1, 0.0}, {0.1, 0.7, 0.2}, {0.0, 0.1, 0.9}},
       "A2"},
  };
  return sp;
}

}  // namespace mimicshift
