#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "textent/common.hpp"

namespace textent {

/// Noise distribution P(i) proportional to count_i^power, sampled by inverting
/// the cumulative distribution.
class SamplingTable {
 public:
  SamplingTable() = default;

  static SamplingTable build(std::span<const std::uint64_t> counts, double power = 0.75) {
    require(!counts.empty(), ErrorKind::empty_vocabulary, "sampling table needs at least one token");
    SamplingTable t;
    t.probs_.resize(counts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      require(counts[i] > 0, ErrorKind::invalid_argument, "sampling counts must be positive");
      t.probs_[i] = std::pow(static_cast<double>(counts[i]), power);
      total += t.probs_[i];
    }
    t.cdf_.resize(counts.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      t.probs_[i] /= total;
      acc += t.probs_[i];
      t.cdf_[i] = acc;
    }
    t.cdf_.back() = 1.0;
    return t;
  }

  Id sample(Rng& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const auto idx = static_cast<std::size_t>(it - cdf_.begin());
    return static_cast<Id>(std::min(idx, cdf_.size() - 1));
  }

  double probability(Id id) const { return probs_.at(id); }
  std::span<const double> probabilities() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

/// k negatives drawn uniformly with replacement from [0, n_targets), redrawing
/// whenever the target comes up.
inline std::vector<Id> sample_negatives(Id target, std::size_t k, std::size_t n_targets, Rng& rng) {
  require(n_targets >= 2, ErrorKind::invalid_argument, "negative sampling needs at least two targets");
  std::vector<Id> out;
  out.reserve(k);
  while (out.size() < k) {
    const auto id = static_cast<Id>(uniform_index(rng, n_targets));
    if (id != target) out.push_back(id);
  }
  return out;
}

enum class NegativeDistribution { uniform, unigram };

inline std::string_view to_string(NegativeDistribution d) {
  return d == NegativeDistribution::uniform ? "uniform" : "unigram";
}

inline NegativeDistribution parse_negative_distribution(std::string_view s) {
  if (s == "uniform") return NegativeDistribution::uniform;
  if (s == "unigram") return NegativeDistribution::unigram;
  throw Error(ErrorKind::invalid_argument, "unknown negative distribution '" + std::string(s) + "'");
}

/// Draws target-entity negatives either uniformly or from a unigram^power table.
class NegativeSampler {
 public:
  NegativeSampler(NegativeDistribution dist, std::span<const std::uint64_t> counts, double power = 0.75)
      : dist_(dist), n_(counts.size()) {
    require(n_ >= 2, ErrorKind::invalid_argument, "negative sampling needs at least two targets");
    if (dist_ == NegativeDistribution::unigram) table_ = SamplingTable::build(counts, power);
  }

  std::vector<Id> draw(Id target, std::size_t k, Rng& rng) const {
    if (dist_ == NegativeDistribution::uniform) return sample_negatives(target, k, n_, rng);
    std::vector<Id> out;
    out.reserve(k);
    while (out.size() < k) {
      const Id id = table_.sample(rng);
      if (id != target) out.push_back(id);
    }
    return out;
  }

 private:
  NegativeDistribution dist_;
  std::size_t n_;
  SamplingTable table_;
};

}  // namespace textent
