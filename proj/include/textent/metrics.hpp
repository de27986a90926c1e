#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "textent/common.hpp"

namespace textent {

/// Sorted, duplicate-free type ids.
using TypeSet = std::vector<Id>;

inline TypeSet make_type_set(std::vector<Id> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

inline bool contains(const TypeSet& set, Id id) { return std::binary_search(set.begin(), set.end(), id); }

inline std::size_t intersection_size(const TypeSet& a, const TypeSet& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

/// F1 from raw counts, 0 when precision + recall is 0.
inline double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0) return 0.0;
  const double p = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * p * r / (p + r);
}

/// Type ids by descending probability, ties by ascending id.
inline std::vector<Id> rank_types(std::span<const double> probs) {
  std::vector<Id> order(probs.size());
  std::iota(order.begin(), order.end(), Id{0});
  std::stable_sort(order.begin(), order.end(), [&](Id a, Id b) { return probs[a] > probs[b]; });
  return order;
}

// Ranking measures -----------------------------------------------------------

inline double precision_at_1(const std::vector<std::vector<Id>>& ranked, const std::vector<TypeSet>& gold) {
  require(ranked.size() == gold.size(), ErrorKind::length_mismatch, "rankings and gold differ in length");
  if (ranked.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t e = 0; e < ranked.size(); ++e) {
    if (!ranked[e].empty() && contains(gold[e], ranked[e].front())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

/// Precision at cutoff |gold| for one entity; precision, recall and F1 coincide there.
inline double entity_breakeven(const std::vector<Id>& ranked, const TypeSet& gold) {
  if (gold.empty()) return 0.0;
  const std::size_t cutoff = std::min(gold.size(), ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cutoff; ++i) hits += contains(gold, ranked[i]) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

/// Breakeven point per entity, averaged over entities.
inline double breakeven_point(const std::vector<std::vector<Id>>& ranked, const std::vector<TypeSet>& gold) {
  require(ranked.size() == gold.size(), ErrorKind::length_mismatch, "rankings and gold differ in length");
  if (ranked.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t e = 0; e < ranked.size(); ++e) sum += entity_breakeven(ranked[e], gold[e]);
  return sum / static_cast<double>(ranked.size());
}

/// Breakeven point of one pooled ranking of every (entity, type) pair, cut at
/// the total number of gold pairs. Ties go to lower entity index, then lower type id.
inline double global_breakeven_point(const std::vector<std::vector<double>>& probs,
                                     const std::vector<TypeSet>& gold) {
  require(probs.size() == gold.size(), ErrorKind::length_mismatch, "probabilities and gold differ in length");
  struct Pair {
    double p;
    std::size_t entity;
    Id type;
  };
  std::vector<Pair> pairs;
  std::size_t relevant = 0;
  for (std::size_t e = 0; e < probs.size(); ++e) {
    relevant += gold[e].size();
    for (std::size_t t = 0; t < probs[e].size(); ++t) pairs.push_back({probs[e][t], e, static_cast<Id>(t)});
  }
  if (relevant == 0) return 0.0;
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.p > b.p; });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(relevant, pairs.size()); ++i) {
    hits += contains(gold[pairs[i].entity], pairs[i].type) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(relevant);
}

// Assignment measures --------------------------------------------------------

struct Assignment {
  TypeSet predicted;
  TypeSet gold;
};

inline double strict_accuracy(std::span<const Assignment> assign) {
  if (assign.empty()) return 0.0;
  std::size_t exact = 0;
  for (const auto& a : assign) exact += a.predicted == a.gold ? 1 : 0;
  return static_cast<double>(exact) / static_cast<double>(assign.size());
}

/// F1 over all pooled (entity, type) decisions.
inline double micro_f1(std::span<const Assignment> assign) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& a : assign) {
    const auto hit = intersection_size(a.predicted, a.gold);
    tp += hit;
    fp += a.predicted.size() - hit;
    fn += a.gold.size() - hit;
  }
  return f1_score(tp, fp, fn);
}

/// Per-entity F1 averaged over entities.
inline double macro_f1_entities(std::span<const Assignment> assign) {
  if (assign.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& a : assign) {
    const auto hit = intersection_size(a.predicted, a.gold);
    sum += f1_score(hit, a.predicted.size() - hit, a.gold.size() - hit);
  }
  return sum / static_cast<double>(assign.size());
}

// Single-label classification -----------------------------------------------

struct ClassificationReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
};

/// One-vs-rest F1 per class; a class absent from both gold and predictions scores 0.
inline ClassificationReport classification_report(std::span<const std::size_t> predicted,
                                                  std::span<const std::size_t> gold, std::size_t n_classes) {
  require(predicted.size() == gold.size(), ErrorKind::length_mismatch,
          "predicted and gold labels differ in length");
  ClassificationReport r;
  std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    require(predicted[i] < n_classes && gold[i] < n_classes, ErrorKind::invalid_argument, "label out of range");
    if (predicted[i] == gold[i]) {
      ++correct;
      ++tp[gold[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[gold[i]];
    }
  }
  r.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  r.per_class_f1.resize(n_classes);
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    r.per_class_f1[c] = f1_score(tp[c], fp[c], fn[c]);
    sum += r.per_class_f1[c];
  }
  r.macro_f1 = n_classes == 0 ? 0.0 : sum / static_cast<double>(n_classes);
  return r;
}

}  // namespace textent
