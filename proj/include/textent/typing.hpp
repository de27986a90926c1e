#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "textent/binary_io.hpp"
#include "textent/common.hpp"
#include "textent/metrics.hpp"
#include "textent/optim.hpp"
#include "textent/vectors.hpp"

namespace textent {

enum class Split { train, dev, test };

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw Error(ErrorKind::malformed_file, "unknown split '" + std::string(s) + "'");
}

struct TypingExample {
  std::string entity;
  Split split = Split::train;
  TypeSet types;
};

struct TypingDataset {
  std::vector<std::string> types;  // inventory, sorted
  std::vector<TypingExample> examples;
};

/// Reads "entity<TAB>split<TAB>type1,type2,..." lines. The type inventory is
/// every type seen, in sorted order.
inline TypingDataset read_typing_dataset(std::istream& in, const std::string& source = "<typing>") {
  struct Row {
    std::string entity;
    Split split;
    std::vector<std::string> types;
  };
  std::vector<Row> rows;
  std::set<std::string> inventory;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    return Error(ErrorKind::malformed_file, source + ":" + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw fail("expected three tab-separated fields");
    }
    Row row;
    row.entity = line.substr(0, t1);
    try {
      row.split = parse_split(line.substr(t1 + 1, t2 - t1 - 1));
    } catch (const Error& e) {
      throw fail(e.what());
    }
    std::stringstream types(line.substr(t2 + 1));
    std::string t;
    while (std::getline(types, t, ',')) {
      if (!t.empty()) row.types.push_back(t);
    }
    if (row.entity.empty()) throw fail("empty entity name");
    if (row.types.empty()) throw fail("entity '" + row.entity + "' has no types");
    if (!seen.insert(row.entity).second) throw fail("entity '" + row.entity + "' listed twice");
    inventory.insert(row.types.begin(), row.types.end());
    rows.push_back(std::move(row));
  }
  TypingDataset data;
  data.types.assign(inventory.begin(), inventory.end());
  std::map<std::string, Id> type_id;
  for (std::size_t i = 0; i < data.types.size(); ++i) type_id[data.types[i]] = static_cast<Id>(i);
  for (auto& row : rows) {
    std::vector<Id> ids;
    for (const auto& name : row.types) ids.push_back(type_id.at(name));
    data.examples.push_back({std::move(row.entity), row.split, make_type_set(std::move(ids))});
  }
  return data;
}

inline TypingDataset load_typing_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_typing_dataset(in, path.string());
}

/// Entity vectors and gold sets for one split.
struct TypingSplit {
  std::vector<std::string> entities;
  std::vector<std::vector<double>> x;
  std::vector<TypeSet> y;
  std::size_t missing = 0;

  std::size_t size() const noexcept { return x.size(); }
};

/// Looks up "ENTITY/<name>" in the store. Missing vectors throw MissingVector
/// when required, otherwise they are counted and skipped.
inline TypingSplit gather_split(const TypingDataset& data, Split split, const VectorStore& vectors,
                                bool require_all) {
  TypingSplit out;
  for (const auto& ex : data.examples) {
    if (ex.split != split) continue;
    const auto at = vectors.find_entity(ex.entity);
    if (!at) {
      require(!require_all, ErrorKind::missing_vector, "no vector for entity '" + ex.entity + "'");
      ++out.missing;
      continue;
    }
    const auto v = vectors.vector(*at);
    out.entities.push_back(ex.entity);
    out.x.emplace_back(v.begin(), v.end());
    out.y.push_back(ex.types);
  }
  return out;
}

// ---------------------------------------------------------------------------
// MLP: p = sigmoid(W_o tanh(W_h x))

struct TypingModel {
  Matrix<double> hidden;  // h x d
  Matrix<double> output;  // |T| x h

  bool operator==(const TypingModel&) const = default;
};

/// Glorot-uniform initialisation of both layers.
inline TypingModel init_typing_model(std::size_t dim, std::size_t hidden_units, std::size_t n_types, Rng& rng) {
  TypingModel m{Matrix<double>(hidden_units, dim), Matrix<double>(n_types, hidden_units)};
  const double lh = std::sqrt(6.0 / static_cast<double>(dim + hidden_units));
  const double lo = std::sqrt(6.0 / static_cast<double>(hidden_units + n_types));
  fill_uniform(m.hidden.values(), rng, -lh, lh);
  fill_uniform(m.output.values(), rng, -lo, lo);
  return m;
}

struct MlpActivations {
  std::vector<double> hidden;  // tanh(W_h x)
  std::vector<double> probs;
};

inline MlpActivations mlp_activations(std::span<const double> x, const TypingModel& m) {
  require(x.size() == m.hidden.cols(), ErrorKind::shape_mismatch,
          "entity vector has dimension " + std::to_string(x.size()) + ", model expects " +
              std::to_string(m.hidden.cols()));
  require(m.output.cols() == m.hidden.rows(), ErrorKind::shape_mismatch, "hidden and output layers disagree");
  MlpActivations a;
  a.hidden.resize(m.hidden.rows());
  for (std::size_t j = 0; j < a.hidden.size(); ++j) a.hidden[j] = std::tanh(dot(m.hidden.row(j), x));
  a.probs.resize(m.output.rows());
  for (std::size_t t = 0; t < a.probs.size(); ++t) a.probs[t] = sigmoid(dot(m.output.row(t), a.hidden));
  return a;
}

inline std::vector<double> mlp_forward(std::span<const double> x, const TypingModel& m) {
  return mlp_activations(x, m).probs;
}

inline constexpr double kProbClamp = 1e-7;

/// Binary cross-entropy summed over types, probabilities clamped to [1e-7, 1 - 1e-7].
inline double bce_loss(std::span<const double> probs, const TypeSet& gold) {
  double loss = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const double p = std::clamp(probs[t], kProbClamp, 1.0 - kProbClamp);
    loss -= contains(gold, static_cast<Id>(t)) ? std::log(p) : std::log(1.0 - p);
  }
  return loss;
}

/// Adds d(bce)/d(W) for one entity into grad (same shapes as m); returns the loss.
inline double accumulate_typing_gradient(std::span<const double> x, const TypeSet& gold, const TypingModel& m,
                                         TypingModel& grad) {
  const auto a = mlp_activations(x, m);
  std::vector<double> d_hidden(a.hidden.size(), 0.0);
  for (std::size_t t = 0; t < a.probs.size(); ++t) {
    const double d_out = a.probs[t] - (contains(gold, static_cast<Id>(t)) ? 1.0 : 0.0);
    axpy(d_out, a.hidden, grad.output.row(t));
    axpy(d_out, m.output.row(t), d_hidden);
  }
  for (std::size_t j = 0; j < d_hidden.size(); ++j) {
    const double dz = d_hidden[j] * (1.0 - a.hidden[j] * a.hidden[j]);
    axpy(dz, x, grad.hidden.row(j));
  }
  return bce_loss(a.probs, gold);
}

// ---------------------------------------------------------------------------
// Training with dev-P@1 epoch selection

struct TypingConfig {
  std::size_t hidden_units = 200;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  AdamConfig adam;
};

struct TypingTrainResult {
  TypingModel model;  // snapshot from best_epoch
  std::size_t best_epoch = 0;
  std::vector<double> dev_p_at_1;  // index e-1 holds epoch e
  std::vector<double> train_loss;
};

inline std::vector<std::vector<double>> predict_probs(const TypingModel& m,
                                                      const std::vector<std::vector<double>>& x) {
  std::vector<std::vector<double>> out;
  out.reserve(x.size());
  for (const auto& v : x) out.push_back(mlp_forward(v, m));
  return out;
}

inline std::vector<std::vector<Id>> rank_all(const std::vector<std::vector<double>>& probs) {
  std::vector<std::vector<Id>> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(rank_types(p));
  return out;
}

/// Adam on shuffled mini-batches; after every epoch the dev P@1 is measured and
/// the parameters of the best epoch (earliest on ties) are returned. With an
/// empty dev split the last epoch wins.
inline TypingTrainResult train_typing(const TypingSplit& train, const TypingSplit& dev, std::size_t n_types,
                                      const TypingConfig& cfg) {
  require(!train.x.empty(), ErrorKind::empty_train_set, "typing train split is empty");
  require(cfg.batch_size >= 1 && cfg.hidden_units >= 1, ErrorKind::invalid_argument,
          "batch size and hidden units must be positive");
  const std::size_t dim = train.x.front().size();
  Rng rng(cfg.seed);
  TypingTrainResult result;
  result.model = init_typing_model(dim, cfg.hidden_units, n_types, rng);
  TypingModel current = result.model;
  Adam<double> adam_h(current.hidden.size(), cfg.adam);
  Adam<double> adam_o(current.output.size(), cfg.adam);
  TypingModel grad{Matrix<double>(current.hidden.rows(), current.hidden.cols()),
                   Matrix<double>(current.output.rows(), current.output.cols())};

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      grad.hidden.fill(0.0);
      grad.output.fill(0.0);
      const auto end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        loss += accumulate_typing_gradient(train.x[order[i]], train.y[order[i]], current, grad);
      }
      adam_h.step(current.hidden.values(), grad.hidden.values());
      adam_o.step(current.output.values(), grad.output.values());
    }
    result.train_loss.push_back(loss / static_cast<double>(order.size()));
    const double p1 = dev.x.empty() ? 0.0 : precision_at_1(rank_all(predict_probs(current, dev.x)), dev.y);
    result.dev_p_at_1.push_back(p1);
    if (p1 > best || dev.x.empty()) {
      best = p1;
      result.best_epoch = epoch;
      result.model = current;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Per-type thresholds

/// Threshold above every probability: the type is never assigned.
inline const double kAssignNothing = std::nextafter(1.0, 2.0);

struct TypeThresholds {
  std::vector<double> theta;   // per type
  std::vector<double> dev_f1;  // F1 the chosen threshold reaches on dev
};

/// For each type, the threshold maximising dev F1 of {p_t >= theta} against
/// gold membership. Candidates are the distinct dev probabilities plus
/// kAssignNothing; ties keep the larger threshold.
inline TypeThresholds tune_thresholds(const std::vector<std::vector<double>>& probs,
                                      const std::vector<TypeSet>& gold, std::size_t n_types) {
  require(probs.size() == gold.size(), ErrorKind::length_mismatch, "probabilities and gold differ in length");
  require(!probs.empty(), ErrorKind::empty_dataset, "threshold tuning needs a non-empty dev set");
  TypeThresholds out;
  out.theta.resize(n_types);
  out.dev_f1.resize(n_types);
  std::vector<std::size_t> order(probs.size());
  for (std::size_t t = 0; t < n_types; ++t) {
    std::size_t positives = 0;
    for (const auto& g : gold) positives += contains(g, static_cast<Id>(t)) ? 1 : 0;
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a][t] > probs[b][t]; });

    // Sweep from the highest probability down; each distinct value is a cut.
    double best_f1 = 0.0;
    double best_theta = kAssignNothing;
    std::size_t tp = 0, assigned = 0;
    for (std::size_t i = 0; i < order.size();) {
      const double value = probs[order[i]][t];
      while (i < order.size() && probs[order[i]][t] == value) {
        tp += contains(gold[order[i]], static_cast<Id>(t)) ? 1 : 0;
        ++assigned;
        ++i;
      }
      const double f1 = f1_score(tp, assigned - tp, positives - tp);
      // Strictly better only: on a tie the earlier, larger threshold stays.
      if (f1 > best_f1) {
        best_f1 = f1;
        best_theta = value;
      }
    }
    out.theta[t] = best_theta;
    out.dev_f1[t] = best_f1;
  }
  return out;
}

inline TypeSet predict_types(std::span<const double> probs, const TypeThresholds& thresholds) {
  require(probs.size() == thresholds.theta.size(), ErrorKind::shape_mismatch,
          "probability and threshold vectors differ in length");
  TypeSet out;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] >= thresholds.theta[t]) out.push_back(static_cast<Id>(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

enum class BepMode { per_entity, global };

struct TypingReport {
  double p_at_1 = 0.0;
  double bep = 0.0;
  double accuracy = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::size_t best_epoch = 0;
  TypeThresholds thresholds;
  std::size_t test_entities = 0;
  std::size_t test_missing = 0;
};

/// Full protocol: train with dev-P@1 selection, tune thresholds on dev, then
/// score the test split.
inline TypingReport evaluate_typing(const TypingDataset& data, const VectorStore& vectors,
                                    const TypingConfig& cfg, BepMode bep_mode = BepMode::per_entity,
                                    TypingTrainResult* trained = nullptr) {
  const auto train = gather_split(data, Split::train, vectors, true);
  const auto dev = gather_split(data, Split::dev, vectors, true);
  const auto test = gather_split(data, Split::test, vectors, false);
  require(!dev.x.empty(), ErrorKind::empty_dataset, "typing dev split is empty");
  const std::size_t n_types = data.types.size();

  auto fit = train_typing(train, dev, n_types, cfg);
  TypingReport r;
  r.best_epoch = fit.best_epoch;
  r.thresholds = tune_thresholds(predict_probs(fit.model, dev.x), dev.y, n_types);
  r.test_entities = test.size();
  r.test_missing = test.missing;

  const auto probs = predict_probs(fit.model, test.x);
  const auto ranked = rank_all(probs);
  r.p_at_1 = precision_at_1(ranked, test.y);
  r.bep = bep_mode == BepMode::per_entity ? breakeven_point(ranked, test.y) : global_breakeven_point(probs, test.y);
  std::vector<Assignment> assign;
  for (std::size_t i = 0; i < probs.size(); ++i) assign.push_back({predict_types(probs[i], r.thresholds), test.y[i]});
  r.accuracy = strict_accuracy(assign);
  r.micro_f1 = micro_f1(assign);
  r.macro_f1 = macro_f1_entities(assign);
  if (trained) *trained = std::move(fit);
  return r;
}

}  // namespace textent
