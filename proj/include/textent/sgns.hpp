#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "textent/common.hpp"
#include "textent/corpus.hpp"
#include "textent/sampling.hpp"
#include "textent/vectors.hpp"

namespace textent {

struct SgnsConfig {
  std::size_t dim = 300;
  std::size_t window = 10;
  std::size_t negatives = 15;
  std::uint64_t min_count = 3;
  std::size_t epochs = 5;
  double subsample_threshold = 1e-3;
  double initial_lr = 0.025;
  double power = 0.75;
  std::uint64_t seed = 42;
  std::size_t threads = 1;

  void validate() const {
    require(dim > 0, ErrorKind::invalid_argument, "dim must be positive");
    require(window >= 1, ErrorKind::invalid_argument, "window must be at least 1");
    require(negatives >= 1, ErrorKind::invalid_argument, "negatives must be at least 1");
    require(threads >= 1, ErrorKind::invalid_argument, "threads must be at least 1");
    require(initial_lr >= 0, ErrorKind::invalid_argument, "learning rate must be non-negative");
  }
};

/// Input (token) vectors and output (context) vectors.
template <typename Real>
struct SgnsParams {
  Matrix<Real> input;
  Matrix<Real> output;
};

/// Input rows uniform in [-0.5/d, 0.5/d], output rows zero.
template <typename Real>
SgnsParams<Real> init_sgns_params(std::size_t n_tokens, std::size_t dim, Rng& rng) {
  SgnsParams<Real> p{Matrix<Real>(n_tokens, dim), Matrix<Real>(n_tokens, dim)};
  const Real r = Real(0.5) / static_cast<Real>(dim);
  fill_uniform(p.input.values(), rng, -r, r);
  return p;
}

/// -log s(u_ctx . v_c) - sum_neg log s(-u_neg . v_c)
template <typename Real>
double sgns_pair_loss(const SgnsParams<Real>& p, Id center, Id context, std::span<const Id> negatives) {
  const auto v = p.input.row(center);
  double loss = softplus(-static_cast<double>(dot(p.output.row(context), v)));
  for (Id n : negatives) loss += softplus(static_cast<double>(dot(p.output.row(n), v)));
  return loss;
}

template <typename Real>
struct SgnsPairGradient {
  std::vector<Real> center;
  /// outputs[0] is for the context row, outputs[1 + j] for negatives[j]. A row
  /// that appears twice gets two entries whose sum is its gradient.
  std::vector<std::vector<Real>> outputs;
};

template <typename Real>
SgnsPairGradient<Real> sgns_pair_gradient(const SgnsParams<Real>& p, Id center, Id context,
                                          std::span<const Id> negatives) {
  const auto v = p.input.row(center);
  const std::size_t d = v.size();
  SgnsPairGradient<Real> g{std::vector<Real>(d, Real(0)), {}};
  auto term = [&](Id row, Real label) {
    const auto u = p.output.row(row);
    // d/ds of the per-term loss is s(s) - label.
    const Real coeff = static_cast<Real>(sigmoid(static_cast<double>(dot(u, v)))) - label;
    std::vector<Real> gu(d);
    for (std::size_t i = 0; i < d; ++i) {
      gu[i] = coeff * v[i];
      g.center[i] += coeff * u[i];
    }
    g.outputs.push_back(std::move(gu));
  };
  term(context, Real(1));
  for (Id n : negatives) term(n, Real(0));
  return g;
}

/// One SGD step on a (center, context) pair. Returns the loss before the update.
template <typename Real>
double sgns_pair_step(SgnsParams<Real>& p, Id center, Id context, std::span<const Id> negatives, Real lr,
                      std::vector<Real>* scratch = nullptr) {
  const auto v = p.input.row(center);
  const std::size_t d = v.size();
  std::vector<Real> local;
  auto& neu = scratch ? *scratch : local;
  neu.assign(d, Real(0));

  const std::size_t m = negatives.size() + 1;
  Real coeffs_small[32];
  std::vector<Real> coeffs_big;
  Real* coeffs = coeffs_small;
  if (m > 32) {
    coeffs_big.resize(m);
    coeffs = coeffs_big.data();
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const Id row = j == 0 ? context : negatives[j - 1];
    const double s = dot(p.output.row(row), v);
    const double label = j == 0 ? 1.0 : 0.0;
    loss += j == 0 ? softplus(-s) : softplus(s);
    coeffs[j] = static_cast<Real>(sigmoid(s) - label);
  }
  if (lr == Real(0)) return loss;
  // Every score above used the pre-update vectors.
  for (std::size_t j = 0; j < m; ++j) {
    const Id row = j == 0 ? context : negatives[j - 1];
    auto u = p.output.row(row);
    const Real c = coeffs[j];
    for (std::size_t i = 0; i < d; ++i) {
      neu[i] += c * u[i];
      u[i] -= lr * c * v[i];
    }
  }
  for (std::size_t i = 0; i < d; ++i) v[i] -= lr * neu[i];
  return loss;
}

struct SgnsResult {
  VectorStore vectors;
  std::vector<double> epoch_loss;  // mean pair loss per epoch
  std::uint64_t corpus_tokens = 0;
};

/// Skip-gram with negative sampling over sequences of tokens. Windows never
/// cross sequence boundaries. With threads > 1 workers update the shared
/// tables without locks and results are not reproducible.
inline SgnsResult train_skipgram(const TokenStream& stream, const SgnsConfig& config) {
  config.validate();
  std::map<std::string, std::uint64_t> counts;
  for (const auto& seq : stream) {
    for (const auto& t : seq) ++counts[t];
  }
  const auto lex = Lexicon::from_counts(counts, config.min_count);
  require(!lex.empty(), ErrorKind::empty_corpus, "no token survives min_count");

  std::vector<std::vector<Id>> sequences;
  std::uint64_t total = 0;
  for (const auto& seq : stream) {
    std::vector<Id> ids;
    for (const auto& t : seq) {
      if (auto id = lex.id_of(t)) ids.push_back(*id);
    }
    total += ids.size();
    if (ids.size() >= 2) sequences.push_back(std::move(ids));
  }

  const auto table = SamplingTable::build(lex.counts(), config.power);
  std::vector<double> keep_prob(lex.size(), 1.0);
  if (config.subsample_threshold > 0) {
    const double t = config.subsample_threshold * static_cast<double>(total);
    for (std::size_t i = 0; i < lex.size(); ++i) {
      const double f = static_cast<double>(lex.count(static_cast<Id>(i)));
      keep_prob[i] = std::min(1.0, (std::sqrt(f / t) + 1.0) * t / f);
    }
  }

  Rng rng(config.seed);
  auto params = init_sgns_params<float>(lex.size(), config.dim, rng);

  const double total_work = static_cast<double>(config.epochs) * static_cast<double>(total) + 1.0;
  const double min_lr = config.initial_lr * 1e-4;
  std::atomic<std::uint64_t> processed{0};

  SgnsResult result;
  result.corpus_tokens = total;

  auto run_sequence = [&](const std::vector<Id>& seq, Rng& r, std::vector<Id>& kept, std::vector<Id>& negs,
                          std::vector<float>& scratch, double& loss, std::uint64_t& pairs) {
    kept.clear();
    for (Id id : seq) {
      if (keep_prob[id] >= 1.0 || uniform01(r) < keep_prob[id]) kept.push_back(id);
    }
    const double progress = static_cast<double>(processed.fetch_add(seq.size())) / total_work;
    const auto lr = static_cast<float>(std::max(config.initial_lr * (1.0 - progress), min_lr));
    for (std::size_t pos = 0; pos < kept.size(); ++pos) {
      const auto radius = static_cast<std::ptrdiff_t>(1 + uniform_index(r, config.window));
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(pos) - radius);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(kept.size()) - 1,
                                              static_cast<std::ptrdiff_t>(pos) + radius);
      for (auto c = lo; c <= hi; ++c) {
        if (c == static_cast<std::ptrdiff_t>(pos)) continue;
        const Id context = kept[static_cast<std::size_t>(c)];
        negs.clear();
        // A single-token vocabulary has nothing to draw; skip the negatives then.
        if (lex.size() > 1) {
          while (negs.size() < config.negatives) {
            const Id n = table.sample(r);
            if (n != context) negs.push_back(n);
          }
        }
        loss += sgns_pair_step(params, kept[pos], context, std::span<const Id>(negs), lr, &scratch);
        ++pairs;
      }
    }
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::uint64_t epoch_pairs = 0;
    if (config.threads == 1) {
      std::vector<Id> kept, negs;
      std::vector<float> scratch;
      for (const auto& seq : sequences) run_sequence(seq, rng, kept, negs, scratch, epoch_loss, epoch_pairs);
    } else {
      std::vector<double> losses(config.threads, 0.0);
      std::vector<std::uint64_t> pairs(config.threads, 0);
      std::vector<std::thread> workers;
      const std::uint64_t base = rng();
      for (std::size_t t = 0; t < config.threads; ++t) {
        workers.emplace_back([&, t] {
          Rng r(base + t);
          std::vector<Id> kept, negs;
          std::vector<float> scratch;
          for (std::size_t i = t; i < sequences.size(); i += config.threads) {
            run_sequence(sequences[i], r, kept, negs, scratch, losses[t], pairs[t]);
          }
        });
      }
      for (auto& w : workers) w.join();
      for (std::size_t t = 0; t < config.threads; ++t) {
        epoch_loss += losses[t];
        epoch_pairs += pairs[t];
      }
    }
    result.epoch_loss.push_back(epoch_pairs ? epoch_loss / static_cast<double>(epoch_pairs) : 0.0);
  }

  result.vectors = VectorStore(config.dim);
  for (std::size_t i = 0; i < lex.size(); ++i) {
    result.vectors.add(lex.lookup(static_cast<Id>(i)), params.input.row(i));
  }
  return result;
}

}  // namespace textent
