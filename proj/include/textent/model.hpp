#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "textent/binary_io.hpp"
#include "textent/common.hpp"
#include "textent/corpus.hpp"
#include "textent/optim.hpp"
#include "textent/sampling.hpp"
#include "textent/vectors.hpp"

namespace textent {

/// Which document representation is scored against the target entities:
/// full = W [v_w, v_e], word = v_w, entity = v_e.
enum class Variant { full, word, entity };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::word: return "word";
    case Variant::entity: return "entity";
  }
  return "full";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::full;
  if (s == "word") return Variant::word;
  if (s == "entity") return Variant::entity;
  throw Error(ErrorKind::invalid_argument, "unknown variant '" + std::string(s) + "'");
}

template <typename Real>
struct ModelParameters {
  Variant variant = Variant::full;
  std::size_t dim = 0;
  Matrix<Real> words;         // one row per word
  Matrix<Real> ctx_entities;  // one row per contextual entity
  Matrix<Real> targets;       // one row per target entity
  Matrix<Real> projection;    // dim x 2dim, only for the full variant

  static ModelParameters zeros(Variant variant, std::size_t dim, std::size_t n_words, std::size_t n_ctx,
                               std::size_t n_targets) {
    ModelParameters p;
    p.variant = variant;
    p.dim = dim;
    p.words = Matrix<Real>(n_words, dim);
    p.ctx_entities = Matrix<Real>(n_ctx, dim);
    p.targets = Matrix<Real>(n_targets, dim);
    if (variant == Variant::full) p.projection = Matrix<Real>(dim, 2 * dim);
    return p;
  }

  void validate() const {
    require(dim > 0, ErrorKind::shape_mismatch, "model dimension is zero");
    for (const auto* m : {&words, &ctx_entities, &targets}) {
      require(m->cols() == dim || m->rows() == 0, ErrorKind::shape_mismatch, "embedding width differs from dim");
      require(all_finite(m->values()), ErrorKind::invalid_argument, "non-finite model parameter");
    }
    if (variant == Variant::full) {
      require(projection.rows() == dim && projection.cols() == 2 * dim, ErrorKind::shape_mismatch,
              "projection must be dim x 2dim");
      require(all_finite(projection.values()), ErrorKind::invalid_argument, "non-finite projection");
    } else {
      require(projection.empty(), ErrorKind::shape_mismatch, "projection present for a non-full variant");
    }
  }

  template <typename Other>
  ModelParameters<Other> cast() const {
    ModelParameters<Other> out;
    out.variant = variant;
    out.dim = dim;
    out.words = words.template cast<Other>();
    out.ctx_entities = ctx_entities.template cast<Other>();
    out.targets = targets.template cast<Other>();
    out.projection = projection.template cast<Other>();
    return out;
  }

  bool operator==(const ModelParameters&) const = default;
};

// ---------------------------------------------------------------------------
// Encoding

/// Mean of the given rows, or nullopt for an empty bag.
template <typename Real>
std::optional<std::vector<Real>> bag_average(std::span<const Id> ids, const Matrix<Real>& table) {
  if (ids.empty()) return std::nullopt;
  std::vector<Real> out(table.cols(), Real(0));
  for (Id id : ids) {
    const auto row = table.row(id);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += row[i];
  }
  const auto n = static_cast<Real>(ids.size());
  for (auto& x : out) x /= n;
  return out;
}

/// Keeps each id independently with probability 1 - p, in order.
inline std::vector<Id> apply_word_dropout(std::span<const Id> ids, double p, Rng& rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::invalid_argument, "dropout must lie in [0, 1)");
  if (p == 0.0) return {ids.begin(), ids.end()};
  std::vector<Id> out;
  out.reserve(ids.size());
  for (Id id : ids) {
    if (uniform01(rng) >= p) out.push_back(id);
  }
  return out;
}

template <typename Real>
struct DocumentEncoding {
  std::vector<Id> words;         // bag after dropout
  std::vector<Id> ctx_entities;  // bag after dropout
  std::optional<std::vector<Real>> word_mean;
  std::optional<std::vector<Real>> entity_mean;
  std::vector<Real> v;
};

/// Dropout (when > 0) on both bags, bag averages, then the variant's output.
/// An empty bag stands in as the zero vector.
template <typename Real>
DocumentEncoding<Real> encode(const Document& doc, const ModelParameters<Real>& params, double dropout,
                              Rng& rng) {
  DocumentEncoding<Real> enc;
  enc.words = apply_word_dropout(doc.words, dropout, rng);
  enc.ctx_entities = apply_word_dropout(doc.ctx_entities, dropout, rng);
  enc.word_mean = bag_average<Real>(enc.words, params.words);
  enc.entity_mean = bag_average<Real>(enc.ctx_entities, params.ctx_entities);

  const std::size_t d = params.dim;
  const std::vector<Real> zero(d, Real(0));
  const auto& vw = enc.word_mean ? *enc.word_mean : zero;
  const auto& ve = enc.entity_mean ? *enc.entity_mean : zero;
  switch (params.variant) {
    case Variant::word:
      enc.v = vw;
      break;
    case Variant::entity:
      enc.v = ve;
      break;
    case Variant::full:
      enc.v.assign(d, Real(0));
      for (std::size_t i = 0; i < d; ++i) {
        const auto w = params.projection.row(i);
        Real s(0);
        for (std::size_t j = 0; j < d; ++j) s += w[j] * vw[j];
        for (std::size_t j = 0; j < d; ++j) s += w[d + j] * ve[j];
        enc.v[i] = s;
      }
      break;
  }
  return enc;
}

/// Inference encoding: no dropout, no randomness consumed.
template <typename Real>
std::vector<Real> encode_inference(const Document& doc, const ModelParameters<Real>& params) {
  Rng unused(0);
  return encode(doc, params, 0.0, unused).v;
}

// ---------------------------------------------------------------------------
// Sampled softmax

struct SoftmaxResult {
  double loss = 0.0;
  std::vector<double> probs;
};

/// Cross-entropy of a softmax over scores, stabilised by subtracting the max.
/// loss = logsumexp(scores) - scores[target_index].
inline SoftmaxResult softmax_cross_entropy(std::span<const double> scores, std::size_t target_index) {
  SoftmaxResult r;
  const double m = *std::max_element(scores.begin(), scores.end());
  r.probs.resize(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    r.probs[i] = std::exp(scores[i] - m);
    z += r.probs[i];
  }
  for (auto& p : r.probs) p /= z;
  r.loss = (m - scores[target_index]) + std::log(z);
  return r;
}

/// Candidates are [target, negatives...]; probs follow that order.
template <typename Real>
SoftmaxResult sampled_softmax_loss(std::span<const Real> v, Id target, std::span<const Id> negatives,
                                   const Matrix<Real>& targets) {
  std::vector<double> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(static_cast<double>(dot(targets.row(target), v)));
  for (Id n : negatives) scores.push_back(static_cast<double>(dot(targets.row(n), v)));
  return softmax_cross_entropy(scores, 0);
}

/// 1-based rank of target among all target entities by score, ties to lower id.
template <typename Real>
std::size_t full_softmax_rank(std::span<const Real> v, const Matrix<Real>& targets, Id target) {
  const auto s_t = dot(targets.row(target), v);
  std::size_t rank = 1;
  for (std::size_t e = 0; e < targets.rows(); ++e) {
    if (e == target) continue;
    const auto s = dot(targets.row(e), v);
    if (s > s_t || (s == s_t && e < target)) ++rank;
  }
  return rank;
}

// ---------------------------------------------------------------------------
// Gradients

/// Gradient rows keyed by id; a row is zero until first touched.
template <typename Real>
class SparseRows {
 public:
  explicit SparseRows(std::size_t dim = 0) : dim_(dim) {}

  std::span<Real> row(Id id) {
    auto [it, inserted] = slot_.emplace(id, ids_.size());
    if (inserted) {
      ids_.push_back(id);
      data_.resize(data_.size() + dim_, Real(0));
    }
    return {data_.data() + it->second * dim_, dim_};
  }

  std::optional<std::span<const Real>> find(Id id) const {
    auto it = slot_.find(id);
    if (it == slot_.end()) return std::nullopt;
    return std::span<const Real>(data_.data() + it->second * dim_, dim_);
  }

  /// Ids in first-touch order.
  const std::vector<Id>& ids() const noexcept { return ids_; }
  std::span<const Real> row_at(std::size_t slot) const { return {data_.data() + slot * dim_, dim_}; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  void clear() {
    ids_.clear();
    data_.clear();
    slot_.clear();
  }

 private:
  std::size_t dim_;
  std::vector<Id> ids_;
  std::vector<Real> data_;
  std::unordered_map<Id, std::size_t> slot_;
};

template <typename Real>
struct Gradients {
  SparseRows<Real> words;
  SparseRows<Real> ctx_entities;
  SparseRows<Real> targets;
  Matrix<Real> projection;  // empty unless the variant is full

  static Gradients for_model(const ModelParameters<Real>& p) {
    Gradients g{SparseRows<Real>(p.dim), SparseRows<Real>(p.dim), SparseRows<Real>(p.dim), {}};
    if (p.variant == Variant::full) g.projection = Matrix<Real>(p.dim, 2 * p.dim);
    return g;
  }

  void clear() {
    words.clear();
    ctx_entities.clear();
    targets.clear();
    projection.fill(Real(0));
  }
};

/// Accumulates dL/d(params) given dL/dv for one encoded document. Each retained
/// bag member receives (dL/dv_bag) / |bag|; an empty bag receives nothing.
template <typename Real>
void backprop_encoder(const DocumentEncoding<Real>& enc, std::span<const Real> grad_v,
                      const ModelParameters<Real>& params, Gradients<Real>& grads) {
  const std::size_t d = params.dim;
  std::vector<Real> g_w, g_e;
  switch (params.variant) {
    case Variant::word:
      if (enc.word_mean) g_w.assign(grad_v.begin(), grad_v.end());
      break;
    case Variant::entity:
      if (enc.entity_mean) g_e.assign(grad_v.begin(), grad_v.end());
      break;
    case Variant::full: {
      std::vector<Real> x(2 * d, Real(0));
      if (enc.word_mean) std::copy(enc.word_mean->begin(), enc.word_mean->end(), x.begin());
      if (enc.entity_mean) std::copy(enc.entity_mean->begin(), enc.entity_mean->end(), x.begin() + d);
      std::vector<Real> g_x(2 * d, Real(0));
      for (std::size_t i = 0; i < d; ++i) {
        const Real gi = grad_v[i];
        auto gw_row = grads.projection.row(i);
        const auto w_row = params.projection.row(i);
        for (std::size_t j = 0; j < 2 * d; ++j) {
          gw_row[j] += gi * x[j];
          g_x[j] += w_row[j] * gi;
        }
      }
      if (enc.word_mean) g_w.assign(g_x.begin(), g_x.begin() + static_cast<std::ptrdiff_t>(d));
      if (enc.entity_mean) g_e.assign(g_x.begin() + static_cast<std::ptrdiff_t>(d), g_x.end());
      break;
    }
  }
  auto spread = [](const std::vector<Id>& bag, const std::vector<Real>& g, SparseRows<Real>& out) {
    if (g.empty() || bag.empty()) return;
    const Real scale = Real(1) / static_cast<Real>(bag.size());
    for (Id id : bag) axpy(scale, g, out.row(id));
  };
  spread(enc.words, g_w, grads.words);
  spread(enc.ctx_entities, g_e, grads.ctx_entities);
}

/// Adds the gradient of the sampled cross-entropy for one document to grads and
/// returns its loss.
template <typename Real>
double accumulate_backward(const DocumentEncoding<Real>& enc, Id target, std::span<const Id> negatives,
                           const ModelParameters<Real>& params, Gradients<Real>& grads) {
  const auto sm = sampled_softmax_loss<Real>(enc.v, target, negatives, params.targets);
  const std::size_t d = params.dim;
  std::vector<Real> grad_v(d, Real(0));
  for (std::size_t j = 0; j < sm.probs.size(); ++j) {
    const Id row = j == 0 ? target : negatives[j - 1];
    const auto coeff = static_cast<Real>(sm.probs[j] - (j == 0 ? 1.0 : 0.0));
    axpy(coeff, params.targets.row(row), grad_v);
    axpy(coeff, enc.v, grads.targets.row(row));
  }
  backprop_encoder<Real>(enc, grad_v, params, grads);
  return sm.loss;
}

template <typename Real>
Gradients<Real> backward(const DocumentEncoding<Real>& enc, Id target, std::span<const Id> negatives,
                         const ModelParameters<Real>& params) {
  auto grads = Gradients<Real>::for_model(params);
  accumulate_backward(enc, target, negatives, params, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Adadelta

template <typename Real>
struct AdadeltaState {
  Matrix<Real> words_sq_grad, words_sq_delta;
  Matrix<Real> ctx_sq_grad, ctx_sq_delta;
  Matrix<Real> targets_sq_grad, targets_sq_delta;
  Matrix<Real> projection_sq_grad, projection_sq_delta;

  static AdadeltaState for_model(const ModelParameters<Real>& p) {
    auto like = [](const Matrix<Real>& m) { return Matrix<Real>(m.rows(), m.cols()); };
    return {like(p.words),   like(p.words),   like(p.ctx_entities), like(p.ctx_entities),
            like(p.targets), like(p.targets), like(p.projection),   like(p.projection)};
  }
};

/// Applies one Adadelta step. Embedding rows are updated lazily: only rows
/// present in the gradient, and their accumulators, change.
template <typename Real>
void adadelta_update(ModelParameters<Real>& params, AdadeltaState<Real>& state, const Gradients<Real>& grads,
                     double rho, double eps) {
  auto sparse = [&](Matrix<Real>& x, Matrix<Real>& g2, Matrix<Real>& dx2, const SparseRows<Real>& g,
                    const char* name) {
    require(g2.rows() == x.rows() && g2.cols() == x.cols() && dx2.rows() == x.rows() && dx2.cols() == x.cols(),
            ErrorKind::shape_mismatch, std::string("Adadelta state does not match ") + name);
    require(g.empty() || g.dim() == x.cols(), ErrorKind::shape_mismatch,
            std::string("gradient width does not match ") + name);
    for (std::size_t s = 0; s < g.size(); ++s) {
      const Id id = g.ids()[s];
      require(id < x.rows(), ErrorKind::shape_mismatch, std::string("gradient row out of range for ") + name);
      adadelta_step(x.row(id), g2.row(id), dx2.row(id), g.row_at(s), rho, eps);
    }
  };
  sparse(params.words, state.words_sq_grad, state.words_sq_delta, grads.words, "words");
  sparse(params.ctx_entities, state.ctx_sq_grad, state.ctx_sq_delta, grads.ctx_entities, "contextual entities");
  sparse(params.targets, state.targets_sq_grad, state.targets_sq_delta, grads.targets, "targets");
  if (params.variant == Variant::full) {
    require(grads.projection.rows() == params.projection.rows() &&
                grads.projection.cols() == params.projection.cols() &&
                state.projection_sq_grad.size() == params.projection.size() &&
                state.projection_sq_delta.size() == params.projection.size(),
            ErrorKind::shape_mismatch, "projection gradient or state has the wrong shape");
    adadelta_step(params.projection.values(), state.projection_sq_grad.values(),
                  state.projection_sq_delta.values(), grads.projection.values(), rho, eps);
  } else {
    require(grads.projection.empty(), ErrorKind::shape_mismatch, "projection gradient for a non-full variant");
  }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  Variant variant = Variant::full;
  std::size_t dim = 300;
  std::size_t negatives = 100;  // k
  double dropout = 0.5;         // p
  std::size_t batch_size = 100;
  std::size_t epochs = 50;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  NegativeDistribution negative_distribution = NegativeDistribution::uniform;

  void validate() const {
    require(dim > 0, ErrorKind::invalid_argument, "dim must be positive");
    require(negatives >= 1, ErrorKind::invalid_argument, "negatives must be at least 1");
    require(dropout >= 0.0 && dropout < 1.0, ErrorKind::invalid_argument, "dropout must lie in [0, 1)");
    require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be at least 1");
    require(threads >= 1, ErrorKind::invalid_argument, "threads must be at least 1");
    require(adadelta_rho > 0.0 && adadelta_rho < 1.0, ErrorKind::invalid_argument, "rho must lie in (0, 1)");
    require(adadelta_eps > 0.0, ErrorKind::invalid_argument, "eps must be positive");
  }
};

struct InitStats {
  std::size_t pretrained_words = 0;
  std::size_t pretrained_ctx_entities = 0;
  std::size_t pretrained_targets = 0;
};

/// Random uniform rows in [-0.5/d, 0.5/d] and a Glorot-uniform projection,
/// then rows overwritten from the pretrained store wherever the token matches.
/// Contextual and target rows of the same entity get the same pretrained vector.
template <typename Real>
ModelParameters<Real> initialize_parameters(const Vocabulary& vocab, const VectorStore* pretrained,
                                            const TrainConfig& cfg, Rng& rng, InitStats* stats = nullptr) {
  const std::size_t d = cfg.dim;
  auto p = ModelParameters<Real>::zeros(cfg.variant, d, vocab.words.size(), vocab.ctx_entities.size(),
                                        vocab.target_entities.size());
  const Real r = Real(0.5) / static_cast<Real>(d);
  fill_uniform(p.words.values(), rng, -r, r);
  fill_uniform(p.ctx_entities.values(), rng, -r, r);
  fill_uniform(p.targets.values(), rng, -r, r);
  if (cfg.variant == Variant::full) {
    const auto limit = static_cast<Real>(std::sqrt(6.0 / (3.0 * static_cast<double>(d))));
    fill_uniform(p.projection.values(), rng, -limit, limit);
  }
  InitStats local;
  if (pretrained != nullptr) {
    require(pretrained->dim() == d, ErrorKind::shape_mismatch,
            "pretrained vectors have dimension " + std::to_string(pretrained->dim()) + ", model uses " +
                std::to_string(d));
    auto copy_rows = [&](const Lexicon& lex, Matrix<Real>& m, bool entity, std::size_t& hits) {
      for (std::size_t i = 0; i < lex.size(); ++i) {
        const auto& tok = lex.tokens()[i];
        const auto at = entity ? pretrained->find_entity(tok) : pretrained->find_word(tok);
        if (!at) continue;
        const auto src = pretrained->vector(*at);
        std::transform(src.begin(), src.end(), m.row(i).begin(), [](float x) { return static_cast<Real>(x); });
        ++hits;
      }
    };
    copy_rows(vocab.words, p.words, false, local.pretrained_words);
    copy_rows(vocab.ctx_entities, p.ctx_entities, true, local.pretrained_ctx_entities);
    copy_rows(vocab.target_entities, p.targets, true, local.pretrained_targets);
  }
  if (stats) *stats = local;
  return p;
}

template <typename Real>
struct TrainResult {
  ModelParameters<Real> params;
  std::vector<double> epoch_loss;  // mean per-document loss
  InitStats init;
};

template <typename Real>
using EpochCallback = std::function<void(std::size_t epoch, double mean_loss, const ModelParameters<Real>&)>;

/// Mini-batch training: each epoch shuffles the documents, and each batch
/// accumulates the summed gradient of its documents (fresh dropout mask and
/// negatives per document) before one Adadelta step. threads == 1 is
/// bit-reproducible for a fixed seed; more threads run batches hogwild.
template <typename Real = float>
TrainResult<Real> train(const CompiledDataset& data, const VectorStore* pretrained, const TrainConfig& cfg,
                        const EpochCallback<Real>& on_epoch = {}) {
  cfg.validate();
  require(!data.documents.empty(), ErrorKind::empty_dataset, "no training documents");
  const auto& counts = data.vocab.target_entities.counts();
  const NegativeSampler sampler(cfg.negative_distribution, counts);

  Rng rng(cfg.seed);
  TrainResult<Real> result;
  result.params = initialize_parameters<Real>(data.vocab, pretrained, cfg, rng, &result.init);
  auto& params = result.params;
  auto state = AdadeltaState<Real>::for_model(params);

  std::vector<std::size_t> order(data.documents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;

  auto run_batch = [&](std::size_t b, Rng& r, Gradients<Real>& grads) {
    grads.clear();
    double loss = 0.0;
    const std::size_t end = std::min(order.size(), (b + 1) * cfg.batch_size);
    for (std::size_t i = b * cfg.batch_size; i < end; ++i) {
      const auto& doc = data.documents[order[i]];
      const auto enc = encode(doc, params, cfg.dropout, r);
      const auto negatives = sampler.draw(doc.target, cfg.negatives, r);
      loss += accumulate_backward<Real>(enc, doc.target, negatives, params, grads);
    }
    adadelta_update(params, state, grads, cfg.adadelta_rho, cfg.adadelta_eps);
    return loss;
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    if (cfg.threads == 1) {
      auto grads = Gradients<Real>::for_model(params);
      for (std::size_t b = 0; b < n_batches; ++b) loss += run_batch(b, rng, grads);
    } else {
      std::vector<double> losses(cfg.threads, 0.0);
      std::vector<std::thread> workers;
      const std::uint64_t base = rng();
      for (std::size_t t = 0; t < cfg.threads; ++t) {
        workers.emplace_back([&, t] {
          Rng r(base + t);
          auto grads = Gradients<Real>::for_model(params);
          for (std::size_t b = t; b < n_batches; b += cfg.threads) losses[t] += run_batch(b, r, grads);
        });
      }
      for (auto& w : workers) w.join();
      for (double l : losses) loss += l;
    }
    result.epoch_loss.push_back(loss / static_cast<double>(order.size()));
    if (on_epoch) on_epoch(epoch, result.epoch_loss.back(), params);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model file: "TXM1", version, variant, dim, vocabulary fingerprint, then
// words / contextual entities / targets / projection as (rows, cols, f32...).

inline constexpr std::uint32_t kModelFormatVersion = 1;

struct SavedModel {
  ModelParameters<float> params;
  std::uint64_t vocab_fingerprint = 0;
};

inline void write_model(std::ostream& out, const ModelParameters<float>& p, std::uint64_t vocab_fingerprint) {
  BinaryWriter w(out);
  w.magic("TXM1");
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(p.variant));
  w.u32(BinaryWriter::checked_u32(p.dim));
  w.u64(vocab_fingerprint);
  for (const auto* m : {&p.words, &p.ctx_entities, &p.targets, &p.projection}) {
    w.u32(BinaryWriter::checked_u32(m->rows()));
    w.u32(BinaryWriter::checked_u32(m->cols()));
    for (float x : m->values()) w.f32(x);
  }
}

inline SavedModel read_model(std::istream& in, const std::string& source = "<model>") {
  BinaryReader r(in, source);
  r.expect_magic("TXM1");
  if (r.u32() != kModelFormatVersion) r.fail("unsupported version");
  SavedModel out;
  const auto variant = r.u32();
  if (variant > 2) r.fail("unknown variant");
  out.params.variant = static_cast<Variant>(variant);
  out.params.dim = r.u32();
  out.vocab_fingerprint = r.u64();
  for (auto* m : {&out.params.words, &out.params.ctx_entities, &out.params.targets, &out.params.projection}) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    *m = Matrix<float>(rows, cols);
    for (auto& x : m->values()) x = r.f32();
  }
  r.expect_end();
  try {
    out.params.validate();
  } catch (const Error& e) {
    r.fail(e.what());
  }
  return out;
}

inline void save_model(const std::filesystem::path& path, const ModelParameters<float>& p,
                       std::uint64_t vocab_fingerprint) {
  auto out = open_output(path, true);
  write_model(out, p, vocab_fingerprint);
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

inline SavedModel load_model(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  return read_model(in, path.string());
}

/// Target-entity rows as "ENTITY/<name>" vectors, the space that documents are scored against.
template <typename Real>
VectorStore target_vectors(const ModelParameters<Real>& p, const Vocabulary& vocab) {
  require(p.targets.rows() == vocab.target_entities.size(), ErrorKind::shape_mismatch,
          "model and vocabulary disagree on the number of target entities");
  VectorStore store(p.dim);
  for (std::size_t i = 0; i < p.targets.rows(); ++i) {
    store.add(std::string(kEntityPrefix) + vocab.target_entities.tokens()[i], p.targets.row(i));
  }
  return store;
}

}  // namespace textent
