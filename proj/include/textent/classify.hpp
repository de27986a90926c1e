#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "textent/common.hpp"
#include "textent/corpus.hpp"
#include "textent/metrics.hpp"
#include "textent/model.hpp"
#include "textent/optim.hpp"
#include "textent/typing.hpp"

namespace textent {

struct LabeledDocument {
  RawDocument doc;
  std::size_t label = 0;
  Split split = Split::train;

  bool operator==(const LabeledDocument&) const = default;
};

struct LabeledCorpus {
  std::vector<std::string> classes;  // sorted
  std::vector<LabeledDocument> documents;

  bool operator==(const LabeledCorpus&) const = default;
};

/// JSON lines {"id", "label", "tokens", "annotations"?, "split"?}; split
/// defaults to "train".
inline LabeledCorpus read_labeled_corpus(std::istream& in, const std::string& source = "<labeled>") {
  struct Row {
    RawDocument doc;
    std::string label;
    Split split;
  };
  std::vector<Row> rows;
  std::set<std::string> labels;
  for_each_json_line(in, source, [&](const nlohmann::json& j) {
    Row row;
    row.doc.id = j.at("id").get<std::string>();
    row.doc.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (auto it = j.find("annotations"); it != j.end()) row.doc.annotations = parse_annotations(*it);
    validate(row.doc);
    row.label = j.at("label").get<std::string>();
    row.split = parse_split(j.value("split", std::string("train")));
    labels.insert(row.label);
    rows.push_back(std::move(row));
  });
  LabeledCorpus corpus;
  corpus.classes.assign(labels.begin(), labels.end());
  for (auto& row : rows) {
    const auto label = static_cast<std::size_t>(
        std::lower_bound(corpus.classes.begin(), corpus.classes.end(), row.label) - corpus.classes.begin());
    corpus.documents.push_back({std::move(row.doc), label, row.split});
  }
  return corpus;
}

inline LabeledCorpus load_labeled_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_labeled_corpus(in, path.string());
}

/// Moves round(dev_frac * |train|) randomly chosen train documents to dev.
/// Corpora that already carry a dev split are left alone.
inline void assign_dev_split(LabeledCorpus& corpus, double dev_frac, std::uint64_t seed) {
  require(dev_frac >= 0.0 && dev_frac < 1.0, ErrorKind::invalid_argument, "dev fraction must lie in [0, 1)");
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (corpus.documents[i].split == Split::dev) return;
    if (corpus.documents[i].split == Split::train) train.push_back(i);
  }
  Rng rng(seed);
  std::shuffle(train.begin(), train.end(), rng);
  const auto n_dev = static_cast<std::size_t>(std::llround(dev_frac * static_cast<double>(train.size())));
  for (std::size_t i = 0; i < n_dev; ++i) corpus.documents[train[i]].split = Split::dev;
}

/// Lowercases, drops annotations below min_score, removes words seen fewer
/// than min_count times (annotation spans are remapped; a span left empty
/// drops its annotation), then removes entities seen fewer than min_count
/// times. Counts come from this corpus. Applying it twice changes nothing.
inline LabeledCorpus preprocess_corpus(const LabeledCorpus& corpus, std::uint64_t min_count, double min_score) {
  LabeledCorpus out = corpus;
  std::map<std::string, std::uint64_t> word_counts;
  for (auto& ld : out.documents) {
    ld.doc = normalize(filter_annotations(ld.doc, min_score));
    for (const auto& t : ld.doc.tokens) ++word_counts[t];
  }

  std::map<std::string, std::uint64_t> entity_counts;
  for (auto& ld : out.documents) {
    auto& doc = ld.doc;
    std::vector<std::size_t> kept_before(doc.tokens.size() + 1, 0);
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
      const bool keep = word_counts[doc.tokens[i]] >= min_count;
      kept_before[i + 1] = kept_before[i] + (keep ? 1 : 0);
      if (keep) tokens.push_back(std::move(doc.tokens[i]));
    }
    doc.tokens = std::move(tokens);
    std::vector<Annotation> anns;
    for (auto& a : doc.annotations) {
      a.start = kept_before[a.start];
      a.end = kept_before[a.end];
      if (a.start < a.end) {
        ++entity_counts[a.entity];
        anns.push_back(std::move(a));
      }
    }
    doc.annotations = std::move(anns);
  }
  for (auto& ld : out.documents) {
    std::erase_if(ld.doc.annotations, [&](const Annotation& a) { return entity_counts[a.entity] < min_count; });
  }
  return out;
}

/// Inference compiles whole documents.
inline CompileOptions inference_compile_options() {
  CompileOptions o;
  o.max_words = std::numeric_limits<std::size_t>::max();
  o.max_entities = std::numeric_limits<std::size_t>::max();
  o.require_target = false;
  return o;
}

/// Dropout-free document vectors: v for full, v_w for word, v_e for entity.
template <typename Real>
std::vector<std::vector<double>> encode_corpus(const LabeledCorpus& corpus, const ModelParameters<Real>& params,
                                               const Vocabulary& vocab,
                                               const CompileOptions& options = inference_compile_options()) {
  std::vector<std::vector<double>> out;
  out.reserve(corpus.documents.size());
  for (const auto& ld : corpus.documents) {
    const auto v = encode_inference(compile_document(ld.doc, vocab, options), params);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Logistic layer

struct SoftmaxClassifier {
  Matrix<double> weights;    // classes x d
  std::vector<double> bias;  // classes

  static SoftmaxClassifier zeros(std::size_t n_classes, std::size_t dim) {
    return {Matrix<double>(n_classes, dim), std::vector<double>(n_classes, 0.0)};
  }

  bool operator==(const SoftmaxClassifier&) const = default;
};

struct Classification {
  std::size_t label = 0;
  std::vector<double> probs;
};

inline std::vector<double> classifier_logits(std::span<const double> v, const SoftmaxClassifier& clf) {
  require(v.size() == clf.weights.cols(), ErrorKind::shape_mismatch, "document vector width differs from classifier");
  std::vector<double> z(clf.bias);
  for (std::size_t c = 0; c < z.size(); ++c) z[c] += dot(clf.weights.row(c), v);
  return z;
}

/// Softmax over W v + b; ties resolve to the lowest class index.
inline Classification classify(std::span<const double> v, const SoftmaxClassifier& clf) {
  const auto z = classifier_logits(v, clf);
  Classification out;
  out.probs = softmax_cross_entropy(z, 0).probs;
  out.label = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
  return out;
}

struct ClassifierConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 7;
  AdamConfig adam;
};

struct ClassifierTrainResult {
  SoftmaxClassifier classifier;  // snapshot from best_epoch
  std::size_t best_epoch = 0;
  std::vector<double> dev_accuracy;  // index e-1 holds epoch e
};

inline double accuracy_of(const SoftmaxClassifier& clf, const std::vector<std::vector<double>>& x,
                          std::span<const std::size_t> y) {
  if (x.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < x.size(); ++i) hits += classify(x[i], clf).label == y[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

/// Multinomial logistic regression by Adam on mini-batches, zero-initialised,
/// returning the epoch with the best dev accuracy (earliest on ties; the last
/// epoch when dev is empty).
inline ClassifierTrainResult train_classifier(const std::vector<std::vector<double>>& train_x,
                                              std::span<const std::size_t> train_y,
                                              const std::vector<std::vector<double>>& dev_x,
                                              std::span<const std::size_t> dev_y, std::size_t n_classes,
                                              const ClassifierConfig& cfg) {
  require(!train_x.empty(), ErrorKind::empty_train_set, "classification train split is empty");
  require(train_x.size() == train_y.size() && dev_x.size() == dev_y.size(), ErrorKind::length_mismatch,
          "vectors and labels differ in length");
  require(cfg.batch_size >= 1, ErrorKind::invalid_argument, "batch size must be positive");
  const std::size_t dim = train_x.front().size();
  Rng rng(cfg.seed);
  ClassifierTrainResult result;
  result.classifier = SoftmaxClassifier::zeros(n_classes, dim);
  auto current = result.classifier;
  auto grad = SoftmaxClassifier::zeros(n_classes, dim);
  Adam<double> adam_w(current.weights.size(), cfg.adam);
  Adam<double> adam_b(current.bias.size(), cfg.adam);

  std::vector<std::size_t> order(train_x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      grad.weights.fill(0.0);
      std::fill(grad.bias.begin(), grad.bias.end(), 0.0);
      const auto end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const auto& x = train_x[order[i]];
        const auto probs = classify(x, current).probs;
        for (std::size_t c = 0; c < n_classes; ++c) {
          const double g = probs[c] - (c == train_y[order[i]] ? 1.0 : 0.0);
          axpy(g, x, grad.weights.row(c));
          grad.bias[c] += g;
        }
      }
      adam_w.step(current.weights.values(), grad.weights.values());
      adam_b.step(std::span<double>(current.bias), std::span<const double>(grad.bias));
    }
    const double acc = accuracy_of(current, dev_x, dev_y);
    result.dev_accuracy.push_back(acc);
    if (acc > best || dev_x.empty()) {
      best = acc;
      result.best_epoch = epoch;
      result.classifier = current;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Joint fine-tuning of the encoder and the logistic layer.

struct FinetuneResult {
  SoftmaxClassifier classifier;
  ModelParameters<double> encoder;
  std::size_t best_epoch = 0;
  std::vector<double> dev_accuracy;
};

namespace detail {

/// Adam moments for every encoder block; embedding rows step lazily.
struct EncoderAdam {
  Matrix<double> words_m, words_v, ctx_m, ctx_v, proj_m, proj_v;

  explicit EncoderAdam(const ModelParameters<double>& p)
      : words_m(p.words.rows(), p.words.cols()), words_v(p.words.rows(), p.words.cols()),
        ctx_m(p.ctx_entities.rows(), p.ctx_entities.cols()), ctx_v(p.ctx_entities.rows(), p.ctx_entities.cols()),
        proj_m(p.projection.rows(), p.projection.cols()), proj_v(p.projection.rows(), p.projection.cols()) {}

  void step(ModelParameters<double>& p, const Gradients<double>& g, std::size_t t, const AdamConfig& cfg) {
    auto rows = [&](Matrix<double>& x, Matrix<double>& m, Matrix<double>& v, const SparseRows<double>& gr) {
      for (std::size_t s = 0; s < gr.size(); ++s) {
        const Id id = gr.ids()[s];
        adam_step(x.row(id), m.row(id), v.row(id), gr.row_at(s), t, cfg);
      }
    };
    rows(p.words, words_m, words_v, g.words);
    rows(p.ctx_entities, ctx_m, ctx_v, g.ctx_entities);
    if (p.variant == Variant::full) {
      adam_step(p.projection.values(), proj_m.values(), proj_v.values(), g.projection.values(), t, cfg);
    }
  }
};

}  // namespace detail

inline FinetuneResult finetune_classifier(const std::vector<Document>& train_docs,
                                          std::span<const std::size_t> train_y,
                                          const std::vector<Document>& dev_docs, std::span<const std::size_t> dev_y,
                                          std::size_t n_classes, ModelParameters<double> encoder,
                                          const ClassifierConfig& cfg) {
  require(!train_docs.empty(), ErrorKind::empty_train_set, "classification train split is empty");
  Rng rng(cfg.seed);
  FinetuneResult result;
  result.classifier = SoftmaxClassifier::zeros(n_classes, encoder.dim);
  result.encoder = encoder;
  auto clf = result.classifier;
  auto grad = SoftmaxClassifier::zeros(n_classes, encoder.dim);
  Adam<double> adam_w(clf.weights.size(), cfg.adam);
  Adam<double> adam_b(clf.bias.size(), cfg.adam);
  detail::EncoderAdam enc_adam(encoder);
  auto enc_grads = Gradients<double>::for_model(encoder);
  std::size_t step = 0;

  auto dev_accuracy = [&] {
    if (dev_docs.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < dev_docs.size(); ++i) {
      hits += classify(encode_inference(dev_docs[i], encoder), clf).label == dev_y[i] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(dev_docs.size());
  };

  std::vector<std::size_t> order(train_docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = -1.0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      grad.weights.fill(0.0);
      std::fill(grad.bias.begin(), grad.bias.end(), 0.0);
      enc_grads.clear();
      const auto end = std::min(order.size(), start + cfg.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        Rng unused(0);
        const auto enc = encode(train_docs[order[i]], encoder, 0.0, unused);
        const auto probs = classify(enc.v, clf).probs;
        std::vector<double> grad_v(encoder.dim, 0.0);
        for (std::size_t c = 0; c < n_classes; ++c) {
          const double g = probs[c] - (c == train_y[order[i]] ? 1.0 : 0.0);
          axpy(g, enc.v, grad.weights.row(c));
          axpy(g, clf.weights.row(c), grad_v);
          grad.bias[c] += g;
        }
        backprop_encoder<double>(enc, grad_v, encoder, enc_grads);
      }
      ++step;
      adam_w.step(clf.weights.values(), grad.weights.values());
      adam_b.step(std::span<double>(clf.bias), std::span<const double>(grad.bias));
      enc_adam.step(encoder, enc_grads, step, cfg.adam);
    }
    const double acc = dev_accuracy();
    result.dev_accuracy.push_back(acc);
    if (acc > best || dev_docs.empty()) {
      best = acc;
      result.best_epoch = epoch;
      result.classifier = clf;
      result.encoder = encoder;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

struct ClassificationEval {
  ClassificationReport report;
  std::size_t best_epoch = 0;
  std::vector<double> dev_accuracy;
  std::size_t train_size = 0, dev_size = 0, test_size = 0;
};

/// Trains on the train split, selects the epoch on dev, reports on test. The
/// corpus should already be preprocessed and have its dev split assigned.
inline ClassificationEval evaluate_classification(const LabeledCorpus& corpus, const ModelParameters<float>& model,
                                                  const Vocabulary& vocab, const ClassifierConfig& cfg,
                                                  bool finetune = false) {
  const auto options = inference_compile_options();
  std::vector<Document> docs[3];
  std::vector<std::size_t> labels[3];
  for (const auto& ld : corpus.documents) {
    const auto s = static_cast<std::size_t>(ld.split);
    docs[s].push_back(compile_document(ld.doc, vocab, options));
    labels[s].push_back(ld.label);
  }
  constexpr auto kTrain = static_cast<std::size_t>(Split::train);
  constexpr auto kDev = static_cast<std::size_t>(Split::dev);
  constexpr auto kTest = static_cast<std::size_t>(Split::test);

  ClassificationEval out;
  out.train_size = docs[kTrain].size();
  out.dev_size = docs[kDev].size();
  out.test_size = docs[kTest].size();
  const auto n_classes = corpus.classes.size();
  std::vector<std::size_t> predicted;

  if (finetune) {
    auto fit = finetune_classifier(docs[kTrain], labels[kTrain], docs[kDev], labels[kDev], n_classes,
                                   model.cast<double>(), cfg);
    for (const auto& d : docs[kTest]) predicted.push_back(classify(encode_inference(d, fit.encoder), fit.classifier).label);
    out.best_epoch = fit.best_epoch;
    out.dev_accuracy = std::move(fit.dev_accuracy);
  } else {
    std::vector<std::vector<double>> x[3];
    for (std::size_t s = 0; s < 3; ++s) {
      for (const auto& d : docs[s]) {
        const auto v = encode_inference(d, model);
        x[s].emplace_back(v.begin(), v.end());
      }
    }
    auto fit = train_classifier(x[kTrain], labels[kTrain], x[kDev], labels[kDev], n_classes, cfg);
    for (const auto& v : x[kTest]) predicted.push_back(classify(v, fit.classifier).label);
    out.best_epoch = fit.best_epoch;
    out.dev_accuracy = std::move(fit.dev_accuracy);
  }
  out.report = classification_report(predicted, labels[kTest], n_classes);
  return out;
}

}  // namespace textent
