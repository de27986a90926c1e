// Acceptance run: one PASS/FAIL line per criterion.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synthetic.hpp"
#include "textent/classify.hpp"
#include "textent/cli.hpp"
#include "textent/metrics.hpp"
#include "textent/model.hpp"
#include "textent/sampling.hpp"
#include "textent/sgns.hpp"
#include "textent/typing.hpp"
#include "textent/vectors.hpp"

namespace fs = std::filesystem;
using namespace textent;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

// 1 -------------------------------------------------------------------------

// Straightforward forward pass: v from the bag means, then log-sum-exp.
double reference_loss(const ModelParameters<double>& p, const Document& doc, Id target,
                      const std::vector<Id>& negs) {
  const std::size_t d = p.dim;
  std::vector<double> vw(d, 0.0), ve(d, 0.0), v(d, 0.0);
  for (Id w : doc.words)
    for (std::size_t i = 0; i < d; ++i) vw[i] += p.words(w, i) / static_cast<double>(doc.words.size());
  for (Id e : doc.ctx_entities)
    for (std::size_t i = 0; i < d; ++i) ve[i] += p.ctx_entities(e, i) / static_cast<double>(doc.ctx_entities.size());
  if (p.variant == Variant::word) v = vw;
  if (p.variant == Variant::entity) v = ve;
  if (p.variant == Variant::full) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) v[i] += p.projection(i, j) * vw[j] + p.projection(i, d + j) * ve[j];
  }
  auto score = [&](Id e) {
    double s = 0;
    for (std::size_t i = 0; i < d; ++i) s += p.targets(e, i) * v[i];
    return s;
  };
  double z = std::exp(score(target));
  for (Id n : negs) z += std::exp(score(n));
  return std::log(z) - score(target);
}

Outcome gradient_oracle() {
  Rng rng(2024);
  const std::size_t d = 5, n_words = 7, n_ctx = 5, n_targets = 8;
  double worst = 0.0;
  const double h = 1e-5;
  for (int inst = 0; inst < 1000; ++inst) {
    const auto variant = static_cast<Variant>(inst % 3);
    auto p = ModelParameters<double>::zeros(variant, d, n_words, n_ctx, n_targets);
    for (auto* m : {&p.words, &p.ctx_entities, &p.targets, &p.projection}) fill_uniform(m->values(), rng, -1.0, 1.0);
    Document doc;
    doc.target = static_cast<Id>(uniform_index(rng, n_targets));
    const auto n_w = uniform_index(rng, 5);  // 0..4
    const auto n_e = uniform_index(rng, 4);  // 0..3
    for (std::size_t i = 0; i < n_w; ++i) doc.words.push_back(static_cast<Id>(uniform_index(rng, n_words)));
    for (std::size_t i = 0; i < n_e; ++i) doc.ctx_entities.push_back(static_cast<Id>(uniform_index(rng, n_ctx)));
    const auto k = 1 + uniform_index(rng, 5);
    const auto negs = sample_negatives(doc.target, k, n_targets, rng);

    // Encode with dropout, then check against the retained bags.
    const auto enc = encode(doc, p, 0.3, rng);
    Document kept{doc.target, enc.words, enc.ctx_entities};
    const auto grads = backward(enc, doc.target, negs, p);

    auto check = [&](Matrix<double>& m, auto analytic_at) {
      for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
          const double saved = m(r, c);
          m(r, c) = saved + h;
          const double up = reference_loss(p, kept, doc.target, negs);
          m(r, c) = saved - h;
          const double down = reference_loss(p, kept, doc.target, negs);
          m(r, c) = saved;
          const double numeric = (up - down) / (2 * h);
          const double analytic = analytic_at(r, c);
          const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
          worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
      }
    };
    auto sparse = [](const SparseRows<double>& g) {
      return [&g](std::size_t r, std::size_t c) {
        const auto row = g.find(static_cast<Id>(r));
        return row ? (*row)[c] : 0.0;
      };
    };
    check(p.words, sparse(grads.words));
    check(p.ctx_entities, sparse(grads.ctx_entities));
    check(p.targets, sparse(grads.targets));
    if (variant == Variant::full) check(p.projection, [&](std::size_t r, std::size_t c) { return grads.projection(r, c); });
  }
  return {worst < 1e-4, "max relative error " + fmt(worst)};
}

// 2 -------------------------------------------------------------------------

Outcome closed_form_losses() {
  const auto p = ModelParameters<double>::zeros(Variant::full, 8, 10, 10, 300);
  Rng rng(5);
  const Document doc{3, {1, 2, 3}, {4}};
  const auto enc = encode(doc, p, 0.0, rng);
  const auto negs = sample_negatives(3, 100, 300, rng);
  const double sampled = sampled_softmax_loss<double>(enc.v, 3, negs, p.targets).loss;
  const bool ok_sampled = sampled == std::log(101.0);

  auto sg = init_sgns_params<double>(20, 8, rng);
  std::fill(sg.input.values().begin(), sg.input.values().end(), 0.0);
  const std::vector<Id> sg_negs(15, 7);
  const double pair = sgns_pair_loss(sg, 1, 2, sg_negs);
  const bool ok_pair = pair == 16.0 * std::log(2.0);

  double shift_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s(6), t(6);
    for (auto& x : s) x = uniform_real(rng, -5.0, 5.0);
    const double c = uniform_real(rng, -50.0, 50.0);
    for (std::size_t j = 0; j < s.size(); ++j) t[j] = s[j] + c;
    const auto a = softmax_cross_entropy(s, i % 6);
    const auto b = softmax_cross_entropy(t, i % 6);
    shift_err = std::max(shift_err, std::abs(a.loss - b.loss));
    for (std::size_t j = 0; j < s.size(); ++j) shift_err = std::max(shift_err, std::abs(a.probs[j] - b.probs[j]));
  }
  return {ok_sampled && ok_pair && shift_err < 1e-9,
          "sampled " + fmt(sampled) + (ok_sampled ? " == ln 101" : " != ln 101") + ", pair " + fmt(pair) +
              (ok_pair ? " == 16 ln 2" : " != 16 ln 2") + ", shift error " + fmt(shift_err)};
}

// 3 -------------------------------------------------------------------------

Outcome overfit_oracle() {
  const auto data = synth::toy_kb(50, 200, 20, 11);
  TrainConfig cfg;
  cfg.dim = 16;
  cfg.negatives = 10;
  cfg.dropout = 0.2;
  cfg.batch_size = 10;
  cfg.epochs = 200;
  cfg.seed = 3;
  const auto result = train<double>(data, nullptr, cfg);
  std::size_t top = 0;
  for (const auto& doc : data.documents) {
    top += full_softmax_rank<double>(encode_inference(doc, result.params), result.params.targets, doc.target) == 1;
  }
  const double frac = static_cast<double>(top) / static_cast<double>(data.documents.size());
  return {frac >= 0.95, "rank-1 fraction " + fmt(frac) + " after " + std::to_string(cfg.epochs) + " epochs"};
}

// 4 / 8 shared model -----------------------------------------------------------

synth::TypedWorld world() { return synth::TypedWorld{}; }

CorpusBuild typed_build() {
  CorpusConfig cc;
  return build_corpus(synth::typed_kb(world()), cc);
}

TrainConfig typed_train_config(Variant v) {
  TrainConfig cfg;
  cfg.variant = v;
  cfg.dim = 32;
  cfg.negatives = 20;
  cfg.dropout = 0.5;
  cfg.batch_size = 10;
  cfg.epochs = 30;
  cfg.seed = 17;
  return cfg;
}

Outcome end_to_end_typing() {
  const auto built = typed_build();
  std::istringstream tsv(synth::typing_tsv(world()));
  const auto data = read_typing_dataset(tsv);
  TypingConfig tc;
  tc.epochs = 100;
  double p1[3] = {0, 0, 0};
  double mic[3] = {0, 0, 0};
  for (int v = 0; v < 3; ++v) {
    const auto model = train<float>(built.dataset, nullptr, typed_train_config(static_cast<Variant>(v)));
    const auto r = evaluate_typing(data, target_vectors(model.params, built.dataset.vocab), tc);
    p1[v] = r.p_at_1;
    mic[v] = r.micro_f1;
  }
  const bool ok = p1[0] >= 0.90 && mic[0] >= 0.85 && p1[0] >= std::max(p1[1], p1[2]) - 0.02;
  return {ok, "full P@1 " + fmt(p1[0]) + " micro F1 " + fmt(mic[0]) + "; word P@1 " + fmt(p1[1]) + "; entity P@1 " +
                  fmt(p1[2])};
}

Outcome classification_sanity() {
  const auto built = typed_build();
  const auto model = train<float>(built.dataset, nullptr, typed_train_config(Variant::full));
  auto corpus = synth::labeled_corpus(world(), 4, 60, 20, 99);
  corpus = preprocess_corpus(corpus, 1, 0.05);
  assign_dev_split(corpus, 0.25, 7);
  ClassifierConfig cc;
  cc.epochs = 60;
  const auto r = evaluate_classification(corpus, model.params, built.dataset.vocab, cc);
  // The snapshot must come from the first epoch reaching the curve's maximum.
  const auto best = std::max_element(r.dev_accuracy.begin(), r.dev_accuracy.end());
  const auto expected = static_cast<std::size_t>(best - r.dev_accuracy.begin()) + 1;
  const bool ok = r.report.accuracy >= 0.95 && r.best_epoch == expected;
  return {ok, "test accuracy " + fmt(r.report.accuracy) + ", best epoch " + std::to_string(r.best_epoch) +
                  " (curve argmax " + std::to_string(expected) + ")"};
}

// 5 -------------------------------------------------------------------------

// Brute-force references, written from the definitions without the library helpers.
double ref_p1(const std::vector<std::vector<double>>& probs, const std::vector<std::set<Id>>& gold) {
  double hits = 0;
  for (std::size_t e = 0; e < probs.size(); ++e) {
    std::size_t arg = 0;
    for (std::size_t t = 1; t < probs[e].size(); ++t)
      if (probs[e][t] > probs[e][arg]) arg = t;
    hits += gold[e].count(static_cast<Id>(arg)) ? 1 : 0;
  }
  return hits / static_cast<double>(probs.size());
}

double ref_bep(const std::vector<std::vector<double>>& probs, const std::vector<std::set<Id>>& gold) {
  double sum = 0;
  for (std::size_t e = 0; e < probs.size(); ++e) {
    // A type is in the top |gold| when fewer than |gold| types outrank it.
    std::size_t hits = 0;
    for (Id g : gold[e]) {
      std::size_t above = 0;
      for (std::size_t t = 0; t < probs[e].size(); ++t) {
        if (probs[e][t] > probs[e][g] || (probs[e][t] == probs[e][g] && t < g)) ++above;
      }
      if (above < gold[e].size()) ++hits;
    }
    sum += static_cast<double>(hits) / static_cast<double>(gold[e].size());
  }
  return sum / static_cast<double>(probs.size());
}

struct Counts {
  double tp = 0, fp = 0, fn = 0;
};

Counts tally(const std::set<Id>& pred, const std::set<Id>& gold, std::size_t n_types) {
  Counts c;
  for (Id t = 0; t < n_types; ++t) {
    const bool p = pred.count(t), g = gold.count(t);
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
  }
  return c;
}

double ref_f1(const Counts& c) { return c.tp == 0 ? 0.0 : 2 * c.tp / (2 * c.tp + c.fp + c.fn); }

Outcome metric_oracle() {
  Rng rng(77);
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n_types = 1 + uniform_index(rng, 8);
    const std::size_t n_ent = 1 + uniform_index(rng, 12);
    std::vector<std::vector<double>> probs(n_ent, std::vector<double>(n_types));
    std::vector<std::set<Id>> gold(n_ent), pred(n_ent);
    std::vector<TypeSet> gold_v(n_ent);
    std::vector<Assignment> assign;
    for (std::size_t e = 0; e < n_ent; ++e) {
      // Coarse values so ties occur.
      for (auto& x : probs[e]) x = static_cast<double>(uniform_index(rng, 5)) / 4.0;
      while (gold[e].empty())
        for (Id t = 0; t < n_types; ++t)
          if (uniform01(rng) < 0.4) gold[e].insert(t);
      for (Id t = 0; t < n_types; ++t)
        if (uniform01(rng) < 0.4) pred[e].insert(t);
      gold_v[e] = TypeSet(gold[e].begin(), gold[e].end());
      assign.push_back({TypeSet(pred[e].begin(), pred[e].end()), gold_v[e]});
    }
    const auto ranked = [&] {
      std::vector<std::vector<Id>> r;
      for (const auto& p : probs) r.push_back(rank_types(p));
      return r;
    }();
    track(precision_at_1(ranked, gold_v), ref_p1(probs, gold));
    track(breakeven_point(ranked, gold_v), ref_bep(probs, gold));

    double exact = 0, macro = 0;
    Counts pooled;
    for (std::size_t e = 0; e < n_ent; ++e) {
      exact += pred[e] == gold[e];
      const auto c = tally(pred[e], gold[e], n_types);
      macro += ref_f1(c);
      pooled.tp += c.tp, pooled.fp += c.fp, pooled.fn += c.fn;
    }
    track(strict_accuracy(assign), exact / static_cast<double>(n_ent));
    track(micro_f1(assign), ref_f1(pooled));
    track(macro_f1_entities(assign), macro / static_cast<double>(n_ent));

    // Single-label classification through a confusion matrix.
    const std::size_t n_classes = 1 + uniform_index(rng, 6);
    const std::size_t n = 1 + uniform_index(rng, 20);
    std::vector<std::size_t> yp(n), yg(n);
    std::vector<std::vector<double>> conf(n_classes, std::vector<double>(n_classes, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      yp[i] = uniform_index(rng, n_classes);
      yg[i] = uniform_index(rng, n_classes);
      conf[yg[i]][yp[i]] += 1;
    }
    double diag = 0, f1_sum = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      diag += conf[c][c];
      double row = 0, col = 0;
      for (std::size_t o = 0; o < n_classes; ++o) row += conf[c][o], col += conf[o][c];
      f1_sum += conf[c][c] == 0 ? 0.0 : 2 * conf[c][c] / (row + col);
    }
    const auto rep = classification_report(yp, yg, n_classes);
    track(rep.accuracy, diag / static_cast<double>(n));
    track(rep.macro_f1, f1_sum / static_cast<double>(n_classes));
  }

  // Hand-tallied cases.
  const std::vector<Assignment> hand{{{1}, {1, 2}}, {{3, 4}, {3}}};
  const bool micro_ok = micro_f1(hand) == 2.0 / 3.0;
  const bool macro_ent_ok = std::abs(macro_f1_entities(hand) - 2.0 / 3.0) < 1e-15;
  const std::vector<std::size_t> gold{0, 0, 1, 1}, predicted{0, 1, 1, 1};
  const auto rep = classification_report(predicted, gold, 2);
  const bool cls_ok = rep.accuracy == 0.75 && std::abs(rep.macro_f1 - (2.0 / 3.0 + 0.8) / 2.0) < 1e-15;
  const bool ok = worst <= 1e-12 && micro_ok && macro_ent_ok && cls_ok;
  return {ok, "max deviation " + fmt(worst) + ", hand cases " + (micro_ok && macro_ent_ok && cls_ok ? "exact" : "off") +
                  " (macro " + fmt(rep.macro_f1) + ")"};
}

// 6 -------------------------------------------------------------------------

Outcome threshold_oracle() {
  Rng rng(31);
  std::size_t mismatches = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 20, n_types = 4;
    std::vector<std::vector<double>> probs(n, std::vector<double>(n_types));
    std::vector<TypeSet> gold(n);
    for (std::size_t e = 0; e < n; ++e) {
      for (auto& x : probs[e]) x = std::round(uniform01(rng) * 10.0) / 10.0;
      for (Id t = 0; t < n_types; ++t)
        if (uniform01(rng) < (t == 3 ? 0.0 : 0.35)) gold[e].push_back(t);
    }
    const auto tuned = tune_thresholds(probs, gold, n_types);
    for (std::size_t t = 0; t < n_types; ++t) {
      std::set<double> cands;
      for (const auto& p : probs) cands.insert(p[t]);
      cands.insert(kAssignNothing);
      double best = 0.0;
      auto f1_at = [&](double theta) {
        Counts c;
        for (std::size_t e = 0; e < n; ++e) {
          const bool p = probs[e][t] >= theta;
          const bool g = std::find(gold[e].begin(), gold[e].end(), t) != gold[e].end();
          c.tp += p && g, c.fp += p && !g, c.fn += !p && g;
        }
        return ref_f1(c);
      };
      for (double theta : cands) best = std::max(best, f1_at(theta));
      if (std::abs(tuned.dev_f1[t] - best) > 1e-12 || std::abs(f1_at(tuned.theta[t]) - best) > 1e-12) ++mismatches;
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 400 types differ from exhaustive search"};
}

// 7 -------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::vector<std::string>& args, std::ostream& out) {
  std::vector<std::string> argv{"textent"};
  argv.insert(argv.end(), args.begin(), args.end());
  std::ostringstream err;
  const int code = cli::run(argv, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

// Runs every subcommand in dir and returns the produced files' bytes.
std::vector<std::pair<std::string, std::string>> pipeline(const fs::path& dir, const fs::path& inputs) {
  fs::create_directories(dir);
  auto P = [&](const std::string& name) { return (dir / name).string(); };
  auto I = [&](const std::string& name) { return (inputs / name).string(); };
  std::ostringstream out;
  const std::string seed = "5";
  int rc = 0;
  rc |= cli({"build-corpus", "--input", I("kb.jsonl"), "--output", P("data.txe")}, out);
  rc |= cli({"pretrain", "--corpus", P("data.txe"), "--dim", "16", "--epochs", "2", "--min-count", "1", "--seed", seed,
             "--threads", "1", "--output", P("pre.vec")},
            out);
  rc |= cli({"train", "--data", P("data.txe"), "--init", P("pre.vec"), "--dim", "16", "--negatives", "10",
             "--epochs", "3", "--batch-size", "10", "--seed", seed, "--threads", "1", "--output", P("model.txm")},
            out);
  rc |= cli({"encode", "--model", P("model.txm"), "--vocab", P("data.txe"), "--input", I("kb.jsonl"), "--output",
             P("docs.tsv")},
            out);
  rc |= cli({"eval-typing", "--model", P("model.txm"), "--vocab", P("data.txe"), "--dataset", I("types.tsv"),
             "--epochs", "10", "--seed", seed, "--report", P("typing.json")},
            out);
  rc |= cli({"eval-classify", "--model", P("model.txm"), "--vocab", P("data.txe"), "--corpus", I("labeled.jsonl"),
             "--epochs", "5", "--seed", seed, "--report", P("classify.json")},
            out);
  rc |= cli({"nn", "--model", P("model.txm"), "--vocab", P("data.txe"), "--text", "t0w1 t0w2 cw3 The Mention",
             "--annotations", I("ann.json"), "--top", "5", "--output", P("nn.txt")},
            out);
  if (rc != 0) return {};
  std::vector<std::pair<std::string, std::string>> files;
  for (const char* f : {"data.txe", "data.txe.json", "pre.vec", "model.txm", "model.txm.json", "docs.tsv",
                        "typing.json", "classify.json", "nn.txt"}) {
    files.emplace_back(f, slurp(dir / f));
  }
  return files;
}

Outcome determinism(const fs::path& root) {
  const auto inputs = root / "inputs";
  fs::create_directories(inputs);
  synth::TypedWorld w;
  w.entities_per_type = 10;
  synth::write_raw_jsonl(inputs / "kb.jsonl", synth::typed_kb(w));
  {
    std::ofstream(inputs / "types.tsv") << synth::typing_tsv(w);
    synth::write_labeled_jsonl(inputs / "labeled.jsonl", synth::labeled_corpus(w, 3, 20, 5, 4));
    std::ofstream(inputs / "ann.json") << R"([{"start": 3, "end": 5, "entity": "T0ctx1", "score": 0.9}])";
  }
  // Same paths both times: the sidecars record them.
  const auto a = pipeline(root / "run", inputs);
  fs::remove_all(root / "run");
  const auto b = pipeline(root / "run", inputs);
  std::string detail;
  bool ok = !a.empty() && a.size() == b.size();
  for (std::size_t i = 0; ok && i < a.size(); ++i) {
    if (a[i].second != b[i].second || a[i].second.empty()) {
      ok = false;
      detail = a[i].first + " differs";
    }
  }
  if (a.empty()) detail = "a subcommand failed";

  // Embedding file round trip.
  Rng rng(8);
  VectorStore store(7);
  for (int i = 0; i < 50; ++i) {
    std::vector<float> v(7);
    for (auto& x : v) x = static_cast<float>(uniform_real(rng, -3.0, 3.0) * std::pow(10.0, uniform_index(rng, 9) - 4.0));
    store.add((i % 2 ? "ENTITY/e" : "w") + std::to_string(i), v);
  }
  save_vectors(store, root / "rt.vec");
  const bool rt = load_vectors(root / "rt.vec") == store;
  if (!rt) detail += " vector round trip inexact";
  return {ok && rt, ok && rt ? "9 artifacts identical across two runs; vector round trip exact" : detail};
}

// 9 -------------------------------------------------------------------------

Outcome pretraining_sanity() {
  const auto stream = synth::two_cliques(10, 400, 20, 12);
  SgnsConfig cfg;
  cfg.dim = 20;
  cfg.window = 5;
  cfg.negatives = 5;
  cfg.min_count = 1;
  cfg.epochs = 5;
  cfg.seed = 9;
  const auto res = train_skipgram(stream, cfg);
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < res.vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < res.vectors.size(); ++j) {
      const double c = cosine(res.vectors.vector(i), res.vectors.vector(j));
      if (res.vectors.name(i)[0] == res.vectors.name(j)[0]) {
        intra += c, ++n_intra;
      } else {
        inter += c, ++n_inter;
      }
    }
  }
  intra /= static_cast<double>(n_intra);
  inter /= static_cast<double>(n_inter);
  return {intra - inter >= 0.2, "intra " + fmt(intra) + " inter " + fmt(inter) + " margin " + fmt(intra - inter)};
}

// 10 ------------------------------------------------------------------------

Outcome sampler_statistics() {
  const std::size_t draws = 1000000;
  Rng rng(101);
  bool ok = true;
  double worst_z = 0.0;
  auto check = [&](const std::vector<double>& observed, const std::vector<double>& expected_p) {
    for (std::size_t i = 0; i < observed.size(); ++i) {
      const double n = static_cast<double>(draws);
      const double p = expected_p[i];
      const double sigma = std::sqrt(n * p * (1 - p));
      const double z = sigma > 0 ? std::abs(observed[i] - n * p) / sigma : std::abs(observed[i]);
      worst_z = std::max(worst_z, z);
      if (z > 3.0) ok = false;
    }
  };

  // Uniform, target 3 out of 8.
  {
    std::vector<double> seen(8, 0.0);
    const auto negs = sample_negatives(3, draws, 8, rng);
    for (Id n : negs) seen[n] += 1;
    if (seen[3] != 0) ok = false;
    std::vector<double> p(8, 1.0 / 7.0);
    p[3] = 0.0;
    check(seen, p);
  }
  // Unigram^0.75 table.
  const std::vector<std::uint64_t> counts{1, 3, 16, 40, 81, 200};
  {
    const auto table = SamplingTable::build(counts, 0.75);
    std::vector<double> seen(counts.size(), 0.0);
    for (std::size_t i = 0; i < draws; ++i) seen[table.sample(rng)] += 1;
    double z = 0;
    for (auto c : counts) z += std::pow(static_cast<double>(c), 0.75);
    std::vector<double> p;
    for (auto c : counts) p.push_back(std::pow(static_cast<double>(c), 0.75) / z);
    check(seen, p);
  }
  // Unigram negatives exclude the target and renormalise the rest.
  {
    const NegativeSampler sampler(NegativeDistribution::unigram, counts);
    const Id target = 5;
    std::vector<double> seen(counts.size(), 0.0);
    const auto negs = sampler.draw(target, draws, rng);
    for (Id n : negs) seen[n] += 1;
    if (seen[target] != 0) ok = false;
    double z = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
      if (i != target) z += std::pow(static_cast<double>(counts[i]), 0.75);
    std::vector<double> p;
    for (std::size_t i = 0; i < counts.size(); ++i)
      p.push_back(i == target ? 0.0 : std::pow(static_cast<double>(counts[i]), 0.75) / z);
    check(seen, p);
  }
  return {ok, "target never drawn; worst deviation " + fmt(worst_z) + " sigma"};
}

}  // namespace

int main() {
  const auto root = fs::temp_directory_path() / ("textent_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(root);

  struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient oracle", 30, gradient_oracle},
      {2, "closed-form losses", 10, closed_form_losses},
      {3, "overfit oracle", 120, overfit_oracle},
      {4, "end-to-end typing", 300, end_to_end_typing},
      {5, "metric oracle", 30, metric_oracle},
      {6, "threshold oracle", 30, threshold_oracle},
      {7, "determinism", 300, [&] { return determinism(root); }},
      {8, "classification sanity", 300, classification_sanity},
      {9, "pretraining sanity", 120, pretraining_sanity},
      {10, "sampler statistics", 60, sampler_statistics},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_seconds) {
      o.pass = false;
      o.detail += "; over time limit";
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
    failures += o.pass ? 0 : 1;
  }
  fs::remove_all(root);
  return failures == 0 ? 0 : 1;
}
