#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "textent/classify.hpp"
#include "textent/common.hpp"
#include "textent/corpus.hpp"
#include "textent/model.hpp"
#include "textent/sgns.hpp"
#include "textent/typing.hpp"
#include "textent/vectors.hpp"

namespace textent::cli {

using nlohmann::json;

/// Record of one run, written next to its primary output as <output>.manifest.json.
struct RunManifest {
  std::string subcommand;
  json config = json::object();
  json inputs = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;

  void add_input(const std::filesystem::path& path) { inputs[path.string()] = hex64(hash_file(path)); }

  void write(const std::filesystem::path& output, double wall_seconds) const {
    json j;
    j["subcommand"] = subcommand;
    j["config"] = config;
    j["inputs"] = inputs;
    j["seed"] = seed;
    j["wall_time_seconds"] = wall_seconds;
    j["artifacts"] = artifacts;
    const auto path = output.string() + ".manifest.json";
    auto out = open_output(path);
    out << j.dump(2) << '\n';
  }
};

inline void write_json(const std::filesystem::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

/// Every configurable option of a subcommand with its resolved value.
inline json resolved_config(const CLI::App& app) {
  json j = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
    const auto& name = opt->get_lnames().front();
    std::string value;
    if (opt->count() > 0) {
      value = opt->results().back();
    } else {
      value = opt->get_default_str();
    }
    if (opt->get_expected_min() == 0) {
      j[name] = opt->count() > 0 ? CLI::detail::to_flag_value(value) > 0 : value == "true";
    } else if (const auto type = opt->get_type_name(); type == "INT" || type == "UINT" || type == "FLOAT") {
      j[name] = json::parse(value);
    } else {
      j[name] = value;
    }
  }
  return j;
}

/// Reads flat TOML keys and turns them into "--key=value" arguments.
inline std::vector<std::string> config_arguments(const std::string& path) {
  auto in = open_input(path);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(ErrorKind::malformed_file, path + ": " + e.what());
  }
  std::vector<std::string> args;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--" || item.inputs.empty()) continue;
    std::string value = item.inputs.front();
    for (std::size_t i = 1; i < item.inputs.size(); ++i) value += "," + item.inputs[i];
    // An empty string is every text option's default, and "--key=" would take the next argument.
    if (value.empty()) continue;
    args.push_back("--" + item.name + "=" + value);
  }
  return args;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

inline CompiledFile load_vocab_for(const SavedModel& model, const std::string& vocab_path) {
  auto file = load_compiled(vocab_path);
  require(file.dataset.vocab.fingerprint() == model.vocab_fingerprint, ErrorKind::shape_mismatch,
          vocab_path + ": vocabulary does not match the model");
  return file;
}

// ---------------------------------------------------------------------------
// Subcommands

struct BuildCorpusOptions {
  std::string input, keep_entities, output;
  std::uint64_t min_word_count = 5, min_entity_count = 3, min_links = 5;
  double min_score = 0.05;
  std::size_t max_words = 2000, max_entities = 300;
  bool truncate_before_oov = false, dedup_entities = false;
};

inline void build_corpus_cmd(const BuildCorpusOptions& o, RunManifest& m, std::ostream& log) {
  CorpusConfig cfg;
  cfg.min_word_count = o.min_word_count;
  cfg.min_entity_count = o.min_entity_count;
  cfg.min_links = o.min_links;
  cfg.min_score = o.min_score;
  cfg.compile.max_words = o.max_words;
  cfg.compile.max_entities = o.max_entities;
  cfg.compile.truncate_before_oov = o.truncate_before_oov;
  cfg.compile.dedup_entities = o.dedup_entities;
  if (!o.keep_entities.empty()) {
    for (auto& e : read_lines(o.keep_entities)) cfg.keep_entities.insert(e);
    m.add_input(o.keep_entities);
  }
  const auto raw = read_corpus(std::filesystem::path(o.input));
  m.add_input(o.input);
  const auto built = build_corpus(raw, cfg);
  save_compiled(o.output, built.dataset, built.pretrain_stream);
  const auto& v = built.dataset.vocab;
  json side;
  side["format"] = "TXE1";
  side["input_documents"] = built.input_documents;
  side["selected_documents"] = built.selected_documents;
  side["documents"] = built.dataset.documents.size();
  side["words"] = v.words.size();
  side["ctx_entities"] = v.ctx_entities.size();
  side["target_entities"] = v.target_entities.size();
  side["pretrain_sequences"] = built.pretrain_stream.size();
  side["vocab_fingerprint"] = hex64(v.fingerprint());
  side["config"] = m.config;
  write_json(o.output + ".json", side);
  m.artifacts = {o.output, o.output + ".json"};
  log << "documents " << built.dataset.documents.size() << " words " << v.words.size() << " ctx_entities "
      << v.ctx_entities.size() << " targets " << v.target_entities.size() << '\n';
}

struct PretrainOptions {
  std::string corpus, output;
  SgnsConfig sgns;
};

inline void pretrain_cmd(const PretrainOptions& o, RunManifest& m, std::ostream& log) {
  const auto file = load_compiled(o.corpus);
  m.add_input(o.corpus);
  const auto result = train_skipgram(file.pretrain_stream, o.sgns);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    log << "epoch " << e + 1 << " loss " << format_real(result.epoch_loss[e]) << '\n';
  }
  save_vectors(result.vectors, o.output);
  m.artifacts = {o.output};
}

struct TrainOptions {
  std::string data, init, output, variant = "full", sampler = "uniform";
  TrainConfig train;
};

inline void train_cmd(TrainOptions o, RunManifest& m, std::ostream& log) {
  o.train.variant = parse_variant(o.variant);
  o.train.negative_distribution = parse_negative_distribution(o.sampler);
  const auto file = load_compiled(o.data);
  m.add_input(o.data);
  std::optional<VectorStore> pretrained;
  if (!o.init.empty()) {
    pretrained = load_vectors(o.init);
    m.add_input(o.init);
  }
  const auto result = train<float>(file.dataset, pretrained ? &*pretrained : nullptr, o.train,
                                   [&](std::size_t epoch, double loss, const ModelParameters<float>&) {
                                     log << "epoch " << epoch << " loss " << format_real(loss) << '\n';
                                   });
  const auto fingerprint = file.dataset.vocab.fingerprint();
  save_model(o.output, result.params, fingerprint);
  json side;
  side["format"] = "TXM1";
  side["variant"] = std::string(to_string(o.train.variant));
  side["dim"] = o.train.dim;
  side["vocab_fingerprint"] = hex64(fingerprint);
  side["config"] = m.config;
  side["epoch_loss"] = result.epoch_loss;
  side["pretrained_rows"] = {{"words", result.init.pretrained_words},
                             {"ctx_entities", result.init.pretrained_ctx_entities},
                             {"target_entities", result.init.pretrained_targets}};
  write_json(o.output + ".json", side);
  m.artifacts = {o.output, o.output + ".json"};
}

struct EncodeOptions {
  std::string model, vocab, input, output;
  double min_score = 0.05;
};

inline void encode_cmd(const EncodeOptions& o, RunManifest& m, std::ostream&) {
  const auto model = load_model(o.model);
  const auto vocab = load_vocab_for(model, o.vocab);
  const auto docs = read_corpus(std::filesystem::path(o.input));
  for (const auto& p : {o.model, o.vocab, o.input}) m.add_input(p);
  auto out = open_output(o.output);
  const auto options = inference_compile_options();
  for (const auto& raw : docs) {
    const auto doc = compile_document(normalize(filter_annotations(raw, o.min_score)), vocab.dataset.vocab, options);
    const auto v = encode_inference(doc, model.params);
    out << raw.id;
    for (float x : v) out << '\t' << format_real(x);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::io, "write failed: " + o.output);
  m.artifacts = {o.output};
}

struct EvalTypingOptions {
  std::string model, vocab, vectors, dataset, report, bep = "per-entity";
  TypingConfig typing;
};

inline void eval_typing_cmd(const EvalTypingOptions& o, RunManifest& m, std::ostream& log) {
  require(o.model.empty() != o.vectors.empty(), ErrorKind::invalid_argument,
          "give exactly one of --model or --vectors");
  VectorStore store;
  if (!o.model.empty()) {
    require(!o.vocab.empty(), ErrorKind::invalid_argument, "--model needs --vocab");
    const auto model = load_model(o.model);
    const auto vocab = load_vocab_for(model, o.vocab);
    store = target_vectors(model.params, vocab.dataset.vocab);
    m.add_input(o.model);
    m.add_input(o.vocab);
  } else {
    store = load_vectors(o.vectors);
    m.add_input(o.vectors);
  }
  require(o.bep == "per-entity" || o.bep == "global", ErrorKind::invalid_argument,
          "--bep must be per-entity or global");
  const auto data = load_typing_dataset(o.dataset);
  m.add_input(o.dataset);
  TypingTrainResult fit;
  const auto r = evaluate_typing(data, store, o.typing, o.bep == "global" ? BepMode::global : BepMode::per_entity,
                                 &fit);
  json j;
  j["p_at_1"] = r.p_at_1;
  j["bep"] = r.bep;
  j["accuracy"] = r.accuracy;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["best_epoch"] = r.best_epoch;
  json thresholds = json::object();
  for (std::size_t t = 0; t < data.types.size(); ++t) thresholds[data.types[t]] = r.thresholds.theta[t];
  j["per_type_thresholds"] = thresholds;
  j["dev_p_at_1"] = fit.dev_p_at_1;
  j["test_entities"] = r.test_entities;
  j["test_missing"] = r.test_missing;
  write_json(o.report, j);
  m.artifacts = {o.report};
  log << "p_at_1 " << format_real(r.p_at_1) << " micro_f1 " << format_real(r.micro_f1) << '\n';
}

struct EvalClassifyOptions {
  std::string model, vocab, corpus, report;
  double dev_frac = 0.1, min_score = 0.05;
  std::uint64_t min_count = 5;
  bool finetune = false;
  ClassifierConfig classifier;
};

inline void eval_classify_cmd(const EvalClassifyOptions& o, RunManifest& m, std::ostream& log) {
  const auto model = load_model(o.model);
  const auto vocab = load_vocab_for(model, o.vocab);
  auto corpus = preprocess_corpus(load_labeled_corpus(o.corpus), o.min_count, o.min_score);
  for (const auto& p : {o.model, o.vocab, o.corpus}) m.add_input(p);
  assign_dev_split(corpus, o.dev_frac, o.classifier.seed);
  const auto r = evaluate_classification(corpus, model.params, vocab.dataset.vocab, o.classifier, o.finetune);
  json j;
  j["accuracy"] = r.report.accuracy;
  j["macro_f1"] = r.report.macro_f1;
  json per_class = json::object();
  for (std::size_t c = 0; c < corpus.classes.size(); ++c) per_class[corpus.classes[c]] = r.report.per_class_f1[c];
  j["per_class_f1"] = per_class;
  j["best_epoch"] = r.best_epoch;
  j["dev_accuracy"] = r.dev_accuracy;
  j["encoder"] = o.finetune ? "finetuned" : "frozen";
  j["train_documents"] = r.train_size;
  j["dev_documents"] = r.dev_size;
  j["test_documents"] = r.test_size;
  write_json(o.report, j);
  m.artifacts = {o.report};
  log << "accuracy " << format_real(r.report.accuracy) << " macro_f1 " << format_real(r.report.macro_f1) << '\n';
}

struct NnOptions {
  std::string model, vocab, text, annotations, output;
  std::size_t top = 10;
  double min_score = 0.05;
};

inline void nn_cmd(const NnOptions& o, RunManifest& m, std::ostream& out) {
  const auto model = load_model(o.model);
  const auto vocab = load_vocab_for(model, o.vocab);
  m.add_input(o.model);
  m.add_input(o.vocab);
  RawDocument doc;
  doc.id = "query";
  std::istringstream words(o.text);
  for (std::string w; words >> w;) doc.tokens.push_back(w);
  if (!o.annotations.empty()) {
    auto in = open_input(o.annotations);
    try {
      doc.annotations = parse_annotations(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::malformed_file, o.annotations + ": " + e.what());
    }
    m.add_input(o.annotations);
  }
  validate(doc);
  const auto compiled =
      compile_document(normalize(filter_annotations(doc, o.min_score)), vocab.dataset.vocab, inference_compile_options());
  const auto v = encode_inference(compiled, model.params);
  const auto neighbors = nearest_entities(v, target_vectors(model.params, vocab.dataset.vocab), o.top);
  std::ofstream file;
  if (!o.output.empty()) file = open_output(o.output);
  std::ostream& dst = o.output.empty() ? out : file;
  for (const auto& n : neighbors) dst << n.entity << '\t' << format_real(n.cosine) << '\n';
  if (!o.output.empty()) m.artifacts = {o.output};
}

// ---------------------------------------------------------------------------

/// Runs one subcommand. Exit codes: 0 success or help, 1 usage error, 2 data error.
inline int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"TextEnt: entity and document embeddings from a knowledge base", "textent"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);

  std::string config_path;
  bool dump = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "TOML file with flag values; explicit flags win")->configurable(false);
    sub->add_flag("--dump-config", dump, "print the resolved configuration as TOML and exit")->configurable(false);
  };

  BuildCorpusOptions bc;
  auto* s_bc = app.add_subcommand("build-corpus", "filter, index and compile an annotated corpus");
  s_bc->add_option("--input", bc.input, "annotated corpus (JSON lines)")->required();
  s_bc->add_option("--output", bc.output, "compiled dataset")->required();
  s_bc->add_option("--keep-entities", bc.keep_entities, "entities kept regardless of link count, one per line");
  s_bc->add_option("--min-word-count", bc.min_word_count, "minimum word frequency");
  s_bc->add_option("--min-entity-count", bc.min_entity_count, "minimum contextual entity frequency");
  s_bc->add_option("--min-links", bc.min_links, "minimum incoming links of a target entity");
  s_bc->add_option("--min-score", bc.min_score, "minimum annotation relevance score");
  s_bc->add_option("--max-words", bc.max_words, "words kept per document");
  s_bc->add_option("--max-entities", bc.max_entities, "contextual entities kept per document");
  s_bc->add_flag("--truncate-before-oov", bc.truncate_before_oov, "truncate before dropping unknown tokens");
  s_bc->add_flag("--dedup-entities", bc.dedup_entities, "keep each contextual entity once per document");
  common(s_bc);

  PretrainOptions pt;
  auto* s_pt = app.add_subcommand("pretrain", "skip-gram pretraining of word and entity vectors");
  s_pt->add_option("--corpus", pt.corpus, "compiled dataset")->required();
  s_pt->add_option("--output", pt.output, "vector file")->required();
  s_pt->add_option("--dim", pt.sgns.dim, "vector size");
  s_pt->add_option("--window", pt.sgns.window, "maximum context window");
  s_pt->add_option("--negatives", pt.sgns.negatives, "negative samples per pair");
  s_pt->add_option("--min-count", pt.sgns.min_count, "minimum token frequency");
  s_pt->add_option("--epochs", pt.sgns.epochs, "passes over the corpus");
  s_pt->add_option("--subsample", pt.sgns.subsample_threshold, "frequent token subsampling threshold");
  s_pt->add_option("--lr", pt.sgns.initial_lr, "initial learning rate");
  s_pt->add_option("--seed", pt.sgns.seed, "random seed");
  s_pt->add_option("--threads", pt.sgns.threads, "worker threads");
  common(s_pt);

  TrainOptions tr;
  auto* s_tr = app.add_subcommand("train", "train a TextEnt model");
  s_tr->add_option("--data", tr.data, "compiled dataset")->required();
  s_tr->add_option("--output", tr.output, "model file")->required();
  s_tr->add_option("--init", tr.init, "pretrained vectors");
  s_tr->add_option("--variant", tr.variant, "full, word or entity");
  s_tr->add_option("--dim", tr.train.dim, "embedding size");
  s_tr->add_option("--negatives", tr.train.negatives, "negative entities per document");
  s_tr->add_option("--dropout", tr.train.dropout, "word dropout probability");
  s_tr->add_option("--batch-size", tr.train.batch_size, "documents per update");
  s_tr->add_option("--epochs", tr.train.epochs, "passes over the data");
  s_tr->add_option("--rho", tr.train.adadelta_rho, "Adadelta decay");
  s_tr->add_option("--eps", tr.train.adadelta_eps, "Adadelta epsilon");
  s_tr->add_option("--negative-sampler", tr.sampler, "uniform or unigram");
  s_tr->add_option("--threads", tr.train.threads, "worker threads");
  s_tr->add_option("--seed", tr.train.seed, "random seed");
  common(s_tr);

  EncodeOptions en;
  auto* s_en = app.add_subcommand("encode", "encode documents with a trained model");
  s_en->add_option("--model", en.model, "model file")->required();
  s_en->add_option("--vocab", en.vocab, "compiled dataset the model was trained on")->required();
  s_en->add_option("--input", en.input, "documents (JSON lines)")->required();
  s_en->add_option("--output", en.output, "TSV of document vectors")->required();
  s_en->add_option("--min-score", en.min_score, "minimum annotation relevance score");
  common(s_en);

  EvalTypingOptions ty;
  auto* s_ty = app.add_subcommand("eval-typing", "fine-grained entity typing evaluation");
  s_ty->add_option("--model", ty.model, "model file");
  s_ty->add_option("--vocab", ty.vocab, "compiled dataset the model was trained on");
  s_ty->add_option("--vectors", ty.vectors, "entity vector file instead of a model");
  s_ty->add_option("--dataset", ty.dataset, "typing dataset (TSV)")->required();
  s_ty->add_option("--report", ty.report, "report JSON")->required();
  s_ty->add_option("--hidden", ty.typing.hidden_units, "hidden units");
  s_ty->add_option("--epochs", ty.typing.epochs, "training epochs");
  s_ty->add_option("--batch-size", ty.typing.batch_size, "entities per update");
  s_ty->add_option("--lr", ty.typing.adam.lr, "Adam learning rate");
  s_ty->add_option("--seed", ty.typing.seed, "random seed");
  s_ty->add_option("--bep", ty.bep, "per-entity or global");
  common(s_ty);

  EvalClassifyOptions cl;
  auto* s_cl = app.add_subcommand("eval-classify", "document classification evaluation");
  s_cl->add_option("--model", cl.model, "model file")->required();
  s_cl->add_option("--vocab", cl.vocab, "compiled dataset the model was trained on")->required();
  s_cl->add_option("--corpus", cl.corpus, "labeled corpus (JSON lines)")->required();
  s_cl->add_option("--report", cl.report, "report JSON")->required();
  s_cl->add_option("--dev-frac", cl.dev_frac, "share of train documents held out for epoch selection");
  s_cl->add_option("--min-count", cl.min_count, "minimum word and entity frequency");
  s_cl->add_option("--min-score", cl.min_score, "minimum annotation relevance score");
  s_cl->add_option("--epochs", cl.classifier.epochs, "training epochs");
  s_cl->add_option("--batch-size", cl.classifier.batch_size, "documents per update");
  s_cl->add_option("--lr", cl.classifier.adam.lr, "Adam learning rate");
  s_cl->add_option("--seed", cl.classifier.seed, "random seed");
  s_cl->add_flag("--finetune", cl.finetune, "update the encoder jointly with the classifier");
  common(s_cl);

  NnOptions nn;
  auto* s_nn = app.add_subcommand("nn", "nearest entities to an encoded sentence");
  s_nn->add_option("--model", nn.model, "model file")->required();
  s_nn->add_option("--vocab", nn.vocab, "compiled dataset the model was trained on")->required();
  s_nn->add_option("--text", nn.text, "whitespace-tokenized sentence")->required();
  s_nn->add_option("--annotations", nn.annotations, "JSON array of entity annotations");
  s_nn->add_option("--top", nn.top, "number of neighbours");
  s_nn->add_option("--min-score", nn.min_score, "minimum annotation relevance score");
  s_nn->add_option("--output", nn.output, "write neighbours here instead of standard output");
  common(s_nn);

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  try {
    // Values from --config go first so later explicit flags take precedence.
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
      }
      if (path.empty()) continue;
      const auto injected = config_arguments(path);
      args.insert(args.begin() + 1, injected.begin(), injected.end());
      break;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    if (std::find(args.begin(), args.end(), "--dump-config") != args.end()) {
      // Required inputs are not needed just to print the configuration.
      for (auto* sub : app.get_subcommands({})) {
        for (auto* opt : sub->get_options()) opt->required(false);
      }
    }
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (dump) {
    out << sub->config_to_str(true, false);
    return 0;
  }

  RunManifest manifest;
  manifest.subcommand = sub->get_name();
  manifest.config = resolved_config(*sub);
  const auto start = std::chrono::steady_clock::now();
  std::string output;
  try {
    if (sub == s_bc) {
      build_corpus_cmd(bc, manifest, err);
      output = bc.output;
    } else if (sub == s_pt) {
      manifest.seed = pt.sgns.seed;
      pretrain_cmd(pt, manifest, err);
      output = pt.output;
    } else if (sub == s_tr) {
      manifest.seed = tr.train.seed;
      train_cmd(tr, manifest, err);
      output = tr.output;
    } else if (sub == s_en) {
      encode_cmd(en, manifest, err);
      output = en.output;
    } else if (sub == s_ty) {
      manifest.seed = ty.typing.seed;
      eval_typing_cmd(ty, manifest, err);
      output = ty.report;
    } else if (sub == s_cl) {
      manifest.seed = cl.classifier.seed;
      eval_classify_cmd(cl, manifest, err);
      output = cl.report;
    } else if (sub == s_nn) {
      nn_cmd(nn, manifest, out);
      output = nn.output;
    }
    if (!output.empty()) {
      const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start;
      manifest.write(output, wall.count());
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace textent::cli
