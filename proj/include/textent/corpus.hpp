#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "textent/binary_io.hpp"
#include "textent/common.hpp"

namespace textent {

struct Annotation {
  std::size_t start = 0;  // token index
  std::size_t end = 0;    // exclusive
  std::string entity;
  double score = 1.0;  // linker relevance; 1.0 for gold KB links

  bool operator==(const Annotation&) const = default;
};

struct RawDocument {
  std::string id;
  std::string target_entity;  // empty for documents outside the KB
  std::vector<std::string> tokens;
  std::vector<Annotation> annotations;
  std::uint64_t incoming_links = 0;

  bool operator==(const RawDocument&) const = default;
};

/// Throws MalformedFile if spans are out of range, empty, overlapping or unsorted,
/// or if a score lies outside [0, 1].
inline void validate(const RawDocument& doc) {
  std::size_t prev_end = 0;
  for (const auto& a : doc.annotations) {
    const auto where = "document '" + doc.id + "', annotation '" + a.entity + "'";
    require(a.start < a.end, ErrorKind::malformed_file, where + ": empty span");
    require(a.end <= doc.tokens.size(), ErrorKind::malformed_file, where + ": span out of range");
    require(a.start >= prev_end, ErrorKind::malformed_file, where + ": overlapping or unsorted");
    require(a.score >= 0.0 && a.score <= 1.0, ErrorKind::malformed_file, where + ": score outside [0,1]");
    prev_end = a.end;
  }
}

// ---------------------------------------------------------------------------
// Vocabulary

/// Bidirectional token <-> dense id map with corpus counts.
class Lexicon {
 public:
  /// Keeps tokens with count >= min_count. Ids follow descending count, ties in
  /// lexicographic order.
  static Lexicon from_counts(const std::map<std::string, std::uint64_t>& counts,
                             std::uint64_t min_count) {
    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (const auto& [token, n] : counts) {
      if (n >= min_count) kept.emplace_back(token, n);
    }
    // counts is already sorted by token, so a stable sort on count gives the tie-break.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    Lexicon lex;
    for (auto& [token, n] : kept) lex.add(std::move(token), n);
    return lex;
  }

  void add(std::string token, std::uint64_t count) {
    const auto id = static_cast<Id>(tokens_.size());
    auto [it, inserted] = index_.emplace(token, id);
    require(inserted, ErrorKind::invalid_argument, "duplicate token '" + token + "'");
    tokens_.push_back(std::move(token));
    counts_.push_back(count);
  }

  std::optional<Id> id_of(std::string_view token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& lookup(Id id) const { return tokens_.at(id); }
  std::uint64_t count(Id id) const { return counts_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  bool operator==(const Lexicon& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::map<std::string, Id, std::less<>> index_;
};

struct Vocabulary {
  Lexicon words;
  Lexicon ctx_entities;
  Lexicon target_entities;

  /// Fingerprint stored in model files so a model is only paired with its corpus.
  std::uint64_t fingerprint() const {
    Fnv1a h;
    for (const Lexicon* lex : {&words, &ctx_entities, &target_entities}) {
      h.update_u64(lex->size());
      for (std::size_t i = 0; i < lex->size(); ++i) {
        h.update_u64(lex->tokens()[i].size());
        h.update(lex->tokens()[i]);
        h.update_u64(lex->counts()[i]);
      }
    }
    return h.digest();
  }

  bool operator==(const Vocabulary&) const = default;
};

/// A training example in id space.
struct Document {
  Id target = kNoTarget;
  std::vector<Id> words;
  std::vector<Id> ctx_entities;

  bool operator==(const Document&) const = default;
};

struct CompiledDataset {
  Vocabulary vocab;
  std::vector<Document> documents;

  bool operator==(const CompiledDataset&) const = default;
};

using TokenStream = std::vector<std::vector<std::string>>;

// ---------------------------------------------------------------------------
// Operations

inline RawDocument filter_annotations(const RawDocument& doc, double min_score) {
  RawDocument out = doc;
  std::erase_if(out.annotations, [min_score](const Annotation& a) { return a.score < min_score; });
  return out;
}

/// Keeps documents with enough incoming links, plus any whose target is in keep_set.
inline std::vector<RawDocument> select_training_documents(const std::vector<RawDocument>& corpus,
                                                          std::uint64_t min_links,
                                                          const std::set<std::string>& keep_set) {
  std::vector<RawDocument> out;
  for (const auto& doc : corpus) {
    if (doc.incoming_links >= min_links || keep_set.contains(doc.target_entity)) out.push_back(doc);
  }
  return out;
}

inline RawDocument normalize(const RawDocument& doc) {
  RawDocument out = doc;
  for (auto& t : out.tokens) t = to_lower_ascii(t);
  return out;
}

/// Counts every token of every document, and every annotation. Target entity
/// counts are 1 + their number of mentions, which is what the unigram negative
/// sampler weights by.
inline Vocabulary build_vocabularies(const std::vector<RawDocument>& corpus,
                                     std::uint64_t min_word_count,
                                     std::uint64_t min_entity_count) {
  std::map<std::string, std::uint64_t> word_counts;
  std::map<std::string, std::uint64_t> entity_counts;
  std::set<std::string> targets;
  for (const auto& doc : corpus) {
    for (const auto& t : doc.tokens) ++word_counts[t];
    for (const auto& a : doc.annotations) ++entity_counts[a.entity];
    if (doc.target_entity.empty()) continue;
    require(targets.insert(doc.target_entity).second, ErrorKind::invalid_argument,
            "duplicate target entity '" + doc.target_entity + "'");
  }
  require(!targets.empty(), ErrorKind::empty_corpus, "no document with a target entity");

  std::map<std::string, std::uint64_t> target_counts;
  for (const auto& t : targets) {
    auto it = entity_counts.find(t);
    target_counts[t] = 1 + (it == entity_counts.end() ? 0 : it->second);
  }

  Vocabulary vocab;
  vocab.words = Lexicon::from_counts(word_counts, min_word_count);
  vocab.ctx_entities = Lexicon::from_counts(entity_counts, min_entity_count);
  vocab.target_entities = Lexicon::from_counts(target_counts, 0);
  return vocab;
}

struct CompileOptions {
  std::size_t max_words = 2000;
  std::size_t max_entities = 300;
  /// false: the first max_words in-vocabulary tokens. true: the first max_words
  /// tokens, then OOV removal.
  bool truncate_before_oov = false;
  /// Treat the contextual entities as a set (first occurrence wins).
  bool dedup_entities = false;
  /// Throw UnknownTarget when the target is missing from the vocabulary.
  /// Inference documents set this to false and get kNoTarget.
  bool require_target = true;
};

inline Document compile_document(const RawDocument& doc, const Vocabulary& vocab,
                                 const CompileOptions& options = {}) {
  Document out;
  if (options.require_target) {
    auto id = vocab.target_entities.id_of(doc.target_entity);
    require(id.has_value(), ErrorKind::unknown_target,
            "document '" + doc.id + "' has unmapped target '" + doc.target_entity + "'");
    out.target = *id;
  } else if (auto id = vocab.target_entities.id_of(doc.target_entity); id && !doc.target_entity.empty()) {
    out.target = *id;
  }

  const std::size_t word_scan =
      options.truncate_before_oov ? std::min(doc.tokens.size(), options.max_words) : doc.tokens.size();
  for (std::size_t i = 0; i < word_scan && out.words.size() < options.max_words; ++i) {
    if (auto id = vocab.words.id_of(doc.tokens[i])) out.words.push_back(*id);
  }

  const std::size_t entity_scan = options.truncate_before_oov
                                      ? std::min(doc.annotations.size(), options.max_entities)
                                      : doc.annotations.size();
  std::set<Id> seen;
  for (std::size_t i = 0; i < entity_scan && out.ctx_entities.size() < options.max_entities; ++i) {
    auto id = vocab.ctx_entities.id_of(doc.annotations[i].entity);
    if (!id) continue;
    if (options.dedup_entities && !seen.insert(*id).second) continue;
    out.ctx_entities.push_back(*id);
  }
  return out;
}

inline Document compile_document(const RawDocument& doc, const Vocabulary& vocab, std::size_t max_words,
                                 std::size_t max_entities) {
  CompileOptions options;
  options.max_words = max_words;
  options.max_entities = max_entities;
  return compile_document(doc, vocab, options);
}

/// Compiles every document that has a target entity.
inline CompiledDataset compile_dataset(const std::vector<RawDocument>& corpus, Vocabulary vocab,
                                       const CompileOptions& options = {}) {
  CompiledDataset out;
  out.vocab = std::move(vocab);
  for (const auto& doc : corpus) {
    if (doc.target_entity.empty()) continue;
    out.documents.push_back(compile_document(doc, out.vocab, options));
  }
  return out;
}

/// Each annotated span collapses into one "ENTITY/<name>" token.
inline std::vector<std::string> pretrain_tokens(const RawDocument& doc) {
  std::vector<std::string> out;
  out.reserve(doc.tokens.size());
  std::size_t next = 0;
  for (const auto& a : doc.annotations) {
    for (; next < a.start; ++next) out.push_back(doc.tokens[next]);
    out.push_back(std::string(kEntityPrefix) + a.entity);
    next = a.end;
  }
  for (; next < doc.tokens.size(); ++next) out.push_back(doc.tokens[next]);
  return out;
}

inline TokenStream emit_pretrain_stream(const std::vector<RawDocument>& corpus) {
  TokenStream out;
  out.reserve(corpus.size());
  for (const auto& doc : corpus) out.push_back(pretrain_tokens(doc));
  return out;
}

// ---------------------------------------------------------------------------
// Build pipeline

struct CorpusConfig {
  std::uint64_t min_word_count = 5;
  std::uint64_t min_entity_count = 3;
  std::uint64_t min_links = 5;
  double min_score = 0.05;
  std::set<std::string> keep_entities;
  CompileOptions compile;
};

struct CorpusBuild {
  CompiledDataset dataset;
  /// Entity-replaced text of every document (before link selection) for pretraining.
  TokenStream pretrain_stream;
  std::size_t input_documents = 0;
  std::size_t selected_documents = 0;
};

inline CorpusBuild build_corpus(const std::vector<RawDocument>& raw, const CorpusConfig& config) {
  require(!raw.empty(), ErrorKind::empty_corpus, "corpus has no documents");
  std::vector<RawDocument> cleaned;
  cleaned.reserve(raw.size());
  for (const auto& doc : raw) cleaned.push_back(normalize(filter_annotations(doc, config.min_score)));

  CorpusBuild out;
  out.input_documents = raw.size();
  out.pretrain_stream = emit_pretrain_stream(cleaned);
  auto selected = select_training_documents(cleaned, config.min_links, config.keep_entities);
  out.selected_documents = selected.size();
  require(!selected.empty(), ErrorKind::empty_corpus, "no document survives the link filter");
  auto vocab = build_vocabularies(selected, config.min_word_count, config.min_entity_count);
  out.dataset = compile_dataset(selected, std::move(vocab), config.compile);
  return out;
}

// ---------------------------------------------------------------------------
// JSON-lines input

inline std::vector<Annotation> parse_annotations(const nlohmann::json& arr) {
  std::vector<Annotation> out;
  if (arr.is_null()) return out;
  for (const auto& a : arr) {
    Annotation ann;
    ann.start = a.at("start").get<std::size_t>();
    ann.end = a.at("end").get<std::size_t>();
    ann.entity = a.at("entity").get<std::string>();
    ann.score = a.value("score", 1.0);
    out.push_back(std::move(ann));
  }
  return out;
}

inline RawDocument parse_raw_document(const nlohmann::json& j) {
  RawDocument doc;
  doc.id = j.at("id").get<std::string>();
  if (auto it = j.find("target_entity"); it != j.end() && !it->is_null()) doc.target_entity = it->get<std::string>();
  doc.tokens = j.at("tokens").get<std::vector<std::string>>();
  if (auto it = j.find("annotations"); it != j.end()) doc.annotations = parse_annotations(*it);
  doc.incoming_links = j.value("incoming_links", std::uint64_t{0});
  validate(doc);
  return doc;
}

/// Calls fn(json, line_number) for each non-blank line. JSON and schema errors
/// become MalformedFile naming the line.
template <typename Fn>
void for_each_json_line(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::malformed_file, source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::malformed_file) throw;
      throw Error(ErrorKind::malformed_file, source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::vector<RawDocument> read_corpus(std::istream& in, const std::string& source = "<corpus>") {
  std::vector<RawDocument> out;
  for_each_json_line(in, source, [&](const nlohmann::json& j) { out.push_back(parse_raw_document(j)); });
  return out;
}

inline std::vector<RawDocument> read_corpus(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_corpus(in, path.string());
}

// ---------------------------------------------------------------------------
// Compiled dataset container: "TXE1", version, three lexicons, documents,
// then the pretraining stream as ids into its own token table.

inline constexpr std::uint32_t kCorpusFormatVersion = 1;

namespace detail {

inline void write_lexicon(BinaryWriter& w, const Lexicon& lex) {
  w.u32(BinaryWriter::checked_u32(lex.size()));
  for (std::size_t i = 0; i < lex.size(); ++i) {
    w.str(lex.tokens()[i]);
    w.u64(lex.counts()[i]);
  }
}

inline Lexicon read_lexicon(BinaryReader& r) {
  Lexicon lex;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto token = r.str();
    const auto count = r.u64();
    try {
      lex.add(std::move(token), count);
    } catch (const Error& e) {
      r.fail(e.what());
    }
  }
  return lex;
}

inline void write_ids(BinaryWriter& w, const std::vector<Id>& ids) {
  w.u32(BinaryWriter::checked_u32(ids.size()));
  for (Id id : ids) w.u32(id);
}

inline std::vector<Id> read_ids(BinaryReader& r, std::size_t bound) {
  std::vector<Id> ids(r.u32());
  for (auto& id : ids) {
    id = r.u32();
    if (id >= bound) r.fail("id out of range");
  }
  return ids;
}

}  // namespace detail

inline void write_compiled(std::ostream& out, const CompiledDataset& data, const TokenStream& stream) {
  BinaryWriter w(out);
  w.magic("TXE1");
  w.u32(kCorpusFormatVersion);
  detail::write_lexicon(w, data.vocab.words);
  detail::write_lexicon(w, data.vocab.ctx_entities);
  detail::write_lexicon(w, data.vocab.target_entities);
  w.u32(BinaryWriter::checked_u32(data.documents.size()));
  for (const auto& doc : data.documents) {
    w.u32(doc.target);
    detail::write_ids(w, doc.words);
    detail::write_ids(w, doc.ctx_entities);
  }

  std::map<std::string_view, Id> types;
  std::vector<std::string_view> type_list;
  for (const auto& seq : stream) {
    for (const auto& t : seq) {
      if (types.emplace(t, static_cast<Id>(type_list.size())).second) type_list.push_back(t);
    }
  }
  w.u32(BinaryWriter::checked_u32(type_list.size()));
  for (auto t : type_list) w.str(t);
  w.u32(BinaryWriter::checked_u32(stream.size()));
  for (const auto& seq : stream) {
    w.u32(BinaryWriter::checked_u32(seq.size()));
    for (const auto& t : seq) w.u32(types.at(t));
  }
}

struct CompiledFile {
  CompiledDataset dataset;
  TokenStream pretrain_stream;
};

inline CompiledFile read_compiled(std::istream& in, const std::string& source = "<txe>") {
  BinaryReader r(in, source);
  r.expect_magic("TXE1");
  if (r.u32() != kCorpusFormatVersion) r.fail("unsupported version");
  CompiledFile out;
  auto& vocab = out.dataset.vocab;
  vocab.words = detail::read_lexicon(r);
  vocab.ctx_entities = detail::read_lexicon(r);
  vocab.target_entities = detail::read_lexicon(r);
  const auto n_docs = r.u32();
  out.dataset.documents.reserve(n_docs);
  for (std::uint32_t i = 0; i < n_docs; ++i) {
    Document doc;
    doc.target = r.u32();
    if (doc.target >= vocab.target_entities.size()) r.fail("target id out of range");
    doc.words = detail::read_ids(r, vocab.words.size());
    doc.ctx_entities = detail::read_ids(r, vocab.ctx_entities.size());
    out.dataset.documents.push_back(std::move(doc));
  }
  std::vector<std::string> types(r.u32());
  for (auto& t : types) t = r.str();
  out.pretrain_stream.resize(r.u32());
  for (auto& seq : out.pretrain_stream) {
    for (Id id : detail::read_ids(r, types.size())) seq.push_back(types[id]);
  }
  r.expect_end();
  return out;
}

inline void save_compiled(const std::filesystem::path& path, const CompiledDataset& data,
                          const TokenStream& stream) {
  auto out = open_output(path, true);
  write_compiled(out, data, stream);
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

inline CompiledFile load_compiled(const std::filesystem::path& path) {
  auto in = open_input(path, true);
  return read_compiled(in, path.string());
}

}  // namespace textent
