#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "textent/binary_io.hpp"
#include "textent/common.hpp"

namespace textent {

/// Named vectors of one dimension. Entity rows use the "ENTITY/" prefix; word
/// rows are bare or carry "WORD/".
class VectorStore {
 public:
  VectorStore() = default;
  explicit VectorStore(std::size_t dim) : dim_(dim) {}

  template <typename Range>
  void add(std::string name, const Range& values) {
    require(values.size() == dim_, ErrorKind::shape_mismatch,
            "vector '" + name + "' has dimension " + std::to_string(values.size()) + ", expected " +
                std::to_string(dim_));
    require(!name.empty(), ErrorKind::invalid_argument, "vector name is empty");
    require(name.find_first_of("\n\t") == std::string::npos, ErrorKind::invalid_argument,
            "vector name contains a tab or newline: " + name);
    auto [it, inserted] = index_.emplace(name, names_.size());
    require(inserted, ErrorKind::invalid_argument, "duplicate vector name '" + name + "'");
    names_.push_back(std::move(name));
    for (auto v : values) values_.push_back(static_cast<float>(v));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::span<const float> vector(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Word lookup accepts both the bare token and the "WORD/" form.
  std::optional<std::size_t> find_word(std::string_view token) const {
    if (auto i = find(token)) return i;
    return find(std::string(kWordPrefix) + std::string(token));
  }

  std::optional<std::size_t> find_entity(std::string_view entity) const {
    return find(std::string(kEntityPrefix) + std::string(entity));
  }

  bool operator==(const VectorStore& o) const {
    return dim_ == o.dim_ && names_ == o.names_ && values_ == o.values_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> names_;
  std::vector<float> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Text format: "<count> <dim>" header, then "<name> v1 ... vd" per row. Names may
// contain spaces; the last dim fields of a row are the values.

inline void write_vectors(std::ostream& out, const VectorStore& store) {
  out << store.size() << ' ' << store.dim() << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << store.name(i);
    for (float v : store.vector(i)) out << ' ' << format_real(v);
    out << '\n';
  }
}

inline void save_vectors(const VectorStore& store, const std::filesystem::path& path) {
  require(!store.empty(), ErrorKind::invalid_argument, "refusing to save an empty vector store");
  auto out = open_output(path);
  write_vectors(out, store);
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    if (i == line.size()) break;
    const auto j = std::min(line.find(' ', i), line.size());
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline VectorStore read_vectors(std::istream& in, const std::string& source = "<vectors>") {
  auto fail = [&](std::size_t line_no, const std::string& what) -> Error {
    return Error(ErrorKind::malformed_file, source + ":" + std::to_string(line_no) + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_spaces(line);
  std::size_t count = 0;
  std::size_t dim = 0;
  auto parse_size = [](std::string_view s, std::size_t& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size();
  };
  if (header.size() != 2 || !parse_size(header[0], count) || !parse_size(header[1], dim) || dim == 0) {
    throw fail(1, "header must be '<count> <dim>'");
  }

  VectorStore store(dim);
  std::vector<float> values(dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (store.size() == count) throw fail(line_no, "more rows than the header count " + std::to_string(count));
    const auto fields = detail::split_spaces(line);
    if (fields.size() < dim + 1) throw fail(line_no, "ragged row");
    const auto name_fields = fields.size() - dim;
    for (std::size_t k = 0; k < dim; ++k) {
      if (!parse_real(fields[name_fields + k], values[k])) {
        throw fail(line_no, "non-numeric field '" + std::string(fields[name_fields + k]) + "'");
      }
    }
    std::string name(fields[0]);
    for (std::size_t k = 1; k < name_fields; ++k) name.append(" ").append(fields[k]);
    try {
      store.add(std::move(name), values);
    } catch (const Error& e) {
      throw fail(line_no, e.what());
    }
  }
  if (store.size() != count) {
    throw fail(line_no, "header promises " + std::to_string(count) + " rows, found " + std::to_string(store.size()));
  }
  return store;
}

inline VectorStore load_vectors(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_vectors(in, path.string());
}

template <typename X, typename Y>
double cosine(const X& u, const Y& v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < std::size(u); ++i) {
    const double a = u[i], b = v[i];
    uv += a * b;
    uu += a * a;
    vv += b * b;
  }
  if (uu == 0.0 || vv == 0.0) return 0.0;
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

struct Neighbor {
  std::string entity;  // without the "ENTITY/" prefix
  double cosine = 0.0;

  bool operator==(const Neighbor&) const = default;
};

/// Exhaustive scan over the entity rows of the store.
template <typename Range>
std::vector<Neighbor> nearest_entities(const Range& query, const VectorStore& store, std::size_t n) {
  require(n >= 1, ErrorKind::invalid_argument, "top-n must be at least 1");
  require(std::size(query) == store.dim(), ErrorKind::shape_mismatch, "query dimension differs from store");
  double norm2 = 0.0;
  for (auto x : query) norm2 += static_cast<double>(x) * static_cast<double>(x);
  require(norm2 > 0.0, ErrorKind::zero_query, "query vector has zero norm");

  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& name = store.name(i);
    if (!name.starts_with(kEntityPrefix)) continue;
    all.push_back({name.substr(kEntityPrefix.size()), cosine(query, store.vector(i))});
  }
  const auto keep = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.cosine != b.cosine) return a.cosine > b.cosine;
                      return a.entity < b.entity;
                    });
  all.resize(keep);
  return all;
}

}  // namespace textent
