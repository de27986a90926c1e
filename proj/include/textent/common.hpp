#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <ranges>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace textent {

using Id = std::uint32_t;
inline constexpr Id kNoTarget = std::numeric_limits<Id>::max();

inline constexpr std::string_view kEntityPrefix = "ENTITY/";
inline constexpr std::string_view kWordPrefix = "WORD/";

enum class ErrorKind {
  invalid_argument,
  io,
  malformed_file,
  empty_corpus,
  empty_vocabulary,
  empty_dataset,
  empty_train_set,
  unknown_target,
  missing_vector,
  shape_mismatch,
  length_mismatch,
  zero_query,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::io: return "IoError";
    case ErrorKind::malformed_file: return "MalformedFile";
    case ErrorKind::empty_corpus: return "EmptyCorpus";
    case ErrorKind::empty_vocabulary: return "EmptyVocabulary";
    case ErrorKind::empty_dataset: return "EmptyDataset";
    case ErrorKind::empty_train_set: return "EmptyTrainSet";
    case ErrorKind::unknown_target: return "UnknownTarget";
    case ErrorKind::missing_vector: return "MissingVector";
    case ErrorKind::shape_mismatch: return "ShapeMismatch";
    case ErrorKind::length_mismatch: return "LengthMismatch";
    case ErrorKind::zero_query: return "ZeroQuery";
  }
  return "Error";
}

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

/// Dense row-major matrix. Rows are handed out as spans.
template <typename Real>
class Matrix {
 public:
  using value_type = Real;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, Real value = Real{0})
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }

  void fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename Other>
  Matrix<Other> cast() const {
    Matrix<Other> out(rows_, cols_);
    std::transform(data_.begin(), data_.end(), out.values().begin(),
                   [](Real x) { return static_cast<Other>(x); });
    return out;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Real>
Real uniform_real(Rng& rng, Real lo, Real hi) {
  return static_cast<Real>(lo + (hi - lo) * uniform01(rng));
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

template <typename Real>
void fill_uniform(std::span<Real> out, Rng& rng, Real lo, Real hi) {
  for (auto& x : out) x = uniform_real(rng, lo, hi);
}

// Sequential summation in index order; single-threaded results are reproducible.
template <typename X, typename Y>
auto dot(const X& x, const Y& y) {
  std::common_type_t<std::ranges::range_value_t<X>, std::ranges::range_value_t<Y>> s{0};
  for (std::size_t i = 0; i < std::size(x); ++i) s += x[i] * y[i];
  return s;
}

template <typename Real, typename X, typename Y>
void axpy(Real alpha, const X& x, Y&& y) {
  for (std::size_t i = 0; i < std::size(x); ++i) y[i] += alpha * x[i];
}

template <typename Range>
bool all_finite(const Range& xs) {
  return std::all_of(std::begin(xs), std::end(xs), [](auto x) { return std::isfinite(x); });
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Shortest decimal string that parses back to the same value.
template <typename Real>
std::string format_real(Real value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error(ErrorKind::invalid_argument, "cannot format real");
  return {buf, end};
}

template <typename Real>
bool parse_real(std::string_view text, Real& out) {
  if (text.empty()) return false;
  // from_chars rejects a leading '+'.
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

inline std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

/// 64-bit FNV-1a, used for vocabulary fingerprints and manifest file hashes.
class Fnv1a {
 public:
  void update(std::string_view bytes) {
    for (unsigned char ch : bytes) {
      hash_ ^= ch;
      hash_ *= 0x100000001b3ULL;
    }
  }
  void update_u64(std::uint64_t v) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    update({buf, 8});
  }
  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

inline std::string hex64(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return out;
}

}  // namespace textent
