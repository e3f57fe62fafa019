#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <utility>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "error.hpp"

namespace causal::exogenous {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// An unbounded sequence of base-b digits D_1, D_2, ... The digit at a
// position depends only on (seed, base, position), so any stream reading
// from it can be replayed or advanced out of order.
class DigitStream {
 public:
  using DigitFn = std::function<int(std::uint64_t)>;

  explicit DigitStream(std::uint64_t seed = 0, int base = 10) : seed_(seed), base_(base) {
    require(base >= 2, ErrorKind::invalid_argument, "digit base must be at least 2");
  }

  // Digits supplied by a function of the 1-based position; used to replay
  // a known expansion.
  DigitStream(DigitFn fn, int base) : base_(base), fn_(std::move(fn)) {
    require(base >= 2, ErrorKind::invalid_argument, "digit base must be at least 2");
  }

  std::uint64_t seed() const { return seed_; }
  int base() const { return base_; }
  std::uint64_t cursor() const { return cursor_; }

  int digit(std::uint64_t position) const {
    if (fn_) {
      int d = fn_(position);
      require(d >= 0 && d < base_, ErrorKind::invalid_argument, "digit function left [0, base)");
      return d;
    }
    std::uint64_t h = splitmix64(seed_ ^ splitmix64(position + 0x632be59bd9b4e019ULL * std::uint64_t(base_)));
    return static_cast<int>(h % std::uint64_t(base_));
  }

  int next_digit() { return digit(++cursor_); }

 private:
  std::uint64_t seed_ = 0;
  int base_ = 10;
  std::uint64_t cursor_ = 0;
  DigitFn fn_;
};

// Position of entry (row, col) of the diagonal array, both 1-based:
//   row 1: 1 3 6 10 ...   row 2: 2 5 9 ...   row 3: 4 8 13 ...
inline std::uint64_t diagonal_position(std::uint64_t row, std::uint64_t col) {
  require(row >= 1 && col >= 1, ErrorKind::invalid_argument, "diagonal indices are 1-based");
  std::uint64_t d = row + col - 1;
  return d * (d + 1) / 2 - (row - 1);
}

class UniformStream {
 public:
  UniformStream(std::shared_ptr<const DigitStream> source, std::uint64_t row, int precision = 16)
      : source_(std::move(source)), row_(row), precision_(precision) {
    require(source_ != nullptr, ErrorKind::invalid_argument, "null digit source");
    require(row >= 1, ErrorKind::invalid_argument, "stream rows are 1-based");
    require(precision >= 1, ErrorKind::invalid_argument, "precision must be positive");
  }

  std::uint64_t row() const { return row_; }
  int precision() const { return precision_; }
  std::uint64_t consumed() const { return col_; }

  // Source position of the next digit this stream will read.
  std::uint64_t next_position() const { return diagonal_position(row_, col_ + 1); }

  double next_uniform() {
    const int base = source_->base();
    const long double scale = std::pow(static_cast<long double>(base), precision_);
    long double acc = 0;
    if (scale < 1.8e19L) {
      std::uint64_t n = 0;
      for (int m = 0; m < precision_; ++m) n = n * std::uint64_t(base) + std::uint64_t(take());
      acc = static_cast<long double>(n) / scale;
    } else {
      long double w = 1.0L;
      for (int m = 0; m < precision_; ++m) {
        w /= base;
        acc += w * take();
      }
    }
    double u = static_cast<double>(acc);
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    return u;
  }

  double next_normal(double mean = 0.0, double var = 1.0);

 private:
  int take() { return source_->digit(diagonal_position(row_, ++col_)); }

  std::shared_ptr<const DigitStream> source_;
  std::uint64_t row_;
  int precision_;
  std::uint64_t col_ = 0;
};

inline std::vector<UniformStream> split_streams(std::shared_ptr<const DigitStream> source, std::size_t k,
                                                int precision = 16) {
  require(k >= 1, ErrorKind::invalid_argument, "split_streams needs k >= 1");
  std::vector<UniformStream> out;
  out.reserve(k);
  for (std::size_t j = 1; j <= k; ++j) out.emplace_back(source, j, precision);
  return out;
}

inline std::vector<UniformStream> split_streams(const DigitStream& source, std::size_t k, int precision = 16) {
  return split_streams(std::make_shared<const DigitStream>(source), k, precision);
}

inline double next_uniform(UniformStream& s) { return s.next_uniform(); }

// Atoms of a finite distribution function: value together with F(value).
template <class V>
struct CdfPoint {
  V value;
  double threshold;
};

// min{x : F(x) >= u}
template <class V>
V inverse_cdf_sample(const std::vector<CdfPoint<V>>& cdf, double u) {
  require(!cdf.empty(), ErrorKind::invalid_argument, "empty cdf");
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    require(cdf[i].threshold >= 0 && cdf[i].threshold <= 1 + 1e-12, ErrorKind::invalid_argument,
            "cdf threshold outside [0,1]");
    if (i > 0)
      require(cdf[i].threshold >= cdf[i - 1].threshold, ErrorKind::invalid_argument,
              "cdf thresholds must be non-decreasing");
  }
  require(std::abs(cdf.back().threshold - 1.0) <= 1e-12, ErrorKind::invalid_argument,
          "final cdf threshold must be 1");
  for (const auto& p : cdf)
    if (p.threshold >= u) return p.value;
  return cdf.back().value;
}

template <class V>
std::vector<CdfPoint<V>> cdf_from_masses(const std::vector<V>& values, const std::vector<double>& masses) {
  require(values.size() == masses.size(), ErrorKind::invalid_argument, "values and masses differ in length");
  std::vector<CdfPoint<V>> out;
  double acc = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(masses[i] >= 0, ErrorKind::invalid_argument, "negative mass");
    acc += masses[i];
    out.push_back({values[i], acc});
  }
  require(std::abs(acc - 1.0) <= 1e-9, ErrorKind::invalid_argument, "masses do not sum to 1");
  out.back().threshold = 1.0;
  return out;
}

inline double normal_quantile(double u, double mean = 0.0, double var = 1.0) {
  require(var >= 0, ErrorKind::invalid_argument, "negative variance");
  if (var == 0) return mean;
  // u = 0 has probability zero under the construction; nudge it inside.
  if (u <= 0) u = std::numeric_limits<double>::min();
  boost::math::normal_distribution<double> n(mean, std::sqrt(var));
  return boost::math::quantile(n, u);
}

inline double UniformStream::next_normal(double mean, double var) {
  return normal_quantile(next_uniform(), mean, var);
}

}  // namespace causal::exogenous
