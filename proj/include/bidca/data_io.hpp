#pragma once

#include "bidca/core.hpp"
#include "bidca/dc.hpp"

#include <cstdint>
#include <iosfwd>
#include <utility>

namespace bidca {

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Portable deterministic generator: xorshift64* (shifts 12, 25, 27 and
/// multiplier 0x2545F4914F6CDD1D) seeded through one splitmix64 round, so
/// identical seeds reproduce identical streams on every platform. `stream`
/// derives independent substreams from one seed.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double next_double();
  /// Uniform in [0, n) by 128-bit multiply-shift.
  uint64_t next_below(uint64_t n);
  double uniform(double a, double b);
  /// Standard normal via Box-Muller (spare value cached).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct Sample {
  double label = 0.0;  // -1 or +1 after normalization
  std::vector<std::pair<Eigen::Index, double>> features;  // 1-based, increasing
};

struct Dataset {
  std::vector<Sample> rows;
  Eigen::Index n = 0;  // largest feature index seen

  Eigen::Index size() const { return static_cast<Eigen::Index>(rows.size()); }
  /// Dense feature vector of row i, length dim (>= n).
  Vec dense_row(Eigen::Index i, Eigen::Index dim) const;
};

/// LIBSVM text format: one `<label> <idx>:<val> ...` sample per line,
/// `#` comment lines skipped. Labels are normalized to {-1,+1}; the
/// accepted raw schemes are {-1,+1}, {0,1} (0 -> -1), {1,2} (2 -> -1) and
/// {2,4} (4 -> -1). Any other label set is rejected.
Dataset parse_libsvm(std::istream& in);
Dataset parse_libsvm_file(const std::string& path);
std::string serialize_libsvm(const Dataset& d);

/// Seeded-shuffle split into ceil(fraction * size) training rows and the
/// rest; deterministic given (seed, fraction).
std::pair<Dataset, Dataset> split(const Dataset& d, uint64_t seed,
                                  double train_fraction);

struct FoldPlan {
  int T = 0;
  uint64_t seed = 0;
  std::vector<int> assignment;  // row index -> validation fold

  Eigen::Index fold_size(int t) const;
};

/// Seeded shuffle then contiguous blocks; the first (size mod T) folds get
/// the extra row.
FoldPlan fold_plan(const Dataset& train, int T, uint64_t seed);

struct RunRecord {
  std::string dataset;
  std::string method;
  double epsilon = 0.0;
  double tol = 0.0;
  uint64_t seed = 0;
  double cv_error = 0.0;
  double test_error = 0.0;
  double time_sec = 0.0;
  int iters = 0;
  double beta_final = 0.0;
  std::string status;
  std::string config_json;  // resolved configuration, serialized
};

/// Line-delimited records, one JSON object per run, then one aggregate
/// record with mean and sample standard deviation over completed runs.
/// An empty batch is an error, never an empty document.
void write_results(const std::vector<RunRecord>& records, std::ostream& out);
void write_results_file(const std::vector<RunRecord>& records,
                        const std::string& path);

/// One JSON object per iteration plus a final summary line.
void write_trace(const Trace& trace, std::ostream& out);

/// Two deterministic Gaussian clouds with +-1 labels and features of
/// magnitude O(1); `overlap` controls how far the clouds interpenetrate.
Dataset synthetic_classification(Eigen::Index samples, Eigen::Index features,
                                 uint64_t seed, double overlap = 0.5);

}  // namespace bidca
