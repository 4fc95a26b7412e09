#include "bidca/data_io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace bidca {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed, uint64_t stream) {
  state_ = splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
}

uint64_t Rng::next_u64() {
  uint64_t x = state_;
  x ^= x >> 12;
  x ^= x << 25;
  x ^= x >> 27;
  state_ = x;
  return x * 0x2545F4914F6CDD1DULL;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::next_below(uint64_t n) {
  if (n == 0) throw InvalidInput("Rng::next_below: n must be positive");
  const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<uint64_t>(m >> 64);
}

double Rng::uniform(double a, double b) { return a + (b - a) * next_double(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

Vec Dataset::dense_row(Eigen::Index i, Eigen::Index dim) const {
  if (i < 0 || i >= size()) throw DimensionError("dense_row: row out of range");
  Vec v = Vec::Zero(dim);
  for (const auto& [idx, val] : rows[static_cast<size_t>(i)].features) {
    if (idx > dim) throw DimensionError("dense_row: feature index beyond dim");
    v[idx - 1] = val;
  }
  return v;
}

namespace {

[[noreturn]] void parse_fail(size_t line_no, const std::string& msg) {
  std::ostringstream oss;
  oss << "parse error at line " << line_no << ": " << msg;
  throw ParseError(oss.str());
}

void map_labels(Dataset& d) {
  std::set<double> raw;
  for (const Sample& s : d.rows) raw.insert(s.label);
  const auto subset_of = [&raw](std::initializer_list<double> universe) {
    for (double v : raw) {
      bool found = false;
      for (double u : universe) {
        if (v == u) found = true;
      }
      if (!found) return false;
    }
    return true;
  };
  if (subset_of({-1.0, 1.0})) return;
  if (subset_of({0.0, 1.0})) {
    for (Sample& s : d.rows) s.label = s.label == 0.0 ? -1.0 : 1.0;
    return;
  }
  if (subset_of({1.0, 2.0})) {
    for (Sample& s : d.rows) s.label = s.label == 2.0 ? -1.0 : 1.0;
    return;
  }
  if (subset_of({2.0, 4.0})) {
    for (Sample& s : d.rows) s.label = s.label == 4.0 ? -1.0 : 1.0;
    return;
  }
  std::ostringstream oss;
  oss << "unmappable label set {";
  bool first = true;
  for (double v : raw) {
    if (!first) oss << ", ";
    oss << v;
    first = false;
  }
  oss << "}; accepted schemes: {-1,+1}, {0,1}, {1,2}, {2,4}";
  throw ParseError(oss.str());
}

}  // namespace

Dataset parse_libsvm(std::istream& in) {
  Dataset d;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == '#') continue;

    Sample s;
    const char* cur = line.c_str() + pos;
    char* end = nullptr;
    s.label = std::strtod(cur, &end);
    if (end == cur) parse_fail(line_no, "missing label");
    if (!std::isfinite(s.label)) parse_fail(line_no, "non-finite label");
    cur = end;

    Eigen::Index prev_idx = 0;
    while (true) {
      while (*cur == ' ' || *cur == '\t' || *cur == '\r') ++cur;
      if (*cur == '\0') break;
      const long idx = std::strtol(cur, &end, 10);
      if (end == cur || *end != ':') parse_fail(line_no, "expected <index>:<value>");
      if (idx < 1) parse_fail(line_no, "feature index must be >= 1");
      if (idx <= prev_idx) {
        std::ostringstream oss;
        oss << "non-increasing feature index " << idx;
        parse_fail(line_no, oss.str());
      }
      cur = end + 1;
      const double val = std::strtod(cur, &end);
      if (end == cur) parse_fail(line_no, "missing feature value");
      if (!std::isfinite(val)) parse_fail(line_no, "non-finite feature value");
      cur = end;
      prev_idx = idx;
      s.features.emplace_back(static_cast<Eigen::Index>(idx), val);
      d.n = std::max(d.n, static_cast<Eigen::Index>(idx));
    }
    d.rows.push_back(std::move(s));
  }
  map_labels(d);
  return d;
}

Dataset parse_libsvm_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path);
  return parse_libsvm(in);
}

std::string serialize_libsvm(const Dataset& d) {
  std::ostringstream oss;
  oss << std::setprecision(17);
  for (const Sample& s : d.rows) {
    oss << s.label;
    for (const auto& [idx, val] : s.features) oss << ' ' << idx << ':' << val;
    oss << '\n';
  }
  return oss.str();
}

std::pair<Dataset, Dataset> split(const Dataset& d, uint64_t seed,
                                  double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidInput("split: train fraction must lie in (0, 1)");
  }
  const Eigen::Index total = d.size();
  const Eigen::Index n_train = static_cast<Eigen::Index>(
      std::ceil(train_fraction * static_cast<double>(total)));
  if (n_train == 0 || n_train == total) {
    throw InvalidInput("split: a side would be empty");
  }
  std::vector<Eigen::Index> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed, /*stream=*/0);
  rng.shuffle(order);

  Dataset train, test;
  train.n = test.n = d.n;
  for (Eigen::Index i = 0; i < total; ++i) {
    const Sample& s = d.rows[static_cast<size_t>(order[static_cast<size_t>(i)])];
    (i < n_train ? train : test).rows.push_back(s);
  }
  return {std::move(train), std::move(test)};
}

Eigen::Index FoldPlan::fold_size(int t) const {
  Eigen::Index c = 0;
  for (int a : assignment) {
    if (a == t) ++c;
  }
  return c;
}

FoldPlan fold_plan(const Dataset& train, int T, uint64_t seed) {
  const Eigen::Index total = train.size();
  if (T < 2 || static_cast<Eigen::Index>(T) > total) {
    throw InvalidInput("fold_plan: need 2 <= T <= #rows");
  }
  std::vector<Eigen::Index> order(static_cast<size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(seed, /*stream=*/1);
  rng.shuffle(order);

  FoldPlan plan;
  plan.T = T;
  plan.seed = seed;
  plan.assignment.assign(static_cast<size_t>(total), -1);
  const Eigen::Index base = total / T;
  const Eigen::Index extra = total % T;
  Eigen::Index pos = 0;
  for (int t = 0; t < T; ++t) {
    const Eigen::Index size_t_fold = base + (t < extra ? 1 : 0);
    for (Eigen::Index k = 0; k < size_t_fold; ++k, ++pos) {
      plan.assignment[static_cast<size_t>(order[static_cast<size_t>(pos)])] = t;
    }
  }
  return plan;
}

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json record_to_json(const RunRecord& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["method"] = r.method;
  j["epsilon"] = r.epsilon;
  j["tol"] = r.tol;
  j["seed"] = r.seed;
  j["cv_error"] = r.cv_error;
  j["test_error"] = r.test_error;
  j["time_sec"] = r.time_sec;
  j["iters"] = r.iters;
  j["beta_final"] = r.beta_final;
  j["status"] = r.status;
  if (!r.config_json.empty()) j["config"] = ordered_json::parse(r.config_json);
  return j;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean =
      std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

void write_results(const std::vector<RunRecord>& records, std::ostream& out) {
  if (records.empty()) throw IoError("write_results: no run records");
  std::vector<double> cv, te, tm, it;
  int completed = 0;
  for (const RunRecord& r : records) {
    out << record_to_json(r).dump() << '\n';
    if (r.status == "converged") {
      ++completed;
      cv.push_back(r.cv_error);
      te.push_back(r.test_error);
      tm.push_back(r.time_sec);
      it.push_back(static_cast<double>(r.iters));
    }
  }
  ordered_json agg;
  agg["record"] = "aggregate";
  agg["runs"] = records.size();
  agg["completed"] = completed;
  const auto [cvm, cvs] = mean_std(cv);
  const auto [tem, tes] = mean_std(te);
  const auto [tmm, tms] = mean_std(tm);
  const auto [itm, its] = mean_std(it);
  agg["cv_error_mean"] = cvm;
  agg["cv_error_std"] = cvs;
  agg["test_error_mean"] = tem;
  agg["test_error_std"] = tes;
  agg["time_sec_mean"] = tmm;
  agg["time_sec_std"] = tms;
  agg["iters_mean"] = itm;
  agg["iters_std"] = its;
  out << agg.dump() << '\n';
  if (!out) throw IoError("write_results: stream failure");
}

void write_results_file(const std::vector<RunRecord>& records,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open results file for writing: " + path);
  try {
    write_results(records, out);
  } catch (const IoError& e) {
    throw IoError(std::string(e.what()) + " (path: " + path + ")");
  }
}

void write_trace(const Trace& trace, std::ostream& out) {
  for (const IterationRecord& r : trace.iterations) {
    ordered_json j;
    j["k"] = r.k;
    j["beta"] = r.beta;
    j["rho"] = r.rho;
    j["t"] = r.t;
    j["step_norm"] = r.step_norm;
    j["merit"] = r.merit;
    j["e_norm"] = r.e_norm;
    j["criterion_bound"] = r.criterion_bound;
    j["penalty_increased"] = r.penalty_increased;
    j["decrease_violation"] = r.decrease_violation;
    out << j.dump() << '\n';
  }
  ordered_json s;
  s["record"] = "summary";
  s["termination"] = trace.termination;
  s["iterations"] = trace.iterations.size();
  s["beta_final"] = trace.beta_final;
  s["decrease_violations"] = trace.decrease_violations;
  s["kkt_stationarity"] = trace.final_kkt.stationarity;
  s["kkt_complementarity"] = trace.final_kkt.complementarity;
  s["kkt_feasibility"] = trace.final_kkt.feasibility;
  out << s.dump() << '\n';
}

Dataset synthetic_classification(Eigen::Index samples, Eigen::Index features,
                                 uint64_t seed, double overlap) {
  if (samples < 2 || features < 1) {
    throw InvalidInput("synthetic_classification: need >= 2 samples, >= 1 feature");
  }
  Rng rng(seed, /*stream=*/2);
  // Class centers along a random direction, length controlled by overlap.
  Vec dir(features);
  for (Eigen::Index i = 0; i < features; ++i) dir[i] = rng.normal();
  dir.normalize();
  Dataset d;
  d.n = features;
  for (Eigen::Index i = 0; i < samples; ++i) {
    const double label = (i % 2 == 0) ? 1.0 : -1.0;
    Sample s;
    s.label = label;
    for (Eigen::Index jf = 0; jf < features; ++jf) {
      double v = 0.45 * label * (1.0 - overlap) * dir[jf] + 0.25 * rng.normal();
      v = std::clamp(v, -1.0, 1.0);
      if (v != 0.0) s.features.emplace_back(jf + 1, v);
    }
    d.rows.push_back(std::move(s));
  }
  return d;
}

}  // namespace bidca
