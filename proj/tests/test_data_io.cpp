#include <doctest.h>

#include <json.hpp>

#include "bidca/data_io.hpp"

#include <sstream>

using namespace bidca;

TEST_CASE("libsvm parser reads the documented format") {
  std::istringstream in("+1 1:0.5 3:-1\n-1\n");
  const Dataset d = parse_libsvm(in);
  REQUIRE(d.size() == 2);
  CHECK(d.n == 3);
  CHECK(d.rows[0].label == 1.0);
  REQUIRE(d.rows[0].features.size() == 2);
  CHECK(d.rows[0].features[0] == std::pair<Eigen::Index, double>{1, 0.5});
  CHECK(d.rows[0].features[1] == std::pair<Eigen::Index, double>{3, -1.0});
  CHECK(d.rows[1].label == -1.0);
  CHECK(d.rows[1].features.empty());
}

TEST_CASE("parser reports malformed lines with their number") {
  SUBCASE("non-increasing index") {
    std::istringstream in("1 2:0.1 2:0.2\n");
    try {
      parse_libsvm(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 1") != std::string::npos);
      CHECK(std::string(e.what()).find("non-increasing") != std::string::npos);
    }
  }
  SUBCASE("zero index") {
    std::istringstream in("+1 1:1\n-1 0:2\n");
    try {
      parse_libsvm(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("garbage token") {
    std::istringstream in("+1 banana\n");
    CHECK_THROWS_AS(parse_libsvm(in), ParseError);
  }
}

TEST_CASE("comment lines and blank lines are skipped") {
  std::istringstream in("# header\n\n+1 1:2\n  # indented comment\n-1 1:-2\n");
  const Dataset d = parse_libsvm(in);
  CHECK(d.size() == 2);
}

TEST_CASE("label schemes are normalized to -1/+1") {
  SUBCASE("zero-one") {
    std::istringstream in("0 1:1\n1 1:2\n");
    const Dataset d = parse_libsvm(in);
    CHECK(d.rows[0].label == -1.0);
    CHECK(d.rows[1].label == 1.0);
  }
  SUBCASE("one-two") {
    std::istringstream in("1 1:1\n2 1:2\n");
    const Dataset d = parse_libsvm(in);
    CHECK(d.rows[0].label == 1.0);
    CHECK(d.rows[1].label == -1.0);
  }
  SUBCASE("two-four, the smaller label is positive") {
    std::istringstream in("2 1:1\n4 1:2\n");
    const Dataset d = parse_libsvm(in);
    CHECK(d.rows[0].label == 1.0);
    CHECK(d.rows[1].label == -1.0);
  }
  SUBCASE("anything else is rejected") {
    std::istringstream in("1 1:1\n3 1:2\n");
    CHECK_THROWS_AS(parse_libsvm(in), ParseError);
  }
}

TEST_CASE("parse-serialize-parse is the identity on a fuzz corpus") {
  Rng rng(71);
  std::ostringstream corpus;
  for (int i = 0; i < 1000; ++i) {
    corpus << (rng.next_below(2) == 0 ? "+1" : "-1");
    Eigen::Index idx = 0;
    const int nf = static_cast<int>(rng.next_below(10));
    for (int jf = 0; jf < nf; ++jf) {
      idx += 1 + static_cast<Eigen::Index>(rng.next_below(7));
      corpus << ' ' << idx << ':' << rng.uniform(-10.0, 10.0);
    }
    corpus << '\n';
  }
  std::istringstream in1(corpus.str());
  const Dataset d1 = parse_libsvm(in1);
  const std::string s1 = serialize_libsvm(d1);
  std::istringstream in2(s1);
  const Dataset d2 = parse_libsvm(in2);
  REQUIRE(d1.size() == d2.size());
  CHECK(d1.n == d2.n);
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    CHECK(d1.rows[static_cast<size_t>(i)].label == d2.rows[static_cast<size_t>(i)].label);
    CHECK(d1.rows[static_cast<size_t>(i)].features ==
          d2.rows[static_cast<size_t>(i)].features);
  }
  // and the second serialization is byte-identical
  CHECK(s1 == serialize_libsvm(d2));
}

TEST_CASE("split sizes follow the ceiling rule") {
  const Dataset big = synthetic_classification(690, 4, 1);
  const auto [tr, te] = split(big, 5, 0.5);
  CHECK(tr.size() == 345);
  CHECK(te.size() == 345);

  const Dataset three = synthetic_classification(3, 2, 1);
  const auto [t3, e3] = split(three, 5, 0.5);
  CHECK(t3.size() == 2);
  CHECK(e3.size() == 1);
}

TEST_CASE("split is deterministic and validates input") {
  const Dataset d = synthetic_classification(40, 3, 2);
  const auto [a1, b1] = split(d, 9, 0.6);
  const auto [a2, b2] = split(d, 9, 0.6);
  CHECK(serialize_libsvm(a1) == serialize_libsvm(a2));
  CHECK(serialize_libsvm(b1) == serialize_libsvm(b2));
  const auto [a3, b3] = split(d, 10, 0.6);
  CHECK(serialize_libsvm(a1) != serialize_libsvm(a3));
  CHECK_THROWS_AS(split(d, 1, 0.0), InvalidInput);
  CHECK_THROWS_AS(split(d, 1, 1.0), InvalidInput);
  const Dataset one = synthetic_classification(2, 2, 3);
  CHECK_THROWS_AS(split(one, 1, 0.99), InvalidInput);  // test side empty
}

TEST_CASE("fold plan: contiguous blocks after a seeded shuffle") {
  const Dataset nine = synthetic_classification(9, 2, 4);
  const FoldPlan p9 = fold_plan(nine, 3, 1);
  CHECK(p9.fold_size(0) == 3);
  CHECK(p9.fold_size(1) == 3);
  CHECK(p9.fold_size(2) == 3);

  const Dataset ten = synthetic_classification(10, 2, 4);
  const FoldPlan p10 = fold_plan(ten, 3, 1);
  CHECK(p10.fold_size(0) == 4);  // the remainder goes to the first folds
  CHECK(p10.fold_size(1) == 3);
  CHECK(p10.fold_size(2) == 3);

  // partition: every row has exactly one fold
  for (int a : p10.assignment) CHECK((a >= 0 && a < 3));

  const FoldPlan q = fold_plan(ten, 3, 1);
  CHECK(q.assignment == p10.assignment);
  CHECK_THROWS_AS(fold_plan(ten, 1, 1), InvalidInput);
  CHECK_THROWS_AS(fold_plan(ten, 11, 1), InvalidInput);
}

TEST_CASE("result documents carry per-run records and an aggregate") {
  std::vector<RunRecord> records;
  for (int i = 0; i < 20; ++i) {
    RunRecord r;
    r.dataset = "synthetic";
    r.method = "ipdca";
    r.epsilon = 1e-2;
    r.tol = 1e-2;
    r.seed = static_cast<uint64_t>(i);
    r.cv_error = 0.1 + 0.01 * i;
    r.test_error = 0.2;
    r.time_sec = 1.0;
    r.iters = 5;
    r.beta_final = 1.0;
    r.status = "converged";
    r.config_json = "{\"model\":\"svm-cv\"}";
    records.push_back(r);
  }
  std::ostringstream out;
  write_results(records, out);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<nlohmann::json> parsed;
  while (std::getline(lines, line)) parsed.push_back(nlohmann::json::parse(line));
  REQUIRE(parsed.size() == 21);
  CHECK(parsed[0]["dataset"] == "synthetic");
  CHECK(parsed[0]["config"]["model"] == "svm-cv");
  const nlohmann::json agg = parsed.back();
  CHECK(agg["record"] == "aggregate");
  CHECK(agg["runs"] == 20);
  CHECK(agg["completed"] == 20);
  // mean of 0.1 + 0.01 i over i = 0..19
  CHECK(agg["cv_error_mean"].get<double>() == doctest::Approx(0.195));
  CHECK(agg["test_error_std"].get<double>() == doctest::Approx(0.0));

  SUBCASE("single run: aggregate equals the run with zero std") {
    std::vector<RunRecord> one(records.begin(), records.begin() + 1);
    std::ostringstream o2;
    write_results(one, o2);
    std::istringstream l2(o2.str());
    std::vector<nlohmann::json> p2;
    while (std::getline(l2, line)) p2.push_back(nlohmann::json::parse(line));
    REQUIRE(p2.size() == 2);
    CHECK(p2[1]["cv_error_mean"].get<double>() == doctest::Approx(0.1));
    CHECK(p2[1]["cv_error_std"].get<double>() == 0.0);
  }
  SUBCASE("an empty batch is an error, never an empty document") {
    std::ostringstream o3;
    CHECK_THROWS_AS(write_results({}, o3), IoError);
  }
  SUBCASE("failed runs are excluded from the aggregate") {
    records[3].status = "max_iterations";
    std::ostringstream o4;
    write_results(records, o4);
    std::istringstream l4(o4.str());
    std::vector<nlohmann::json> p4;
    while (std::getline(l4, line)) p4.push_back(nlohmann::json::parse(line));
    CHECK(p4.back()["completed"] == 19);
  }
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(123, 0), b(123, 0), c(123, 1);
  bool differs = false;
  for (int i = 0; i < 64; ++i) {
    const uint64_t ua = a.next_u64();
    CHECK(ua == b.next_u64());
    if (ua != c.next_u64()) differs = true;
  }
  CHECK(differs);
  Rng u(7);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.next_double();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    CHECK(u.next_below(10) < 10);
  }
}

TEST_CASE("synthetic datasets are reproducible and balanced") {
  const Dataset a = synthetic_classification(50, 5, 77);
  const Dataset b = synthetic_classification(50, 5, 77);
  CHECK(serialize_libsvm(a) == serialize_libsvm(b));
  Eigen::Index pos = 0;
  for (const Sample& s : a.rows) {
    if (s.label > 0) ++pos;
  }
  CHECK(pos == 25);
}
