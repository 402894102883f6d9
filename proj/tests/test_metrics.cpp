#include <doctest.h>

#include <cmath>
#include <vector>

#include "asas/error.hpp"
#include "asas/metrics.hpp"
#include "asas/rng.hpp"
#include "support.hpp"

using namespace asas;
using V = std::vector<int>;

TEST_CASE("qwk hand values") {
  CHECK(metrics::qwk(V{0, 1, 2}, V{0, 1, 2}, 3) == 1.0);
  CHECK(metrics::qwk(V{0, 1}, V{1, 0}, 2) == doctest::Approx(-1.0));
  CHECK(metrics::qwk(V{0, 0, 1, 1}, V{0, 1, 0, 1}, 2) == doctest::Approx(0.0));
  // Both raters constant on the same label: no disagreement at all.
  CHECK(metrics::qwk(V{2, 2, 2}, V{2, 2, 2}, 4) == 1.0);
  // One rater constant, the other not: kappa is zero.
  CHECK(metrics::qwk(V{1, 1, 1}, V{0, 1, 2}, 3) == doctest::Approx(0.0));
}

TEST_CASE("qwk matches the rational oracle on random vectors") {
  Rng rng(99);
  for (int t = 0; t < 500; ++t) {
    const int k = 2 + static_cast<int>(rng.index(5));
    const int n = 1 + static_cast<int>(rng.index(40));
    V a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.index(k));
      b[i] = static_cast<int>(rng.index(k));
    }
    CHECK(metrics::qwk(a, b, k) == doctest::Approx(testing::to_double(testing::qwk_exact(a, b))).epsilon(1e-12));
  }
}

TEST_CASE("qwk does not depend on unused label range") {
  const V a{0, 1, 1, 2}, b{0, 2, 1, 1};
  CHECK(metrics::qwk(a, b, 3) == doctest::Approx(metrics::qwk(a, b, 7)));
}

TEST_CASE("qwk errors") {
  CHECK_THROWS_AS(metrics::qwk(V{0, 1}, V{0}, 2), Error);
  CHECK_THROWS_AS(metrics::qwk(V{}, V{}, 2), Error);
  CHECK_THROWS_AS(metrics::qwk(V{0, 3}, V{0, 1}, 3), Error);
  try {
    metrics::qwk(V{0, -1}, V{0, 1}, 3);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LabelOutOfRange);
  }
}

TEST_CASE("smd hand values and degenerate cases") {
  CHECK(metrics::smd(V{0, 0, 1, 1}, V{1, 1, 1, 1}) == doctest::Approx(std::sqrt(2.0)));
  CHECK(metrics::smd(V{0, 0, 1, 1}, V{0, 0, 1, 1}) == 0.0);
  CHECK(metrics::smd(V{2, 2}, V{2, 2}) == 0.0);
  try {
    metrics::smd(V{1, 1}, V{2, 2});
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateDistribution);
  }
}

TEST_CASE("accuracy") {
  CHECK(metrics::accuracy(V{0, 1, 2, 2}, V{0, 1, 1, 2}) == 0.75);
}

TEST_CASE("production check thresholds") {
  metrics::EvalReport r;
  r.qwk = 0.80;
  r.smd = 0.15;
  auto c = metrics::production_check(r, 0.90);
  CHECK_FALSE(c.flags.smd_violation);  // strict inequality
  CHECK_FALSE(c.flags.qwk_degradation);
  CHECK(*c.qwk_gap_vs_human == doctest::Approx(0.10));

  r.smd = -0.151;
  r.qwk = 0.70;
  c = metrics::production_check(r, 0.90);
  CHECK(c.flags.smd_violation);
  CHECK(c.flags.qwk_degradation);
  CHECK(metrics::flags_string(c.flags) == "SmdViolation,QwkDegradation");

  c = metrics::production_check(r, std::nullopt);
  CHECK_FALSE(c.flags.qwk_degradation);
  CHECK_FALSE(c.qwk_gap_vs_human.has_value());
}

TEST_CASE("evaluate and mean report") {
  const V gold{0, 1, 2, 2, 1}, pred{0, 1, 2, 1, 1};
  const auto r = metrics::evaluate(5, gold, pred, 3);
  CHECK(r.prompt_id == 5);
  CHECK(r.n == 5);
  CHECK(r.accuracy == doctest::Approx(0.8));
  CHECK(r.qwk == doctest::Approx(testing::to_double(testing::qwk_exact(gold, pred))));
  CHECK(r.smd == doctest::Approx(metrics::smd(gold, pred)));

  auto r2 = r;
  r2.qwk = 0.5;
  r2.flags.smd_violation = true;
  const std::vector<metrics::EvalReport> both{r, r2};
  const auto m = metrics::mean_report(both);
  CHECK(m.qwk == doctest::Approx((r.qwk + 0.5) / 2));
  CHECK(m.n == 10);
  CHECK(metrics::flags_string(m.flags) == "-");
  CHECK(metrics::report_tsv_row(m, "mean").rfind("mean\t", 0) == 0);
  CHECK(metrics::report_tsv_header() == "prompt\tqwk\tsmd\tacc\tn\tflags");
}
