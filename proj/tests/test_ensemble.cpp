#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "asas/ensemble.hpp"
#include "asas/error.hpp"
#include "asas/textio.hpp"
#include "support.hpp"

using namespace asas;
using namespace asas::ensemble;
using testing::FakeMember;

namespace {

double dev_qwk(const std::vector<FakeMember>& members, const corpus::PromptCorpus& c) {
  const auto spec = fit_ensemble(members, c);
  const auto pred = score_ensemble(spec, members, c.ids(c.dev));
  return evaluate_run(pred.labels, c, c.dev).qwk;
}

double member_dev_qwk(const FakeMember& m, const corpus::PromptCorpus& c) {
  return evaluate_run(member_predictions(m, c.ids(c.dev)), c, c.dev).qwk;
}

std::vector<FakeMember> pick(const std::vector<FakeMember>& all, std::initializer_list<std::size_t> idx) {
  std::vector<FakeMember> out;
  for (auto i : idx) out.push_back(all[i]);
  return out;
}

Candidate candidate(std::string name, std::vector<double> qwks) {
  Candidate c{std::move(name), {}};
  for (std::size_t p = 0; p < qwks.size(); ++p) {
    metrics::EvalReport r;
    r.prompt_id = static_cast<int>(p) + 1;
    r.qwk = qwks[p];
    c.dev_reports.push_back(r);
  }
  return c;
}

}  // namespace

TEST_CASE("design matrix layout") {
  FakeMember a{"a", 1, 2, {"x", "y"}, {Eigen::Vector2d(-0.1, -2.0), Eigen::Vector2d(-3.0, -0.05)}, {}};
  FakeMember b{"b", 1, 2, {"y", "x"}, {Eigen::Vector2d(-1.0, -0.5), Eigen::Vector2d(-0.2, -1.7)}, {}};
  const std::vector<std::string> ids{"y", "x"};
  const auto d = assemble(std::vector<FakeMember>{a, b}, ids);
  Eigen::MatrixXd expect(2, 4);
  expect << -3.0, -0.05, -1.0, -0.5, -0.1, -2.0, -0.2, -1.7;
  CHECK(d.data == expect);
  CHECK(d.ids == ids);

  const std::vector<std::string> missing{"x", "z"};
  try {
    assemble(std::vector<FakeMember>{a, b}, missing);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CoverageGap);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  FakeMember wide{"w", 1, 3, {"x"}, {Eigen::Vector3d(-1, -1, -1)}, {}};
  try {
    assemble(std::vector<FakeMember>{a, wide}, std::vector<std::string>{"x"});
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::KMismatch);
  }
}

TEST_CASE("stacker is fitted on dev ids only") {
  auto f = testing::complementary_fixture(3);
  for (auto& m : f.members) m.accessed.clear();
  const auto spec = fit_ensemble(f.members, f.corpus);
  const auto dev = f.corpus.ids(f.corpus.dev);
  const std::set<std::string> dev_ids(dev.begin(), dev.end());
  for (const auto& m : f.members) {
    CHECK_FALSE(m.accessed.empty());
    for (const auto& id : m.accessed) CHECK(dev_ids.count(id) == 1);
  }
  CHECK(spec.members == std::vector<std::string>{"a", "b", "c"});
  CHECK(spec.head.weights.rows() == 9);
}

TEST_CASE("complementary members stack above each member") {
  const auto f = testing::complementary_fixture(5);
  const double qa = member_dev_qwk(f.members[0], f.corpus);
  const double qb = member_dev_qwk(f.members[1], f.corpus);
  const double stacked = dev_qwk(pick(f.members, {0, 1}), f.corpus);
  CHECK(qa < 0.95);
  CHECK(qb < 0.95);
  CHECK(stacked == doctest::Approx(1.0));

  // Held-out test split benefits as well.
  const auto members = pick(f.members, {0, 1});
  const auto spec = fit_ensemble(members, f.corpus);
  const auto pred = score_ensemble(spec, members, f.corpus.ids(f.corpus.test));
  CHECK(evaluate_run(pred.labels, f.corpus, f.corpus.test).qwk == doctest::Approx(1.0));
}

TEST_CASE("perfect, duplicated and uninformative members") {
  auto f = testing::complementary_fixture(8);
  FakeMember perfect{"p", 1, 3, {}, {}, {}};
  for (const auto* split : {&f.corpus.dev, &f.corpus.test})
    for (const auto& r : *split) {
      perfect.ids.push_back(r.id);
      perfect.rows.push_back(testing::peaked_row(f.corpus.label(*r.score1), 3, 0.9));
    }
  CHECK(dev_qwk({perfect}, f.corpus) == 1.0);
  CHECK(dev_qwk({perfect, f.members[2]}, f.corpus) == 1.0);

  auto twin = f.members[2];
  twin.model_name = "c2";
  const double single = dev_qwk({f.members[2]}, f.corpus);
  CHECK(dev_qwk({f.members[2], twin}, f.corpus) == doctest::Approx(single));

  FakeMember uniform{"u", 1, 3, perfect.ids, {}, {}};
  for (std::size_t i = 0; i < perfect.ids.size(); ++i) uniform.rows.push_back(Eigen::Vector3d::Constant(std::log(1.0 / 3)));
  const auto spec = fit_ensemble(std::vector<FakeMember>{uniform}, f.corpus);
  const auto pred = score_ensemble(spec, std::vector<FakeMember>{uniform}, f.corpus.ids(f.corpus.dev));
  std::vector<int> counts(3, 0);
  for (int y : f.corpus.labels(f.corpus.dev)) ++counts[static_cast<std::size_t>(y)];
  const int majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  for (int y : pred.labels) CHECK(y == majority);
}

TEST_CASE("constant shifts of a member do not change predictions") {
  const auto f = testing::complementary_fixture(11);
  auto members = f.members;
  auto shifted = members;
  for (auto& row : shifted[1].rows) row.array() += 2.5;
  const auto ids = f.corpus.ids(f.corpus.test);
  const auto p0 = score_ensemble(fit_ensemble(members, f.corpus), members, ids);
  const auto p1 = score_ensemble(fit_ensemble(shifted, f.corpus), shifted, ids);
  CHECK(p0.labels == p1.labels);
  // Both fits stop at the solver's gradient tolerance; with the small l2 the
  // remaining slack in the log-probs is of order tolerance / l2.
  CHECK((p0.logprobs - p1.logprobs).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("scoring matches members by name and reports gaps") {
  const auto f = testing::complementary_fixture(2);
  const auto members = pick(f.members, {0, 1});
  const auto spec = fit_ensemble(members, f.corpus);
  const auto reversed = pick(f.members, {1, 0, 2});
  const auto ids = f.corpus.ids(f.corpus.test);
  CHECK(score_ensemble(spec, reversed, ids).logprobs == score_ensemble(spec, members, ids).logprobs);

  auto gap = members;
  gap[1].ids.pop_back();
  gap[1].rows.pop_back();
  try {
    score_ensemble(spec, gap, ids);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CoverageGap);
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(score_ensemble(spec, pick(f.members, {0}), ids), Error);
}

TEST_CASE("best subset selection") {
  // Dev means: deberta_base 0.80, roberta_large 0.79, electra_large 0.78, bert_base 0.70.
  const std::vector<Candidate> cands{candidate("bert_base", {0.70, 0.70}), candidate("electra_large", {0.76, 0.80}),
                                     candidate("deberta_base", {0.82, 0.78}), candidate("roberta_large", {0.80, 0.78})};
  CHECK(select_best_subset(cands, 2) == std::vector<std::string>{"deberta_base", "roberta_large"});
  CHECK(select_best_subset(cands, 3) == std::vector<std::string>{"deberta_base", "roberta_large", "electra_large"});

  const std::vector<Candidate> tied{candidate("zeta", {0.5}), candidate("alpha", {0.5})};
  CHECK(select_best_subset(tied, 1) == std::vector<std::string>{"alpha"});
  try {
    select_best_subset(tied, 3);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewCandidates);
  }
}

TEST_CASE("report table has one row per prompt plus mean") {
  metrics::EvalReport a, b;
  a.prompt_id = 1;
  a.qwk = 0.8;
  a.n = 10;
  b.prompt_id = 2;
  b.qwk = 0.6;
  b.n = 20;
  b.flags.smd_violation = true;
  const auto tsv = report_tsv(std::vector<metrics::EvalReport>{a, b});
  CHECK(tsv ==
        "prompt\tqwk\tsmd\tacc\tn\tflags\n"
        "1\t0.800\t0.000\t0.000\t10\t-\n"
        "2\t0.600\t0.000\t0.000\t20\tSmdViolation\n"
        "mean\t0.700\t0.000\t0.000\t30\t-\n");
}

TEST_CASE("ensemble spec round trip and golden output") {
  const auto f = testing::complementary_fixture(21);
  const auto spec = fit_ensemble(f.members, f.corpus);
  const auto text = serialize_ensemble(spec);
  const auto back = parse_ensemble(text);
  CHECK(back.members == spec.members);
  CHECK(back.head.weights == spec.head.weights);
  CHECK(back.head.bias == spec.head.bias);
  CHECK(serialize_ensemble(back) == text);
  CHECK_THROWS_AS(parse_ensemble("asas-mlp v1\n"), Error);

  const auto ids = f.corpus.ids(f.corpus.test);
  const auto pred = score_ensemble(spec, f.members, ids);
  const auto golden = corpus::write_logprobs(to_logprob_matrix(pred, "ensemble", 1));
  CHECK(corpus::write_logprobs(to_logprob_matrix(score_ensemble(back, f.members, ids), "ensemble", 1)) == golden);

  const std::string path = std::string(ASAS_TEST_DATA) + "/ensemble_golden.logprobs";
  if (std::getenv("ASAS_UPDATE_GOLDEN")) textio::write_file(path, golden);
  const auto stored = corpus::load_logprobs(textio::read_file(path));
  const auto fresh = corpus::load_logprobs(golden);
  REQUIRE(stored.order == ids);
  for (const auto& id : ids) CHECK((*stored.find(id) - *fresh.find(id)).cwiseAbs().maxCoeff() < 1e-9);
}
