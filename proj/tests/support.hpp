// Oracles and fixtures shared by the unit and acceptance suites. Nothing
// here calls into the library's own metric or matching code.
#pragma once

#include <Eigen/Dense>
#include <boost/rational.hpp>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "asas/corpus.hpp"
#include "asas/hyperopt.hpp"
#include "asas/rng.hpp"

namespace asas::testing {

// Quadratic weighted kappa via the pairwise-distance identity
//   1 - n * sum_i (a_i - b_i)^2 / sum_i sum_j (a_i - b_j)^2
// in exact rationals. Returns 1 when the denominator vanishes (both raters
// constant on the same label).
inline boost::rational<long long> qwk_exact(std::span<const int> a, std::span<const int> b) {
  const long long n = static_cast<long long>(a.size());
  long long observed = 0, expected = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    observed += static_cast<long long>(a[i] - b[i]) * (a[i] - b[i]);
    for (std::size_t j = 0; j < b.size(); ++j) expected += static_cast<long long>(a[i] - b[j]) * (a[i] - b[j]);
  }
  if (expected == 0) return observed == 0 ? 1 : 0;
  return boost::rational<long long>(1) - boost::rational<long long>(n * observed, expected);
}

inline double to_double(const boost::rational<long long>& r) {
  return static_cast<double>(static_cast<long double>(r.numerator()) / static_cast<long double>(r.denominator()));
}

// Distinct substrings of `s` of length L that occur in `p`, for L = 5..19.
inline Eigen::VectorXd substring_overlap_oracle(const std::string& s, const std::string& p) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(15);
  for (std::size_t len = 5; len <= 19; ++len) {
    std::set<std::string> hits;
    for (std::size_t i = 0; i + len <= s.size(); ++i) {
      const std::string sub = s.substr(i, len);
      if (p.find(sub) != std::string::npos) hits.insert(sub);
    }
    out(static_cast<Eigen::Index>(len - 5)) = static_cast<double>(hits.size());
  }
  return out;
}

// Number of length-n token windows of `tokens` equal to `key` (space joined).
inline int exact_window_count(const std::vector<std::string>& tokens, const std::string& key, int n) {
  int count = 0;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string w;
    for (int j = 0; j < n; ++j) w += (j ? " " : "") + tokens[i + static_cast<std::size_t>(j)];
    count += w == key;
  }
  return count;
}

// Central-difference gradient of f at x.
inline Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x(i);
    x(i) = keep + h;
    const double up = f(x);
    x(i) = keep - h;
    const double down = f(x);
    x(i) = keep;
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm() + b.norm(), 1e-12);
  return (a - b).norm() / scale;
}

// Synthetic short-answer data: the score controls how many key terms appear.
inline std::vector<corpus::ScoredResponse> synthetic_responses(int prompt, int n, int k, std::uint64_t seed,
                                                               double noise = 0.1, int first_id = 1) {
  static const std::vector<std::string> keys{"osmosis", "membrane", "diffusion", "gradient", "solute", "water"};
  static const std::vector<std::string> filler{"the", "cell", "moves", "into", "out", "because",
                                               "it",  "and",  "then",  "some", "of",  "was"};
  Rng rng(seed);
  std::vector<corpus::ScoredResponse> out;
  for (int i = 0; i < n; ++i) {
    const int score = static_cast<int>(rng.index(static_cast<std::uint64_t>(k)));
    std::vector<std::string> words;
    const int len = 6 + static_cast<int>(rng.index(8));
    for (int w = 0; w < len; ++w) words.push_back(filler[rng.index(filler.size())]);
    for (int w = 0; w < 2 * score; ++w) words.push_back(keys[rng.index(keys.size())]);
    rng.shuffle(words);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    int second = score;
    if (rng.uniform() < noise) second = std::clamp(score + (rng.uniform() < 0.5 ? -1 : 1), 0, k - 1);
    out.push_back({std::to_string(first_id + i), prompt, text + ".", score, second});
  }
  return out;
}

inline std::string dataset_tsv(std::span<const corpus::ScoredResponse> rows) {
  return corpus::serialize_dataset(rows);
}

// In-memory log-prob source that records every id it is asked for.
struct FakeMember {
  std::string model_name;
  int prompt_id = 0;
  int k = 0;
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> rows;
  mutable std::vector<std::string> accessed;

  const Eigen::VectorXd* find(const std::string& id) const {
    accessed.push_back(id);
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return &rows[i];
    return nullptr;
  }
};

inline Eigen::VectorXd peaked_row(int label, int k, double confidence) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(k, std::log((1.0 - confidence) / (k - 1)));
  v(label) = std::log(confidence);
  return v;
}

// Dev/test corpus with three members for one prompt (k = 3):
//   a: right except it calls every 2 a 1
//   b: right except it calls every 1 a 0
//   c: right 40% of the time, otherwise uniform guess
// a and b are individually flawed but jointly identify every label.
struct EnsembleFixture {
  std::vector<corpus::ScoredResponse> labeled;  // train + dev, input order
  corpus::PromptCorpus corpus;
  std::vector<FakeMember> members;
};

inline EnsembleFixture complementary_fixture(std::uint64_t seed, int n = 120, int prompt = 1) {
  auto rows = synthetic_responses(prompt, n, 3, seed, 0.0);
  std::vector<corpus::ScoredResponse> test;
  for (std::size_t i = 0; i < rows.size() / 4; ++i) {
    auto t = rows.back();
    rows.pop_back();
    t.id = "t" + t.id;
    test.push_back(t);
  }
  EnsembleFixture f;
  f.labeled = rows;
  f.corpus = corpus::make_prompt_corpus(rows, prompt, 0.5, seed, test);
  Rng rng(derive_seed(seed, 7));
  f.members = {{"a", prompt, 3, {}, {}, {}}, {"b", prompt, 3, {}, {}, {}}, {"c", prompt, 3, {}, {}, {}}};
  for (const auto* split : {&f.corpus.dev, &f.corpus.test})
    for (const auto& r : *split) {
      const int y = f.corpus.label(*r.score1);
      const int guess_c = rng.uniform() < 0.4 ? y : static_cast<int>(rng.index(3));
      const int guesses[3] = {y == 2 ? 1 : y, y == 1 ? 0 : y, guess_c};
      for (int m = 0; m < 3; ++m) {
        f.members[static_cast<std::size_t>(m)].ids.push_back(r.id);
        f.members[static_cast<std::size_t>(m)].rows.push_back(peaked_row(guesses[m], 3, m == 2 ? 0.5 : 0.7));
      }
    }
  return f;
}

// Best objective on f(x) = -(x - 0.3)^2 over uniform(0, 1) after `trials`
// evaluations, for TPE and for plain prior sampling.
struct BenchmarkRun {
  double tpe_best_x = 0.0;
  double tpe_best = 0.0;
  double prior_best = 0.0;
};

inline BenchmarkRun quadratic_benchmark(std::uint64_t seed, int trials = 20) {
  const hyperopt::SearchSpace space{{{"x", hyperopt::Scale::Uniform, 0.0, 1.0}}};
  const auto f = [](const hyperopt::Params& p) { return -(p.at("x") - 0.3) * (p.at("x") - 0.3); };
  BenchmarkRun run;
  const auto study = hyperopt::run_study(space, f, trials, seed);
  run.tpe_best_x = study.best.params.at("x");
  run.tpe_best = study.best.objective;
  Rng rng(derive_seed(seed, 0xB0B));
  run.prior_best = -1e300;
  for (int t = 0; t < trials; ++t) run.prior_best = std::max(run.prior_best, f(hyperopt::sample_prior(space, rng)));
  return run;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace asas::testing
