#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <set>

#include "asas/error.hpp"
#include "asas/features.hpp"
#include "asas/rng.hpp"
#include "asas/text.hpp"
#include "support.hpp"

using namespace asas;
using features::KeyNgram;

namespace {

// Longest common substring by brute force; ties go to the smallest i, then j.
text::MatchingBlock brute_longest(const std::string& a, const std::string& b, std::size_t alo, std::size_t ahi,
                                  std::size_t blo, std::size_t bhi) {
  text::MatchingBlock best{alo, blo, 0};
  for (std::size_t i = alo; i < ahi; ++i)
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      while (i + k < ahi && j + k < bhi && a[i + k] == b[j + k]) ++k;
      if (k > best.size) best = {i, j, k};
    }
  return best;
}

std::size_t brute_matched(const std::string& a, const std::string& b, std::size_t alo, std::size_t ahi,
                          std::size_t blo, std::size_t bhi) {
  if (alo >= ahi || blo >= bhi) return 0;
  const auto m = brute_longest(a, b, alo, ahi, blo, bhi);
  if (m.size == 0) return 0;
  return m.size + brute_matched(a, b, alo, m.a, blo, m.b) + brute_matched(a, b, m.a + m.size, ahi, m.b + m.size, bhi);
}

std::string random_string(Rng& rng, std::size_t max_len, std::string_view alphabet) {
  std::string s(rng.index(max_len + 1), ' ');
  for (auto& c : s) c = alphabet[rng.index(alphabet.size())];
  return s;
}

corpus::PromptCorpus toy_corpus(int n = 80, std::uint64_t seed = 3) {
  auto rows = testing::synthetic_responses(1, n, 3, seed);
  return corpus::make_prompt_corpus(rows, 1, 0.25, 5, {}, "Explain how osmosis moves water across a membrane.");
}

}  // namespace

TEST_CASE("normalize and tokenize") {
  CHECK(text::normalize_text("Osmosis, 2x: Water!") == "osmosisxwater");
  CHECK(text::tokenize("  The cell's \"membrane\", (water)... ") ==
        std::vector<std::string>{"the", "cell's", "membrane", "water"});
  CHECK(text::tokenize("--- !!").empty());
  CHECK(text::codepoints("caf\xc3\xa9") == 4);
}

TEST_CASE("stopword list has 150 distinct entries") {
  const auto words = text::stopwords();
  CHECK(words.size() == 150);
  CHECK(std::set<std::string_view>(words.begin(), words.end()).size() == 150);
  CHECK(text::is_stopword("the"));
  CHECK_FALSE(text::is_stopword("osmosis"));
}

TEST_CASE("similarity ratio matches reference values") {
  CHECK(text::similarity_ratio("abcd", "bcde") == doctest::Approx(0.75));
  CHECK(text::similarity_ratio("osmosis", "osmotic") == doctest::Approx(0.7142857142857143));
  CHECK(text::similarity_ratio("the cell membrane", "cell membranes") == doctest::Approx(0.8387096774193549));
  CHECK(text::similarity_ratio("kitten", "sitting") == doctest::Approx(0.6153846153846154));
  CHECK(text::similarity_ratio("water moves", "moves water") == doctest::Approx(0.45454545454545453));
  CHECK(text::similarity_ratio("", "abc") == 0.0);
  CHECK(text::similarity_ratio("", "") == 1.0);

  const auto blocks = text::matching_blocks("abxcd", "abcd");
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0] == text::MatchingBlock{0, 0, 2});
  CHECK(blocks[1] == text::MatchingBlock{3, 2, 2});
  // Earliest position in a wins among equally long matches.
  CHECK(text::matching_blocks("aaaa", "aa").front() == text::MatchingBlock{0, 0, 2});
}

TEST_CASE("similarity ratio agrees with a brute-force matcher") {
  Rng rng(17);
  for (int t = 0; t < 400; ++t) {
    const auto a = random_string(rng, 14, "abc d");
    const auto b = random_string(rng, 14, "abc d");
    const double expect =
        a.empty() && b.empty() ? 1.0
                               : 2.0 * static_cast<double>(brute_matched(a, b, 0, a.size(), 0, b.size())) /
                                     static_cast<double>(a.size() + b.size());
    CHECK(text::similarity_ratio(a, b) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(text::quick_ratio(a, b) >= text::similarity_ratio(a, b));
  }
}

TEST_CASE("minutiae overlap matches the substring oracle") {
  Rng rng(5);
  for (int t = 0; t < 300; ++t) {
    const auto r = random_string(rng, 25, "ab");
    const auto p = random_string(rng, 30, "ab");
    CHECK(features::minutiae_overlap(r, p) == testing::substring_overlap_oracle(r, p));
  }
  // Normalization drops case, digits and punctuation before matching.
  const auto v = features::minutiae_overlap("OSMOSIS!", "osmosis is 12 fun");
  CHECK(v(0) == 3);  // osmos, smosi, mosis
  CHECK(v(2) == 1);  // osmosis
  CHECK(v.size() == features::kMinutiaeDims);
  CHECK(features::minutiae_overlap("anything at all", "").isZero());
}

TEST_CASE("chi-squared on presence by class") {
  const std::vector<int> present{2, 0}, sizes{2, 2};
  CHECK(features::chi_squared(present, sizes) == doctest::Approx(4.0));
  const std::vector<int> everywhere{2, 2};
  CHECK(features::chi_squared(everywhere, sizes) == doctest::Approx(0.0));
}

TEST_CASE("key n-grams rank the discriminating term first") {
  const std::vector<std::string> texts{"osmosis moves the water", "the water moves by osmosis", "the water moves",
                                       "water moves the cell"};
  const std::vector<int> labels{1, 1, 0, 0};
  const auto keys = features::select_key_ngrams(texts, labels, 4);
  REQUIRE(keys.size() == 12);
  CHECK(keys[0] == KeyNgram{"osmosis", 1, 4.0});
  for (int i = 0; i < 4; ++i) CHECK(keys[static_cast<std::size_t>(i)].order == 1);
  for (int i = 4; i < 8; ++i) CHECK(keys[static_cast<std::size_t>(i)].order == 2);
  // "the" and "water" occur everywhere: zero score, ordered after positives.
  CHECK(std::find_if(keys.begin(), keys.begin() + 4, [](const KeyNgram& k) { return k.text == "water"; }) ==
        keys.begin() + 4);

  const std::vector<std::string> tiny{"a", "b"};
  const std::vector<int> tiny_labels{0, 1};
  const auto padded = features::select_key_ngrams(tiny, tiny_labels, 3);
  REQUIRE(padded.size() == 9);
  CHECK(padded[2].text.empty());  // only two unigrams exist
  CHECK(padded[3].text.empty());  // no bigrams at all

  const std::vector<int> one_class{1, 1};
  CHECK_THROWS_AS(features::select_key_ngrams(tiny, one_class, 3), Error);
}

TEST_CASE("near-match counting") {
  const std::vector<KeyNgram> keys{{"osmosis", 1, 1}, {"cell membrane", 2, 1}, {"", 1, 0}};
  const auto c = features::near_match_count("Osmotic flow: the cell membranes and the cell membrane.", keys, 0.7);
  CHECK(c(0) == 1);  // "osmotic" at 0.714
  CHECK(c(1) == 2);
  CHECK(c(2) == 0);
  CHECK(features::near_match_count("Osmotic flow", keys, 0.75)(0) == 0);
  CHECK_THROWS_AS(features::near_match_count("x", keys, 0.4), Error);
  CHECK_THROWS_AS(features::near_match_count("x", keys, 1.01), Error);

  Rng rng(8);
  const std::vector<std::string> vocab{"osmosis", "osmotic", "water", "cell", "cells", "membrane"};
  for (int t = 0; t < 50; ++t) {
    std::string response;
    for (int w = 0; w < 12; ++w) response += vocab[rng.index(vocab.size())] + " ";
    std::vector<KeyNgram> ks;
    for (int g = 0; g < 6; ++g) {
      const int order = 1 + static_cast<int>(rng.index(2));
      std::string k = vocab[rng.index(vocab.size())];
      if (order == 2) k += " " + vocab[rng.index(vocab.size())];
      ks.push_back({k, order, 1.0});
    }
    const features::NearMatchProfile profile(response, ks);
    for (double cutoff : {0.5, 0.6, 0.7142857142857143, 0.8, 0.9, 1.0})
      CHECK(profile.counts(cutoff) == features::near_match_count(response, ks, cutoff));
    const auto tokens = text::tokenize(response);
    const auto exact = features::near_match_count(response, ks, 1.0);
    for (std::size_t g = 0; g < ks.size(); ++g)
      CHECK(exact(static_cast<Eigen::Index>(g)) == testing::exact_window_count(tokens, ks[g].text, ks[g].order));
  }
}

TEST_CASE("tf-idf projection on orthogonal documents") {
  const std::vector<std::string> texts{"alpha", "beta", "gamma"};
  const auto m = features::fit_tfidf_projection(texts, 3);
  CHECK(m.terms == std::vector<std::string>{"alpha", "beta", "gamma"});
  CHECK(m.idf(0) == doctest::Approx(std::log(4.0 / 2.0) + 1.0));
  CHECK(m.dim() == 3);
  CHECK_FALSE(m.rank_deficient());
  for (int i = 0; i < 3; ++i) CHECK(m.eigenvalues(i) == doctest::Approx(1.0));
  CHECK((m.projection.transpose() * m.projection).isIdentity(1e-12));
  const Eigen::MatrixXd p = features::project(m, texts);
  for (int i = 0; i < 3; ++i) CHECK(p.row(i).norm() == doctest::Approx(1.0));
  // Unknown terms project to zero.
  const std::vector<std::string> unseen{"delta epsilon"};
  CHECK(features::project(m, unseen).isZero());
}

TEST_CASE("tf-idf spectrum matches an SVD of the tf-idf matrix") {
  for (int docs : {6, 40}) {  // dual route when the vocabulary outgrows the documents, primal otherwise
    auto rows = testing::synthetic_responses(1, docs, 3, static_cast<std::uint64_t>(docs));
    std::vector<std::string> texts;
    for (const auto& r : rows) texts.push_back(r.text);
    const auto m = features::fit_tfidf_projection(texts, 5);
    const Eigen::MatrixXd x = features::tfidf_rows(m, texts);
    for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(x.row(i).norm() == doctest::Approx(1.0));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    REQUIRE(m.dim() == 5);
    CHECK((m.projection.transpose() * m.projection).isIdentity(1e-9));
    for (int j = 0; j < 5; ++j) {
      const double s = svd.singularValues()(j);
      CHECK(m.eigenvalues(j) == doctest::Approx(s * s).epsilon(1e-9));
      if (j + 1 < 5 && svd.singularValues()(j) - svd.singularValues()(j + 1) > 1e-6 && (j == 0 || svd.singularValues()(j - 1) - s > 1e-6)) {
        const double cosine = std::abs(m.projection.col(j).dot(svd.matrixV().col(j)));
        CHECK(cosine == doctest::Approx(1.0).epsilon(1e-8));
      }
      Eigen::Index arg = 0;
      m.projection.col(j).cwiseAbs().maxCoeff(&arg);
      CHECK(m.projection(arg, j) > 0.0);
    }
    CHECK(m.eigenvalues(0) >= m.eigenvalues(4));
  }
}

TEST_CASE("tf-idf rank deficiency") {
  const std::vector<std::string> same{"a b", "a b", "b a"};
  const auto m = features::fit_tfidf_projection(same, 5);
  CHECK(m.dim() == 1);
  CHECK(m.rank_deficient());
  const std::vector<std::string> empty{"", "..."};
  try {
    features::fit_tfidf_projection(empty, 2);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RankDeficient);
  }
}

TEST_CASE("text statistics") {
  const auto s = features::text_stats("The cat sat.");
  Eigen::VectorXd expect(10);
  expect << 12, 3, 1, 3, 3, 1, 1, 0, 1.0 / 3.0, 3;
  CHECK(s.isApprox(expect));

  const auto t = features::text_stats("  Water moves in 2 ways! Why? Because of osmosis...  ");
  CHECK(t(1) == 9);
  CHECK(t(2) == 3);
  CHECK(t(7) == 1);
  CHECK(t(9) == 7);
  CHECK(features::text_stats("   ").isZero());
}

TEST_CASE("standardizer") {
  Eigen::MatrixXd x(4, 3);
  x << 1, 5, 0, 2, 5, 1, 3, 5, 0, 4, 5, 1;
  const auto s = features::Standardizer::fit(x);
  CHECK(s.mean(0) == doctest::Approx(2.5));
  CHECK(s.sd(0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.sd(1) == 0.0);
  const Eigen::MatrixXd z = s.apply(x);
  CHECK(z.col(1).isZero());
  CHECK(z.col(0).mean() == doctest::Approx(0.0));
  CHECK(z.col(0).squaredNorm() / 4 == doctest::Approx(1.0));
  CHECK_THROWS_AS(s.apply(Eigen::MatrixXd(2, 2)), Error);
}

TEST_CASE("feature assembly, serialization and workspace agree") {
  const auto c = toy_corpus();
  const features::FeatureConfig config{120, 0.7, features::kNgramsPerOrder};
  const auto spec = features::fit_feature_spec(c, config);
  CHECK(spec.dim() == spec.tfidf.dim() + features::kMinutiaeDims + features::kNgramDims + features::kTextStatDims);

  const auto train = features::build_features(spec, c.train);
  CHECK(train.data.rows() == static_cast<Eigen::Index>(c.train.size()));
  CHECK(train.dim() == spec.dim());
  CHECK(train.ids.front() == c.train.front().id);
  for (Eigen::Index j = 0; j < train.data.cols(); ++j) CHECK(std::abs(train.data.col(j).mean()) < 1e-9);

  const auto reparsed = features::parse_spec(features::serialize_spec(spec));
  CHECK(features::build_features(reparsed, c.dev).data == features::build_features(spec, c.dev).data);
  CHECK(features::serialize_spec(reparsed) == features::serialize_spec(spec));

  const features::FeatureWorkspace ws(c);
  const auto wspec = ws.spec(config.tfidf_dim, config.near_match_cutoff);
  CHECK(wspec.dim() == spec.dim());
  const auto direct = features::build_features(wspec, c.dev);
  const auto cached = ws.features(wspec, c.dev);
  CHECK(cached.ids == direct.ids);
  CHECK((cached.data - direct.data).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((wspec.standardizer.mean - spec.standardizer.mean).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("feature spec with embeddings") {
  const auto c = toy_corpus(40);
  corpus::EmbeddingTable table;
  table.dim = 2;
  Rng rng(1);
  for (const auto* split : {&c.train, &c.dev})
    for (const auto& r : *split) table.rows[r.id] = Eigen::Vector2d(rng.normal(), rng.normal());
  const auto spec = features::fit_feature_spec(c, {100, 0.8, 5}, &table);
  CHECK(spec.embedding_dim == 2);
  CHECK(spec.dim() == 2 + spec.tfidf.dim() + 15 + 15 + 10);
  const auto f = features::build_features(spec, c.dev, &table);
  CHECK(f.dim() == spec.dim());

  try {
    features::build_features(spec, c.dev);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingEmbedding);
  }
  auto partial = table;
  partial.rows.erase(c.dev.front().id);
  CHECK_THROWS_AS(features::build_features(spec, c.dev, &partial), Error);
  auto wide = table;
  wide.dim = 3;
  try {
    features::build_features(spec, c.dev, &wide);
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimMismatch);
  }
}

TEST_CASE("parse_spec rejects foreign files") {
  CHECK_THROWS_AS(features::parse_spec("asas-mlp v1\n"), Error);
}
