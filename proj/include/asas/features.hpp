#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "asas/corpus.hpp"

namespace asas::features {

inline constexpr int kMinutiaeMinLength = 5;
inline constexpr int kMinutiaeMaxLength = 19;
inline constexpr int kMinutiaeDims = kMinutiaeMaxLength - kMinutiaeMinLength + 1;
inline constexpr int kNgramOrders = 3;
inline constexpr int kNgramsPerOrder = 30;
inline constexpr int kNgramDims = kNgramOrders * kNgramsPerOrder;
inline constexpr int kTextStatDims = 10;
inline constexpr int kMinTfidfDim = 100;
inline constexpr int kMaxTfidfDim = 300;
inline constexpr double kMinCutoff = 0.5;
inline constexpr double kMaxCutoff = 1.0;

// ---------------------------------------------------------------------------
// Prompt overlap

/// Component L-5 counts the distinct length-L substrings (L = 5..19) of the
/// normalized response that also occur in the normalized prompt.
Eigen::VectorXd minutiae_overlap(std::string_view response, std::string_view prompt);

/// Precomputed prompt substrings for repeated `minutiae_overlap` queries.
class MinutiaeIndex {
 public:
  explicit MinutiaeIndex(std::string_view prompt);

  Eigen::VectorXd overlap(std::string_view response) const;
  const std::string& normalized_prompt() const { return prompt_; }

 private:
  std::string prompt_;
  std::vector<std::unordered_set<std::string_view>> substrings_;
};

// ---------------------------------------------------------------------------
// Key n-grams

struct KeyNgram {
  std::string text;  // empty marks padding; always counts zero
  int order = 0;
  double score = 0.0;  // chi-squared against score class

  bool operator==(const KeyNgram&) const = default;
};

/// Chi-squared statistic of a presence/absence by class contingency table.
/// `present[c]` documents of class c (out of `class_sizes[c]`) contain the term.
double chi_squared(std::span<const int> present, std::span<const int> class_sizes);

/// Top `n_per_order` word n-grams for n = 1, 2, 3 ranked by chi-squared
/// association between n-gram presence and score class; ties broken
/// lexicographically. Orders with too few candidates are padded.
std::vector<KeyNgram> select_key_ngrams(std::span<const std::string> texts, std::span<const int> labels,
                                        int n_per_order = kNgramsPerOrder);

/// For each key n-gram, the number of equal-length token windows of the
/// response whose similarity ratio with it is at least `cutoff`.
Eigen::VectorXd near_match_count(std::string_view response, std::span<const KeyNgram> keys, double cutoff);

/// Similarity ratios >= kMinCutoff of every window against every key n-gram,
/// so counts for any cutoff in [0.5, 1] come from one pass.
class NearMatchProfile {
 public:
  NearMatchProfile(std::string_view response, std::span<const KeyNgram> keys);
  Eigen::VectorXd counts(double cutoff) const;

 private:
  std::vector<std::vector<double>> ratios_;  // sorted descending per key
};

// ---------------------------------------------------------------------------
// TF-IDF eigen-projection

struct TfidfProjection {
  std::vector<std::string> terms;  // sorted; position = column index
  std::unordered_map<std::string, int> index;
  Eigen::VectorXd idf;
  Eigen::MatrixXd projection;   // V x d, orthonormal columns
  Eigen::VectorXd eigenvalues;  // top-d eigenvalues of X^T X, descending
  int requested_dim = 0;

  int dim() const { return static_cast<int>(projection.cols()); }
  bool rank_deficient() const { return dim() < requested_dim; }
  /// First `d` columns; the leading eigenpairs do not depend on how many are kept.
  TfidfProjection truncated(int d) const;
};

/// Unigram tf-idf over the training texts (idf = ln((1+N)/(1+df)) + 1, rows
/// L2-normalized) and the top `d_t` eigenvectors of the Gram matrix X^T X.
/// Each eigenvector is sign-fixed so its largest-magnitude entry is positive.
/// Fewer than `d_t` nonzero eigenvalues shrink the dimension (see
/// `rank_deficient()`); none at all raises RankDeficient.
TfidfProjection fit_tfidf_projection(std::span<const std::string> train_texts, int d_t);

/// N x V tf-idf rows (L2-normalized) for arbitrary texts; unseen terms ignored.
Eigen::MatrixXd tfidf_rows(const TfidfProjection& model, std::span<const std::string> texts);
Eigen::MatrixXd project(const TfidfProjection& model, std::span<const std::string> texts);

// ---------------------------------------------------------------------------
// Text statistics

/// (chars, words, sentences, mean word length, mean sentence length,
///  type-token ratio, punctuation, digits, stopword fraction, longest word).
Eigen::VectorXd text_stats(std::string_view s);

// ---------------------------------------------------------------------------
// Assembly

/// Column standardization with population statistics. Columns whose sd is
/// zero map to zero.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // 0 marks a constant column

  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct FeatureConfig {
  int tfidf_dim = kMaxTfidfDim;
  double near_match_cutoff = 0.8;
  int ngrams_per_order = kNgramsPerOrder;
};

struct FeatureModelSpec {
  TfidfProjection tfidf;
  std::vector<KeyNgram> key_ngrams;
  double near_match_cutoff = 0.8;
  Standardizer standardizer;
  std::optional<int> embedding_dim;
  std::string prompt_minutiae;

  int dim() const;
};

struct FeatureMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd data;

  int dim() const { return static_cast<int>(data.cols()); }
};

/// Fits every extractor and the standardizer on `corpus.train`.
FeatureModelSpec fit_feature_spec(const corpus::PromptCorpus& corpus, const FeatureConfig& config,
                                  const corpus::EmbeddingTable* embeddings = nullptr);

/// Unstandardized blocks: embeddings | tfidf | minutiae | near matches | stats.
Eigen::MatrixXd raw_features(const FeatureModelSpec& spec, std::span<const corpus::ScoredResponse> responses,
                             const corpus::EmbeddingTable* embeddings = nullptr);

/// Standardized feature matrix using the spec's train statistics.
FeatureMatrix build_features(const FeatureModelSpec& spec, std::span<const corpus::ScoredResponse> responses,
                             const corpus::EmbeddingTable* embeddings = nullptr);

std::string serialize_spec(const FeatureModelSpec& spec);
FeatureModelSpec parse_spec(std::string_view text);

/// Extractor outputs cached per response so hyperparameter trials that vary
/// only the tf-idf dimension and the near-match cutoff skip re-extraction.
/// `spec(d, c)` and `features(...)` agree exactly with `fit_feature_spec` +
/// `build_features` under the same configuration.
class FeatureWorkspace {
 public:
  FeatureWorkspace(const corpus::PromptCorpus& corpus, const corpus::EmbeddingTable* embeddings = nullptr,
                   int max_tfidf_dim = kMaxTfidfDim, int ngrams_per_order = kNgramsPerOrder);
  ~FeatureWorkspace();
  FeatureWorkspace(FeatureWorkspace&&) noexcept;

  FeatureModelSpec spec(int tfidf_dim, double cutoff) const;
  FeatureMatrix features(const FeatureModelSpec& spec, std::span<const corpus::ScoredResponse> split) const;
  int max_tfidf_dim() const;

 private:
  struct Cached;
  std::unique_ptr<Cached> cache_;
};

}  // namespace asas::features
