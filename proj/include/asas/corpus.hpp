#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace asas::corpus {

struct ScoredResponse {
  std::string id;
  int prompt_id = 0;
  std::string text;
  std::optional<int> score1;
  std::optional<int> score2;

  bool operator==(const ScoredResponse&) const = default;
};

/// Column names in the dataset header. Score columns may be missing from a
/// file (the public test set carries none); their cells then parse as absent.
struct ColumnMap {
  std::string id = "Id";
  std::string prompt = "EssaySet";
  std::string score1 = "Score1";
  std::string score2 = "Score2";
  std::string text = "EssayText";
};

std::vector<ScoredResponse> parse_dataset(std::string_view tsv, const ColumnMap& columns = {});
std::string serialize_dataset(std::span<const ScoredResponse> responses, const ColumnMap& columns = {});

/// Reads an id -> score answer key (CSV or TSV, detected from the header).
std::unordered_map<std::string, int> parse_solution(std::string_view text, std::string_view id_column = "id",
                                                    std::string_view score_column = "essay_score");

/// Fills score1 of each response from the answer key; ids missing from the
/// key raise UnknownResponseId.
void join_scores(std::vector<ScoredResponse>& responses, const std::unordered_map<std::string, int>& key);

struct Split {
  std::vector<ScoredResponse> train;
  std::vector<ScoredResponse> dev;
};

/// Unstratified seeded split: round(dev_fraction * N) responses go to dev.
/// Both halves keep the input's relative order.
Split split_dev(std::span<const ScoredResponse> responses, double dev_fraction, std::uint64_t seed);

/// One prompt's data with the label range derived from train and dev.
struct PromptCorpus {
  int prompt_id = 0;
  std::vector<ScoredResponse> train;
  std::vector<ScoredResponse> dev;
  std::vector<ScoredResponse> test;
  int min_score = 0;
  int k = 0;
  std::string prompt_text;

  /// Zero-based class label of `score` in [0, k).
  int label(int score) const { return score - min_score; }
  std::vector<int> labels(std::span<const ScoredResponse> split) const;
  std::vector<std::string> ids(std::span<const ScoredResponse> split) const;
};

/// Selects `prompt_id` from `all`, splits train/dev, attaches test rows for the
/// same prompt and validates label ranges.
PromptCorpus make_prompt_corpus(std::span<const ScoredResponse> all, int prompt_id, double dev_fraction,
                                std::uint64_t seed, std::span<const ScoredResponse> test = {},
                                std::string prompt_text = {});

/// Per-prompt corpus summary.
struct StatsRow {
  int prompt_id = 0;
  std::size_t n_train = 0;
  std::size_t n_dev = 0;
  std::size_t n_test = 0;
  double dev_qwk = 0.0;
  double dev_accuracy = 0.0;
  double avg_length = 0.0;
};

StatsRow corpus_stats(const PromptCorpus& corpus);
std::string stats_tsv_header();
std::string stats_tsv_row(const StatsRow& row);

std::size_t word_count(std::string_view text);

/// Clamp for log-probabilities after renormalisation; exp(-30) is below
/// double-precision resolution of any probability sum near 1.
inline constexpr double kLogProbFloor = -30.0;

/// Per-response class log-probabilities emitted by one model.
struct LogProbMatrix {
  std::string model_name;
  int prompt_id = 0;
  int k = 0;
  std::vector<std::string> order;                     // file order
  std::unordered_map<std::string, Eigen::VectorXd> rows;

  const Eigen::VectorXd* find(const std::string& id) const {
    auto it = rows.find(id);
    return it == rows.end() ? nullptr : &it->second;
  }
};

/// Parses the log-prob interchange format and renormalises every row with
/// log-softmax (entries clamped below at kLogProbFloor).
LogProbMatrix load_logprobs(std::string_view text);
std::string write_logprobs(const LogProbMatrix& m, std::string_view extra_header_fields = {});

/// Rejects rows whose id is not in the corpus (UnknownResponseId) and a k
/// that differs from the corpus (HeaderMismatch).
void validate_logprobs(const LogProbMatrix& m, const PromptCorpus& corpus);

struct EmbeddingTable {
  int dim = 0;
  std::unordered_map<std::string, Eigen::VectorXd> rows;
};

EmbeddingTable load_embeddings(std::string_view text);

}  // namespace asas::corpus
