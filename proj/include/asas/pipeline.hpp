#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "asas/corpus.hpp"
#include "asas/features.hpp"
#include "asas/hyperopt.hpp"
#include "asas/learners.hpp"
#include "asas/metrics.hpp"

namespace asas::pipeline {

/// Hyperparameters tuned for the feature model.
struct FeatureParams {
  double learning_rate = 5e-5;
  int batch_size = 8;
  int tfidf_dim = 200;
  double cutoff = 0.8;

  static FeatureParams from(const hyperopt::Params& p);
  hyperopt::Params to_params() const;
};

struct TrainOptions {
  int epochs = 20;
  int hidden = learners::kDefaultHidden;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
};

inline constexpr const char* kFeatureModelName = "features";

struct FeatureModel {
  features::FeatureModelSpec spec;
  learners::TrainResult training;
  metrics::EvalReport dev_report;
  /// Log-softmax of the MLP logits over dev and test ids.
  corpus::LogProbMatrix logprobs;
};

FeatureModel train_feature_model(const features::FeatureWorkspace& workspace, const corpus::PromptCorpus& corpus,
                                 const FeatureParams& params, const TrainOptions& options);

struct TunedFeatureModel {
  hyperopt::StudyResult study;
  FeatureParams best;
  FeatureModel model;
};

/// TPE over `hyperopt::SearchSpace::feature_default()`; the objective is the
/// best dev QWK of an early-stopped run. The final model is retrained with
/// the winning parameters.
TunedFeatureModel tune_feature_model(const features::FeatureWorkspace& workspace, const corpus::PromptCorpus& corpus,
                                     int n_trials, const TrainOptions& options,
                                     std::span<const hyperopt::TrialRecord> resume = {});

/// Scores arbitrary responses with a saved spec + MLP.
corpus::LogProbMatrix predict_logprobs(const features::FeatureModelSpec& spec, const learners::MlpModel& model,
                                       std::span<const corpus::ScoredResponse> responses, int prompt_id,
                                       const corpus::EmbeddingTable* embeddings = nullptr);

}  // namespace asas::pipeline
