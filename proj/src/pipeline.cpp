#include "asas/pipeline.hpp"

#include <cmath>

#include "asas/numeric.hpp"
#include "asas/rng.hpp"

namespace asas::pipeline {

FeatureParams FeatureParams::from(const hyperopt::Params& p) {
  FeatureParams f;
  f.learning_rate = p.at("learning_rate");
  f.batch_size = static_cast<int>(std::lround(p.at("batch_size")));
  f.tfidf_dim = static_cast<int>(std::lround(p.at("tfidf_dim")));
  f.cutoff = p.at("cutoff");
  return f;
}

hyperopt::Params FeatureParams::to_params() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", static_cast<double>(batch_size)},
          {"tfidf_dim", static_cast<double>(tfidf_dim)},
          {"cutoff", cutoff}};
}

namespace {

corpus::LogProbMatrix logprobs_for(const learners::MlpModel& model, const features::FeatureMatrix& x, int prompt_id) {
  const Eigen::MatrixXd lp = log_softmax_rows(learners::mlp_forward(model, x.data));
  corpus::LogProbMatrix m;
  m.model_name = kFeatureModelName;
  m.prompt_id = prompt_id;
  m.k = model.k;
  m.order = x.ids;
  for (std::size_t i = 0; i < x.ids.size(); ++i)
    m.rows.emplace(x.ids[i], lp.row(static_cast<Eigen::Index>(i)).transpose().cwiseMax(corpus::kLogProbFloor));
  return m;
}

}  // namespace

FeatureModel train_feature_model(const features::FeatureWorkspace& workspace, const corpus::PromptCorpus& corpus,
                                 const FeatureParams& params, const TrainOptions& options) {
  FeatureModel out;
  out.spec = workspace.spec(params.tfidf_dim, params.cutoff);
  learners::Dataset train{workspace.features(out.spec, corpus.train).data, corpus.labels(corpus.train)};
  learners::Dataset dev{workspace.features(out.spec, corpus.dev).data, corpus.labels(corpus.dev)};

  learners::TrainConfig config;
  config.learning_rate = params.learning_rate;
  config.batch_size = params.batch_size;
  config.epochs = options.epochs;
  config.weight_decay = options.weight_decay;
  config.seed = derive_seed(options.seed, 2);
  const int k = corpus.k;
  auto init = learners::MlpModel::init(out.spec.dim(), options.hidden, k, derive_seed(options.seed, 3));
  out.training = learners::train_early_stop(std::move(init), train, dev, config,
                                            [k](std::span<const int> gold, std::span<const int> predicted) {
                                              return metrics::qwk(gold, predicted, k);
                                            });
  const auto dev_pred = argmax_rows(learners::mlp_forward(out.training.best, dev.x));
  out.dev_report = metrics::evaluate(corpus.prompt_id, dev.y, dev_pred, k);

  std::vector<corpus::ScoredResponse> scored(corpus.dev);
  scored.insert(scored.end(), corpus.test.begin(), corpus.test.end());
  out.logprobs = logprobs_for(out.training.best, workspace.features(out.spec, scored), corpus.prompt_id);
  return out;
}

TunedFeatureModel tune_feature_model(const features::FeatureWorkspace& workspace, const corpus::PromptCorpus& corpus,
                                     int n_trials, const TrainOptions& options,
                                     std::span<const hyperopt::TrialRecord> resume) {
  TunedFeatureModel out;
  const auto space = hyperopt::SearchSpace::feature_default();
  auto objective = [&](const hyperopt::Params& p) {
    const auto model = train_feature_model(workspace, corpus, FeatureParams::from(p), options);
    double best = -1.0;
    for (const auto& h : model.training.history) best = std::max(best, h.dev_qwk);
    return best;
  };
  out.study = hyperopt::run_study(space, objective, n_trials, derive_seed(options.seed, 4), {}, resume);
  out.best = FeatureParams::from(out.study.best.params);
  out.model = train_feature_model(workspace, corpus, out.best, options);
  return out;
}

corpus::LogProbMatrix predict_logprobs(const features::FeatureModelSpec& spec, const learners::MlpModel& model,
                                       std::span<const corpus::ScoredResponse> responses, int prompt_id,
                                       const corpus::EmbeddingTable* embeddings) {
  return logprobs_for(model, features::build_features(spec, responses, embeddings), prompt_id);
}

}  // namespace asas::pipeline
