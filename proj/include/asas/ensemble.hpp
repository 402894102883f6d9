#pragma once

#include <Eigen/Dense>
#include <concepts>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asas/corpus.hpp"
#include "asas/error.hpp"
#include "asas/learners.hpp"
#include "asas/metrics.hpp"
#include "asas/numeric.hpp"

namespace asas::ensemble {

/// Anything that maps response ids to k class log-probabilities.
/// `corpus::LogProbMatrix` is the production model.
template <class M>
concept LogProbSource = requires(const M& m, const std::string& id) {
  { m.model_name } -> std::convertible_to<std::string>;
  { m.prompt_id } -> std::convertible_to<int>;
  { m.k } -> std::convertible_to<int>;
  { m.find(id) } -> std::convertible_to<const Eigen::VectorXd*>;
};

struct DesignMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd data;  // N x (M*k), member blocks in member order
};

inline constexpr double kStackerL2 = 1e-4;
// With l2 this small the objective is flat along some directions, so the
// default gradient tolerance leaves visible slack in the fitted log-probs.
inline constexpr learners::LogRegOptions kStackerSolver{1e-6, 5000};

struct EnsembleSpec {
  std::vector<std::string> members;
  learners::LogRegModel head;
  int prompt_id = 0;
  int k = 0;
};

struct EnsemblePrediction {
  std::vector<std::string> ids;
  std::vector<int> labels;
  Eigen::MatrixXd logprobs;
};

namespace detail {

template <LogProbSource M>
void check_members(const std::vector<M>& members) {
  if (members.empty()) fail(Errc::EmptyInput, "no ensemble members");
  for (const auto& m : members) {
    if (m.k != members.front().k)
      fail(Errc::KMismatch, "member '" + std::string(m.model_name) + "' has k=" + std::to_string(m.k) + ", '" +
                                std::string(members.front().model_name) + "' has k=" +
                                std::to_string(members.front().k));
    if (m.prompt_id != members.front().prompt_id)
      fail(Errc::KMismatch, "member '" + std::string(m.model_name) + "' belongs to prompt " +
                                std::to_string(m.prompt_id));
  }
}

}  // namespace detail

/// One row per id with member blocks concatenated in member order.
template <LogProbSource M>
DesignMatrix assemble(const std::vector<M>& members, std::span<const std::string> ids) {
  detail::check_members(members);
  const int k = members.front().k;
  DesignMatrix d;
  d.ids.assign(ids.begin(), ids.end());
  d.data.resize(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(members.size()) * k);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t m = 0; m < members.size(); ++m) {
      const Eigen::VectorXd* row = members[m].find(ids[i]);
      if (!row)
        fail(Errc::CoverageGap, "member '" + std::string(members[m].model_name) + "' has no row for id '" + ids[i] + "'");
      if (row->size() != k) fail(Errc::KMismatch, "member '" + std::string(members[m].model_name) + "' row width");
      d.data.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m) * k, 1, k) = row->transpose();
    }
  }
  return d;
}

/// Argmax class of a single member over `ids`.
template <LogProbSource M>
std::vector<int> member_predictions(const M& member, std::span<const std::string> ids) {
  std::vector<M> one{member};
  return argmax_rows(assemble(one, ids).data);
}

/// Fits the logistic-regression head on the dev split's design matrix against
/// Score1. Only dev ids are read from the members.
template <LogProbSource M>
EnsembleSpec fit_ensemble(const std::vector<M>& members, const corpus::PromptCorpus& corpus,
                          double l2 = kStackerL2) {
  detail::check_members(members);
  if (members.front().k != corpus.k)
    fail(Errc::KMismatch, "members have k=" + std::to_string(members.front().k) + ", corpus has k=" +
                              std::to_string(corpus.k));
  const auto ids = corpus.ids(corpus.dev);
  const auto design = assemble(members, ids);
  EnsembleSpec spec;
  for (const auto& m : members) spec.members.emplace_back(m.model_name);
  spec.head = learners::logreg_fit(design.data, corpus.labels(corpus.dev), corpus.k, l2, kStackerSolver);
  spec.prompt_id = corpus.prompt_id;
  spec.k = corpus.k;
  return spec;
}

/// Scores `ids` with the head; members are matched to the spec by name, so
/// `members` may hold extra models in any order.
template <LogProbSource M>
EnsemblePrediction score_ensemble(const EnsembleSpec& spec, const std::vector<M>& members,
                                  std::span<const std::string> ids) {
  std::vector<M> ordered;
  for (const auto& name : spec.members) {
    const M* found = nullptr;
    for (const auto& m : members)
      if (m.model_name == name) found = &m;
    if (!found) fail(Errc::CoverageGap, "ensemble member '" + name + "' was not supplied");
    ordered.push_back(*found);
  }
  const auto design = assemble(ordered, ids);
  EnsemblePrediction p;
  p.ids = design.ids;
  p.logprobs = learners::logreg_logprobs(spec.head, design.data);
  p.labels = argmax_rows(p.logprobs);
  return p;
}

struct Candidate {
  std::string name;
  std::vector<metrics::EvalReport> dev_reports;  // one per prompt
};

/// Top `m` candidates by mean dev QWK across prompts; ties by name.
std::vector<std::string> select_best_subset(std::span<const Candidate> candidates, int m);

/// Report for one prompt's split against Score1.
metrics::EvalReport evaluate_run(std::span<const int> predicted, const corpus::PromptCorpus& corpus,
                                 std::span<const corpus::ScoredResponse> split,
                                 std::optional<double> human_qwk = std::nullopt);

/// Per-prompt rows followed by the mean row.
std::string report_tsv(std::span<const metrics::EvalReport> per_prompt);

corpus::LogProbMatrix to_logprob_matrix(const EnsemblePrediction& prediction, std::string model_name, int prompt_id);

std::string serialize_ensemble(const EnsembleSpec& spec);
EnsembleSpec parse_ensemble(std::string_view text);

}  // namespace asas::ensemble
