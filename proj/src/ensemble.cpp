#include "asas/ensemble.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "asas/textio.hpp"

namespace asas::ensemble {

std::vector<std::string> select_best_subset(std::span<const Candidate> candidates, int m) {
  if (m < 1 || static_cast<std::size_t>(m) > candidates.size())
    fail(Errc::TooFewCandidates, "asked for " + std::to_string(m) + " of " + std::to_string(candidates.size()) +
                                     " candidates");
  std::vector<int> prompts;
  for (const auto& r : candidates.front().dev_reports) prompts.push_back(r.prompt_id);
  std::sort(prompts.begin(), prompts.end());

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& c : candidates) {
    std::vector<int> mine;
    for (const auto& r : c.dev_reports) mine.push_back(r.prompt_id);
    std::sort(mine.begin(), mine.end());
    if (mine != prompts || mine.empty())
      fail(Errc::InvalidArgument, "candidate '" + c.name + "' does not cover the same prompts");
    ranked.emplace_back(metrics::mean_report(c.dev_reports).qwk, c.name);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (int i = 0; i < m; ++i) out.push_back(ranked[static_cast<std::size_t>(i)].second);
  return out;
}

metrics::EvalReport evaluate_run(std::span<const int> predicted, const corpus::PromptCorpus& corpus,
                                 std::span<const corpus::ScoredResponse> split, std::optional<double> human_qwk) {
  const auto gold = corpus.labels(split);
  return metrics::evaluate(corpus.prompt_id, gold, predicted, corpus.k, human_qwk);
}

std::string report_tsv(std::span<const metrics::EvalReport> per_prompt) {
  std::ostringstream os;
  os << metrics::report_tsv_header() << '\n';
  for (const auto& r : per_prompt) os << metrics::report_tsv_row(r) << '\n';
  if (!per_prompt.empty()) os << metrics::report_tsv_row(metrics::mean_report(per_prompt), "mean") << '\n';
  return os.str();
}

corpus::LogProbMatrix to_logprob_matrix(const EnsemblePrediction& p, std::string model_name, int prompt_id) {
  corpus::LogProbMatrix m;
  m.model_name = std::move(model_name);
  m.prompt_id = prompt_id;
  m.k = static_cast<int>(p.logprobs.cols());
  m.order = p.ids;
  for (std::size_t i = 0; i < p.ids.size(); ++i)
    m.rows.emplace(p.ids[i], p.logprobs.row(static_cast<Eigen::Index>(i)).transpose());
  return m;
}

std::string serialize_ensemble(const EnsembleSpec& spec) {
  std::ostringstream os;
  os << "asas-ensemble v1\n";
  os << "prompt=" << spec.prompt_id << "\nk=" << spec.k << "\nmembers=" << spec.members.size() << '\n';
  for (const auto& m : spec.members) os << m << '\n';
  os << learners::serialize_logreg(spec.head);
  return os.str();
}

EnsembleSpec parse_ensemble(std::string_view text) {
  textio::LineReader in{std::string(text)};
  if (in.expect("magic") != "asas-ensemble v1") fail(Errc::HeaderMismatch, "not an ensemble spec");
  EnsembleSpec spec;
  spec.prompt_id = static_cast<int>(textio::parse_int(in.expect_value("prompt")));
  spec.k = static_cast<int>(textio::parse_int(in.expect_value("k")));
  const auto n = textio::parse_int(in.expect_value("members"));
  for (long long i = 0; i < n; ++i) spec.members.emplace_back(in.expect("member name"));
  // The head is the remainder of the document.
  std::string rest;
  std::string_view line;
  while (in.next(line)) {
    rest.append(line);
    rest.push_back('\n');
  }
  spec.head = learners::parse_logreg(rest);
  if (spec.head.k() != spec.k || spec.head.weights.rows() != static_cast<Eigen::Index>(spec.members.size()) * spec.k)
    fail(Errc::DimMismatch, "ensemble head shape does not match members and k");
  return spec;
}

}  // namespace asas::ensemble
