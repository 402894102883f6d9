#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "asas/rng.hpp"

namespace asas::hyperopt {

enum class Scale { Uniform, LogUniform, IntUniform };

struct ParamSpec {
  std::string name;
  Scale scale = Scale::Uniform;
  double lo = 0.0;
  double hi = 1.0;
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  /// Transformer fine-tuning study: batch 6..12, learning rate 5e-6..1e-4 (log).
  static SearchSpace lm_default();
  /// Feature-model study: learning rate, batch, tf-idf dimension 100..300 and
  /// near-match cutoff 0.5..1.0.
  static SearchSpace feature_default();

  void validate() const;
  bool contains(const std::map<std::string, double>& params) const;
};

using Params = std::map<std::string, double>;

enum class TrialStatus { Completed, Failed };

struct TrialRecord {
  int index = 0;
  Params params;
  double objective = 0.0;  // NaN when failed
  TrialStatus status = TrialStatus::Completed;
};

struct StudyResult {
  std::vector<TrialRecord> trials;
  TrialRecord best;
};

struct TpeOptions {
  int n_startup = 5;
  double gamma = 0.25;
  int n_candidates = 24;
  double min_bandwidth_fraction = 0.01;
};

/// Mixture of truncated Gaussians on [lo, hi]: one kernel per observation
/// (Scott bandwidth, floored at width / min(1 / fraction, n + 1)) plus one prior-wide kernel at the midpoint,
/// all equally weighted.
class ParzenEstimator {
 public:
  ParzenEstimator(std::span<const double> observations, double lo, double hi, double min_bandwidth_fraction);

  double log_pdf(double x) const;
  double sample(Rng& rng) const;
  double bandwidth() const { return bandwidth_; }

 private:
  struct Kernel {
    double mu, sigma, log_mass;
  };
  double lo_, hi_, bandwidth_;
  std::vector<Kernel> kernels_;
};

/// Draws one value per parameter from its prior (uniform in the transformed
/// space; integers uniform over the inclusive range).
Params sample_prior(const SearchSpace& space, Rng& rng);

/// Next configuration given the completed and failed trials so far.
Params suggest(const SearchSpace& space, std::span<const TrialRecord> history, std::uint64_t seed,
               const TpeOptions& options = {});

/// Returns the objective to maximize; throwing or returning a non-finite
/// value marks the trial failed.
using Objective = std::function<double(const Params&)>;

/// Sequential ask/tell loop until `n_trials` trials exist. Trials already in
/// `resume` are kept; trial i always uses seed derive_seed(seed, i), so a
/// resumed study continues exactly where an uninterrupted one would.
StudyResult run_study(const SearchSpace& space, const Objective& objective, int n_trials, std::uint64_t seed,
                      const TpeOptions& options = {}, std::span<const TrialRecord> resume = {});

/// `trial\t<param>...\tobjective\tstatus`
std::string study_log_tsv(const SearchSpace& space, std::span<const TrialRecord> trials);
std::vector<TrialRecord> parse_study_log(const SearchSpace& space, std::string_view text);

}  // namespace asas::hyperopt
