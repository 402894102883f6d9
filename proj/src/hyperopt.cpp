#include "asas/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "asas/error.hpp"
#include "asas/textio.hpp"

namespace asas::hyperopt {

SearchSpace SearchSpace::lm_default() {
  return {{{"batch_size", Scale::IntUniform, 6, 12}, {"learning_rate", Scale::LogUniform, 5e-6, 1e-4}}};
}

SearchSpace SearchSpace::feature_default() {
  return {{{"learning_rate", Scale::LogUniform, 5e-6, 1e-4},
           {"batch_size", Scale::IntUniform, 6, 12},
           {"tfidf_dim", Scale::IntUniform, 100, 300},
           {"cutoff", Scale::Uniform, 0.5, 1.0}}};
}

void SearchSpace::validate() const {
  if (params.empty()) fail(Errc::EmptySpace, "search space has no parameters");
  for (const auto& p : params) {
    if (!(p.lo < p.hi)) fail(Errc::InvalidArgument, "parameter '" + p.name + "' needs lo < hi");
    if (p.scale == Scale::LogUniform && p.lo <= 0.0)
      fail(Errc::InvalidArgument, "log-uniform parameter '" + p.name + "' needs lo > 0");
    if (p.scale == Scale::IntUniform && (p.lo != std::floor(p.lo) || p.hi != std::floor(p.hi)))
      fail(Errc::InvalidArgument, "integer parameter '" + p.name + "' needs integral bounds");
  }
}

bool SearchSpace::contains(const Params& values) const {
  for (const auto& p : params) {
    auto it = values.find(p.name);
    if (it == values.end()) return false;
    const double v = it->second;
    if (!(v >= p.lo && v <= p.hi)) return false;
    if (p.scale == Scale::IntUniform && v != std::round(v)) return false;
  }
  return true;
}

namespace {

double to_internal(const ParamSpec& p, double v) { return p.scale == Scale::LogUniform ? std::log(v) : v; }

double internal_lo(const ParamSpec& p) { return to_internal(p, p.lo); }
double internal_hi(const ParamSpec& p) { return to_internal(p, p.hi); }

/// Maps an internal-space draw back to a legal parameter value.
double from_internal(const ParamSpec& p, double u) {
  double v = p.scale == Scale::LogUniform ? std::exp(u) : u;
  if (p.scale == Scale::IntUniform) v = std::round(v);
  return std::clamp(v, p.lo, p.hi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

ParzenEstimator::ParzenEstimator(std::span<const double> observations, double lo, double hi,
                                 double min_bandwidth_fraction)
    : lo_(lo), hi_(hi) {
  const double width = hi - lo;
  const double n = static_cast<double>(observations.size());
  double sd = 0.0;
  if (observations.size() > 1) {
    double mean = 0.0;
    for (double x : observations) mean += x;
    mean /= n;
    for (double x : observations) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / (n - 1.0));
  }
  const double scott = observations.empty() ? 0.0 : 1.06 * sd * std::pow(n, -0.2);
  // The floor shrinks as observations accumulate and bottoms out at the
  // configured fraction; a fixed small floor lets a tight good set collapse.
  const double floor = width * std::max(min_bandwidth_fraction, 1.0 / (1.0 + n));
  bandwidth_ = std::max(scott, floor);

  auto kernel = [&](double mu, double sigma) {
    const double mass = normal_cdf((hi - mu) / sigma) - normal_cdf((lo - mu) / sigma);
    return Kernel{mu, sigma, std::log(std::max(mass, 1e-300))};
  };
  for (double x : observations) kernels_.push_back(kernel(x, bandwidth_));
  kernels_.push_back(kernel(0.5 * (lo + hi), width));
}

double ParzenEstimator::log_pdf(double x) const {
  if (x < lo_ || x > hi_) return -std::numeric_limits<double>::infinity();
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  double m = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(kernels_.size());
  for (const auto& k : kernels_) {
    const double z = (x - k.mu) / k.sigma;
    const double t = -0.5 * z * z - log_norm - std::log(k.sigma) - k.log_mass;
    terms.push_back(t);
    m = std::max(m, t);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s) - std::log(static_cast<double>(kernels_.size()));
}

double ParzenEstimator::sample(Rng& rng) const {
  const auto& k = kernels_[static_cast<std::size_t>(rng.index(kernels_.size()))];
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = k.mu + k.sigma * rng.normal();
    if (x >= lo_ && x <= hi_) return x;
  }
  return std::clamp(k.mu, lo_, hi_);
}

Params sample_prior(const SearchSpace& space, Rng& rng) {
  space.validate();
  Params out;
  for (const auto& p : space.params) {
    if (p.scale == Scale::IntUniform) {
      const auto span = static_cast<std::uint64_t>(p.hi - p.lo) + 1;
      out[p.name] = p.lo + static_cast<double>(rng.index(span));
    } else {
      out[p.name] = from_internal(p, rng.uniform(internal_lo(p), internal_hi(p)));
    }
  }
  return out;
}

Params suggest(const SearchSpace& space, std::span<const TrialRecord> history, std::uint64_t seed,
               const TpeOptions& options) {
  space.validate();
  Rng rng(seed);
  std::vector<const TrialRecord*> done;
  for (const auto& t : history)
    if (t.status == TrialStatus::Completed) done.push_back(&t);
  if (static_cast<int>(done.size()) < options.n_startup) return sample_prior(space, rng);

  std::stable_sort(done.begin(), done.end(), [](const TrialRecord* a, const TrialRecord* b) {
    return a->objective != b->objective ? a->objective > b->objective : a->index < b->index;
  });
  const auto n_good = static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(done.size())));

  struct Densities {
    ParzenEstimator good, bad;
  };
  std::vector<Densities> dens;
  for (const auto& p : space.params) {
    std::vector<double> good, bad;
    for (std::size_t i = 0; i < done.size(); ++i) {
      auto it = done[i]->params.find(p.name);
      if (it == done[i]->params.end()) fail(Errc::InvalidArgument, "trial lacks parameter '" + p.name + "'");
      (i < n_good ? good : bad).push_back(to_internal(p, it->second));
    }
    const double lo = internal_lo(p), hi = internal_hi(p);
    dens.push_back({ParzenEstimator(good, lo, hi, options.min_bandwidth_fraction),
                    ParzenEstimator(bad, lo, hi, options.min_bandwidth_fraction)});
  }

  Params best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < options.n_candidates; ++c) {
    Params cand;
    double score = 0.0;
    for (std::size_t j = 0; j < space.params.size(); ++j) {
      const auto& p = space.params[j];
      const double v = from_internal(p, dens[j].good.sample(rng));
      const double u = to_internal(p, v);
      cand[p.name] = v;
      score += dens[j].good.log_pdf(u) - dens[j].bad.log_pdf(u);
    }
    if (best.empty() || score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

StudyResult run_study(const SearchSpace& space, const Objective& objective, int n_trials, std::uint64_t seed,
                      const TpeOptions& options, std::span<const TrialRecord> resume) {
  space.validate();
  if (n_trials < 1) fail(Errc::InvalidArgument, "a study needs at least one trial");
  StudyResult study;
  study.trials.assign(resume.begin(), resume.end());
  for (std::size_t i = 0; i < study.trials.size(); ++i)
    if (study.trials[i].index != static_cast<int>(i) || !space.contains(study.trials[i].params))
      fail(Errc::InvalidArgument, "resumed trial " + std::to_string(i) + " is out of order or out of bounds");

  while (static_cast<int>(study.trials.size()) < n_trials) {
    TrialRecord t;
    t.index = static_cast<int>(study.trials.size());
    t.params = suggest(space, study.trials, derive_seed(seed, static_cast<std::uint64_t>(t.index)), options);
    try {
      t.objective = objective(t.params);
      t.status = std::isfinite(t.objective) ? TrialStatus::Completed : TrialStatus::Failed;
    } catch (const std::exception&) {
      t.status = TrialStatus::Failed;
    }
    if (t.status == TrialStatus::Failed) t.objective = std::numeric_limits<double>::quiet_NaN();
    study.trials.push_back(std::move(t));
  }

  const TrialRecord* best = nullptr;
  for (const auto& t : study.trials)
    if (t.status == TrialStatus::Completed && (!best || t.objective > best->objective)) best = &t;
  if (!best) fail(Errc::AllTrialsFailed, "all " + std::to_string(study.trials.size()) + " trials failed");
  study.best = *best;
  return study;
}

std::string study_log_tsv(const SearchSpace& space, std::span<const TrialRecord> trials) {
  std::ostringstream os;
  os << "trial";
  for (const auto& p : space.params) os << '\t' << p.name;
  os << "\tobjective\tstatus\n";
  for (const auto& t : trials) {
    os << t.index;
    for (const auto& p : space.params) os << '\t' << textio::format_double(t.params.at(p.name));
    os << '\t' << (t.status == TrialStatus::Completed ? textio::format_double(t.objective) : "nan") << '\t'
       << (t.status == TrialStatus::Completed ? "completed" : "failed") << '\n';
  }
  return os.str();
}

std::vector<TrialRecord> parse_study_log(const SearchSpace& space, std::string_view text) {
  textio::LineReader in{std::string(text)};
  std::string_view line;
  if (!in.next(line)) return {};
  const auto header = textio::split(line, '\t');
  if (header.size() != space.params.size() + 3 || header.front() != "trial")
    fail(Errc::HeaderMismatch, "study log columns do not match the search space");
  for (std::size_t j = 0; j < space.params.size(); ++j)
    if (header[j + 1] != space.params[j].name)
      fail(Errc::HeaderMismatch, "study log column '" + std::string(header[j + 1]) + "' vs '" + space.params[j].name + "'");

  std::vector<TrialRecord> out;
  while (in.next(line)) {
    if (textio::trim(line).empty()) continue;
    const auto cells = textio::split(line, '\t');
    if (cells.size() != header.size()) fail(Errc::MalformedRow, "study log row has wrong field count");
    TrialRecord t;
    t.index = static_cast<int>(textio::parse_int(cells[0]));
    for (std::size_t j = 0; j < space.params.size(); ++j)
      t.params[space.params[j].name] = textio::parse_double(cells[j + 1]);
    const auto status = cells.back();
    if (status == "completed") {
      t.status = TrialStatus::Completed;
      t.objective = textio::parse_double(cells[cells.size() - 2]);
    } else if (status == "failed") {
      t.status = TrialStatus::Failed;
      t.objective = std::numeric_limits<double>::quiet_NaN();
    } else {
      fail(Errc::MalformedRow, "unknown trial status '" + std::string(status) + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace asas::hyperopt
