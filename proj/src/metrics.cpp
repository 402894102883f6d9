#include "asas/metrics.hpp"

#include <cmath>
#include <cstdint>

#include "asas/error.hpp"
#include <cstdio>

namespace asas::metrics {
namespace {

void check_lengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    fail(Errc::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.empty()) fail(Errc::LengthMismatch, "empty label vectors");
}

double mean(std::span<const int> v) {
  double s = 0.0;
  for (int x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_variance(std::span<const int> v, double mu) {
  double s = 0.0;
  for (int x : v) s += (x - mu) * (x - mu);
  return s / static_cast<double>(v.size());
}

}  // namespace

double qwk(std::span<const int> a, std::span<const int> b, int k) {
  check_lengths(a, b);
  if (k < 2) fail(Errc::InvalidArgument, "qwk needs k >= 2");
  const auto kk = static_cast<std::size_t>(k);
  std::vector<std::int64_t> joint(kk * kk, 0), row(kk, 0), col(kk, 0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t] < 0 || a[t] >= k || b[t] < 0 || b[t] >= k)
      fail(Errc::LabelOutOfRange, "label outside [0," + std::to_string(k) + ")");
    ++joint[static_cast<std::size_t>(a[t]) * kk + static_cast<std::size_t>(b[t])];
    ++row[static_cast<std::size_t>(a[t])];
    ++col[static_cast<std::size_t>(b[t])];
  }
  // Scaled integer sums: observed by n, expected by n^2, common 1/(k-1)^2 dropped.
  const auto n = static_cast<std::int64_t>(a.size());
  std::int64_t observed = 0, expected = 0;
  for (std::size_t i = 0; i < kk; ++i) {
    for (std::size_t j = 0; j < kk; ++j) {
      const auto d = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(j);
      observed += d * d * joint[i * kk + j];
      expected += d * d * row[i] * col[j];
    }
  }
  if (expected == 0) return observed == 0 ? 1.0 : 0.0;
  return 1.0 - static_cast<double>(observed * n) / static_cast<double>(expected);
}

double smd(std::span<const int> human, std::span<const int> machine) {
  check_lengths(human, machine);
  const double mh = mean(human), mm = mean(machine);
  const double pooled = std::sqrt((population_variance(human, mh) + population_variance(machine, mm)) / 2.0);
  if (pooled == 0.0) {
    if (mh == mm) return 0.0;
    fail(Errc::DegenerateDistribution, "pooled standard deviation is zero but means differ");
  }
  return (mm - mh) / pooled;
}

double accuracy(std::span<const int> a, std::span<const int> b) {
  check_lengths(a, b);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hits += a[i] == b[i];
  return static_cast<double>(hits) / static_cast<double>(a.size());
}

EvalReport production_check(EvalReport report, std::optional<double> human_qwk) {
  report.flags.smd_violation = std::abs(report.smd) > kSmdThreshold;
  if (human_qwk) {
    report.qwk_gap_vs_human = *human_qwk - report.qwk;
    report.flags.qwk_degradation = *report.qwk_gap_vs_human > kQwkGapThreshold;
  } else {
    report.qwk_gap_vs_human.reset();
    report.flags.qwk_degradation = false;
  }
  return report;
}

EvalReport evaluate(int prompt_id, std::span<const int> gold, std::span<const int> predicted, int k,
                    std::optional<double> human_qwk) {
  EvalReport r;
  r.prompt_id = prompt_id;
  r.qwk = qwk(gold, predicted, k);
  r.smd = smd(gold, predicted);
  r.accuracy = accuracy(gold, predicted);
  r.n = static_cast<long>(gold.size());
  return production_check(r, human_qwk);
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  if (reports.empty()) fail(Errc::EmptyInput, "no reports to average");
  EvalReport m;
  for (const auto& r : reports) {
    m.qwk += r.qwk;
    m.smd += r.smd;
    m.accuracy += r.accuracy;
    m.n += r.n;
  }
  const auto c = static_cast<double>(reports.size());
  m.qwk /= c;
  m.smd /= c;
  m.accuracy /= c;
  return m;
}

std::string flags_string(const Flags& flags) {
  if (flags.smd_violation && flags.qwk_degradation) return "SmdViolation,QwkDegradation";
  if (flags.smd_violation) return "SmdViolation";
  if (flags.qwk_degradation) return "QwkDegradation";
  return "-";
}

std::string report_tsv_header() { return "prompt\tqwk\tsmd\tacc\tn\tflags"; }

std::string report_tsv_row(const EvalReport& r, const std::string& label) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.3f\t%.3f\t%.3f\t%ld\t", r.qwk, r.smd, r.accuracy, r.n);
  return (label.empty() ? std::to_string(r.prompt_id) : label) + "\t" + buf + flags_string(r.flags);
}

}  // namespace asas::metrics
