#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace asas::metrics {

/// Cohen's quadratic weighted kappa between two label vectors over classes
/// [0, k): 1 - sum(w*O) / sum(w*E) with w = (i-j)^2/(k-1)^2, O the joint
/// observed proportions and E the outer product of the marginals.
///
/// When sum(w*E) is zero (both raters constant) the result is 1.0 if the
/// raters agree everywhere and 0.0 otherwise.
double qwk(std::span<const int> a, std::span<const int> b, int k);

/// Standardized mean difference, machine minus human, in units of the
/// pooled population standard deviation sqrt((var_h + var_m) / 2).
double smd(std::span<const int> human, std::span<const int> machine);

double accuracy(std::span<const int> a, std::span<const int> b);

struct Flags {
  bool smd_violation = false;
  bool qwk_degradation = false;

  bool operator==(const Flags&) const = default;
};

inline constexpr double kSmdThreshold = 0.15;
inline constexpr double kQwkGapThreshold = 0.1;

struct EvalReport {
  int prompt_id = 0;
  double qwk = 0.0;
  double smd = 0.0;
  double accuracy = 0.0;
  long n = 0;
  std::optional<double> qwk_gap_vs_human;
  Flags flags;
};

/// Applies the production thresholds: QwkDegradation iff human_qwk - qwk > 0.1,
/// SmdViolation iff |smd| > 0.15.
EvalReport production_check(EvalReport report, std::optional<double> human_qwk);

/// Fills qwk/smd/accuracy/n for one prompt and applies `production_check`.
EvalReport evaluate(int prompt_id, std::span<const int> gold, std::span<const int> predicted, int k,
                    std::optional<double> human_qwk = std::nullopt);

/// Arithmetic mean of qwk/smd/accuracy across reports; n is summed.
/// Flags are cleared on the aggregate row.
EvalReport mean_report(std::span<const EvalReport> reports);

std::string flags_string(const Flags& flags);

/// `prompt\tqwk\tsmd\tacc\tn\tflags`
std::string report_tsv_header();
/// `label` replaces the prompt id column (used for the "mean" row).
std::string report_tsv_row(const EvalReport& report, const std::string& label = {});

}  // namespace asas::metrics
