#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "msldp/control.hpp"
#include "msldp/functional.hpp"
#include "msldp/model.hpp"

namespace msldp {

class McError : public std::runtime_error {
 public:
  McError(const std::string& what, long sample) : std::runtime_error(what), sample_(sample) {}
  /// Trajectory index of the offending sample, -1 when not sample-specific.
  long sample() const { return sample_; }

 private:
  long sample_;
};

/// Streaming mean and sum of squared deviations (Welford), with the pairwise merge of Chan et al.
struct RunningMoments {
  long n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningMoments& other);
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
};

enum class Scheme { Standard, Importance };

std::string scheme_name(Scheme s);

struct McOptions {
  double eps = 0.25;
  double T = 1.0;
  double dt = 0.0;                 // 0: simulator default with dt_divisor
  double dt_divisor = 10.0;
  long N = 1000;
  std::uint64_t seed = 1;
  std::uint64_t first_stream = 0;  // trajectories use streams first_stream .. first_stream + N - 1
  Scheme scheme = Scheme::Standard;
  int threads = 0;                 // 0: hardware concurrency
};

struct EstimatorReport {
  Scheme scheme = Scheme::Standard;
  long N = 0;
  double eps = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double rel_err = 0.0;            // standard error / mean
  double ci_lo = 0.0, ci_hi = 0.0; // 95% normal interval
  double minus_eps_log_mean = 0.0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t first_stream = 0;
  long steps = 0;                  // Euler steps per trajectory
  double dt = 0.0;
  long underflows = 0;             // samples whose exp() rounded to zero
  long first_underflow = -1;       // their smallest trajectory index, -1 when none
  RunningMoments moments;
};

/// Fills the derived fields of a report from its moments.
void finalize_report(EstimatorReport& report);

/// Pooled report over two disjoint stream ranges of the same problem.
EstimatorReport merge_reports(const EstimatorReport& a, const EstimatorReport& b);

/// Mean of exp(-h(X)/eps) (standard) or exp(-h(Xbar)/eps + logweight) (importance sampling, needs a
/// control). Trajectories are split into fixed blocks merged in index order, so the result does not
/// depend on the thread count. NaN or infinite samples throw at once. Samples that underflow to zero
/// are counted; they throw only when their possible contribution exceeds 1e-12 of the mean.
EstimatorReport estimate(const MultiscaleModel& model, const PathFunctional& h, const McOptions& options,
                         const ControlField* control = nullptr);

struct LadderReport {
  std::vector<EstimatorReport> rows;
  std::optional<double> reference;  // inf over paths of S + h

  /// Worst step against the overall trend (fixed by the end points), net of the two rows' 95%
  /// half-widths of -eps log mean. Positive means a reversal beyond the intervals.
  double worst_reversal() const;
  /// Sign of the last minus the first -eps log mean.
  int trend_direction() const;
};

/// Half-width of the 95% interval of -eps log mean by the delta method.
double slope_half_width(const EstimatorReport& r);

LadderReport ldp_slope(const MultiscaleModel& model, const PathFunctional& h, const std::vector<double>& ladder,
                       const McOptions& options, const ControlField* control = nullptr,
                       std::optional<double> reference = std::nullopt);

}  // namespace msldp
