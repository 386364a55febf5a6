#pragma once

#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace incapprox {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SubstreamSpec {
  std::string label;
  double rate = 1.0;             // mean items per unit time
  std::vector<double> schedule;  // per-phase rates; empty means constant `rate`
  double value_mean = 0.0;
  double value_sd = 1.0;

  double rate_in_phase(std::size_t phase) const;
};

struct SampleSizeExperiment {
  double slide_percent = 4.0;
  std::vector<double> sample_percents{10, 20, 40, 60, 80};
};

struct SlideIntervalExperiment {
  double sample_percent = 10.0;
  std::vector<double> slide_percents{1, 2, 4, 8, 16};
};

struct WindowSizeExperiment {
  double slide_percent = 2.0;
  double sample_percent = 10.0;
  std::vector<std::int64_t> window_deltas{-400, -200, -100, 100, 200, 400};
  std::uint64_t windows = 30;  // measured windows per grid point
};

struct ArrivalRateExperiment {
  double slide_percent = 1.0;
  double sample_percent = 10.0;
  std::uint64_t phase_windows = 50;
  std::vector<SubstreamSpec> substreams;  // each with a schedule, one entry per phase

  std::size_t phases() const;
};

/// Benchmark configuration.
///
/// File format: `key = value` lines, `#` comments, and `[section]` headers.
/// Top level: seed, window_items, ticks_per_unit, windows, warmup.
/// [substreams]: `<label> = <rate> [<value mean> <value sd>]`.
/// [sample_size]: slide_percent, sample_percents.
/// [slide_interval]: sample_percent, slide_percents.
/// [window_size]: slide_percent, sample_percent, window_deltas, windows.
/// [arrival_rate]: slide_percent, sample_percent, phase_windows, and
///   `<label> = <rate per phase...> [| <value mean> <value sd>]`.
/// Lists are whitespace separated.
struct ScenarioSpec {
  std::uint64_t seed = 1;
  std::uint64_t window_items = 10000;  // nominal items per window
  std::uint64_t ticks_per_unit = 10;   // timestamp resolution
  std::uint64_t windows = 50;          // measured windows per grid point
  std::uint64_t warmup = 5;            // leading windows left out of averages
  std::vector<SubstreamSpec> substreams;

  SampleSizeExperiment sample_size;
  SlideIntervalExperiment slide_interval;
  WindowSizeExperiment window_size;
  ArrivalRateExperiment arrival_rate;

  /// Throws ScenarioError if rates are not positive or grids are empty.
  void validate() const;
};

ScenarioSpec parse_scenario(std::istream& in);
ScenarioSpec load_scenario(const std::string& path);

}  // namespace incapprox
