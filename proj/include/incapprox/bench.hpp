#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "incapprox/core.hpp"
#include "incapprox/random.hpp"
#include "incapprox/scenario.hpp"
#include "incapprox/source.hpp"

namespace incapprox {

/// Seeded synthetic stream: per tick, each substream emits Poisson(rate / ticks_per_unit)
/// items with normally distributed values. Items within a tick are shuffled, then
/// numbered, so the (timestamp, id) order interleaves strata.
class SyntheticStream {
 public:
  SyntheticStream(std::vector<SubstreamSpec> substreams, std::uint64_t ticks_per_unit, std::uint64_t seed);

  /// Generates ticks [next_tick(), until_tick).
  std::vector<StreamItem> generate_until(Timestamp until_tick);
  Timestamp next_tick() const { return tick_; }

  /// Rates apply by phase; the phase switches take effect from the next generated tick.
  void set_phase(std::size_t phase) { phase_ = phase; }

 private:
  std::vector<SubstreamSpec> substreams_;
  double ticks_per_unit_;
  Rng rng_;
  Timestamp tick_ = 0;
  ItemId next_id_ = 0;
  std::size_t phase_ = 0;
};

/// Generates a whole scenario stream over `ticks` ticks (constant rates).
std::vector<StreamItem> generate(const ScenarioSpec& spec, Timestamp ticks);

/// A SyntheticStream as a pull source, `ticks_per_batch` ticks at a time, ending at `total_ticks`.
class SyntheticSource : public StreamSource {
 public:
  SyntheticSource(const ScenarioSpec& spec, Timestamp total_ticks, Timestamp ticks_per_batch = 100);
  std::vector<StreamItem> next_batch() override;

 private:
  SyntheticStream stream_;
  Timestamp total_ticks_;
  Timestamp ticks_per_batch_;
};

/// Window length in ticks that holds `items` items on average at the given total rate.
Timestamp ticks_for_items(double items, double total_rate, std::uint64_t ticks_per_unit);

enum class Experiment { SampleSize, SlideInterval, WindowSize, ArrivalRate };

/// Parses "sample_size", "slide_interval", "window_size" or "arrival_rate".
std::optional<Experiment> parse_experiment(const std::string& name);
std::string to_string(Experiment experiment);

/// One CSV row. The substream "all" aggregates every substream.
struct BenchRow {
  std::string experiment;
  std::string grid_value;
  std::string substream;
  double avg_memoized_items = 0.0;  // reused memo items (window_size: memo carried from the previous window)
  double memo_fraction = 0.0;       // mean per-window reused / sampled
  double sample_size = 0.0;         // mean sampled items
  double window_items = 0.0;        // mean window population
};

struct BenchOptions {
  unsigned jobs = 1;  // grid points run concurrently
};

std::vector<BenchRow> run_experiment(Experiment which, const ScenarioSpec& spec, const BenchOptions& options = {});

extern const char* const kBenchCsvHeader;
void write_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace incapprox
