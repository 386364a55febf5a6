#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "incapprox/biasing.hpp"
#include "incapprox/core.hpp"
#include "incapprox/estimator.hpp"
#include "incapprox/incremental.hpp"
#include "incapprox/sampling.hpp"
#include "incapprox/source.hpp"

namespace incapprox {

enum class BudgetMode { SampleFraction, MaxItems, MaxLatencyMs };

struct QueryBudget {
  BudgetMode mode = BudgetMode::SampleFraction;
  double amount = 1.0;
  double confidence = 0.95;

  /// Throws ConfigError on a fraction outside (0, 1], fewer than 1 item, a
  /// non-positive latency or a confidence outside (0, 1).
  void validate() const;

  /// Parses "fraction:<f>", "items:<n>" or "latency:<ms>".
  static QueryBudget parse(const std::string& text, double confidence = 0.95);
};

/// Measured processing cost per sampled item, used by the latency budget.
/// Re-measured every `every` windows and blended with exponential smoothing.
class LatencyCalibrator {
 public:
  explicit LatencyCalibrator(std::uint64_t every = 100, double alpha = 0.2);

  double cost_per_item_ms() const { return cost_ms_; }
  /// Called once per window; recalibrates when due.
  void tick();
  /// Overrides the measured value (tests, replays).
  void set_cost_per_item_ms(double cost) { cost_ms_ = cost; }

  /// One micro-benchmark pass: per-item cost of sampling, mapping and tree insertion.
  static double measure();

 private:
  std::uint64_t every_;
  double alpha_;
  std::uint64_t windows_ = 0;
  double cost_ms_;
};

/// Sample size for a window of k items. Fractions round up; every mode is clamped to [0, k].
std::size_t cost_function(const QueryBudget& budget, std::uint64_t k, double cost_per_item_ms = 0.0);

struct EngineConfig {
  std::optional<Timestamp> start;  // defaults to the first item's timestamp
  Timestamp length = 1;
  Timestamp slide = 1;
  QueryDef query;
  QueryBudget budget;
  std::uint64_t seed = 0;
  std::uint64_t realloc_every = 0;  // 0: reservoir capacity
};

struct StratumReport {
  std::string stratum;
  std::uint64_t population = 0;      // B_i
  std::size_t sampled = 0;           // b_i in the biased sample
  std::size_t memo_carried = 0;      // memoized by the previous window
  std::size_t memo_available = 0;    // of those, still inside this window
  std::size_t reused = 0;            // memo items placed in the biased sample
  std::uint64_t underfill = 0;
};

struct PhaseTimings {
  std::chrono::nanoseconds sample{0};
  std::chrono::nanoseconds bias{0};
  std::chrono::nanoseconds incremental{0};
  std::chrono::nanoseconds estimate{0};
};

struct WindowResult {
  std::uint64_t window_index = 0;
  Timestamp start = 0;
  Timestamp end = 0;
  std::uint64_t window_items = 0;
  std::size_t target_sample = 0;  // cost function output
  std::size_t sample_size = 0;
  WindowEstimate estimate;                        // ungrouped query
  std::map<std::string, WindowEstimate> by_key;   // grouped query
  std::vector<StratumReport> strata;
  std::size_t unsampled_strata = 0;  // strata present in the window with b_i = 0
  std::size_t memo_carried = 0;
  std::size_t memo_available = 0;
  std::size_t reused = 0;
  double reuse_fraction = 0.0;
  ReuseStats reuse_stats;
  PhaseTimings timings;
  std::uint64_t late_items = 0;
};

class WindowError : public std::runtime_error {
 public:
  WindowError(std::uint64_t window_index, const std::string& what)
      : std::runtime_error("window " + std::to_string(window_index) + ": " + what),
        window_index_(window_index) {}
  std::uint64_t window_index() const { return window_index_; }

 private:
  std::uint64_t window_index_;
};

/// Per-window driver: sample, bias against the memo, evaluate incrementally,
/// memoize, estimate; then slide the window and evict old items and their
/// memoized results.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  void ingest(std::span<const StreamItem> batch);

  /// True once an item at or beyond the current window end has arrived.
  bool window_complete() const { return started_ && !state_.carryover().empty(); }
  bool has_items() const { return started_ && state_.total() > 0; }

  /// Processes the current window and advances to the next one.
  WindowResult close_window();

  /// Takes effect at the next close_window.
  void set_budget(const QueryBudget& budget);
  const QueryBudget& budget() const { return config_.budget; }

  /// Changes the length of the current window; memo entries outside it are evicted.
  void resize_window(Timestamp length);

  const WindowState& state() const { return state_; }
  const MemoStore& memo() const { return memo_; }
  const EngineConfig& config() const { return config_; }
  LatencyCalibrator& calibrator() { return calibrator_; }

  /// Called after each window is evaluated, before the slide evicts from the memo.
  void set_memo_observer(std::function<void(const MemoStore&)> observer) { memo_observer_ = std::move(observer); }

 private:
  WindowResult process();
  void advance();

  EngineConfig config_;
  WindowState state_;
  bool started_ = false;
  MemoStore memo_;
  std::map<std::string, std::size_t> carried_;  // per-stratum memo size after the last run
  std::uint64_t window_index_ = 0;
  LatencyCalibrator calibrator_;
  std::function<void(const MemoStore&)> memo_observer_;
};

/// Pumps a source through an engine, emitting one result per closed window.
/// `before_window` runs before each window closes (budget reloads). At end of
/// stream the partially filled final window is closed as well.
/// Returns the number of windows emitted.
std::uint64_t run_stream(StreamSource& source, Engine& engine,
                         const std::function<void(const WindowResult&)>& on_window,
                         const std::function<void(Engine&)>& before_window = {});

}  // namespace incapprox
