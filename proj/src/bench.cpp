#include "incapprox/bench.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <map>
#include <ostream>
#include <utility>

#include "incapprox/engine.hpp"

namespace incapprox {

SyntheticStream::SyntheticStream(std::vector<SubstreamSpec> substreams, std::uint64_t ticks_per_unit,
                                 std::uint64_t seed)
    : substreams_(std::move(substreams)), ticks_per_unit_(static_cast<double>(ticks_per_unit)), rng_(seed) {
  if (ticks_per_unit == 0) throw ScenarioError("ticks_per_unit must be positive");
}

std::vector<StreamItem> SyntheticStream::generate_until(Timestamp until_tick) {
  std::vector<StreamItem> out;
  std::vector<StreamItem> tick_items;
  for (; tick_ < until_tick; ++tick_) {
    tick_items.clear();
    for (const auto& s : substreams_) {
      const std::uint64_t n = poisson(rng_, s.rate_in_phase(phase_) / ticks_per_unit_);
      for (std::uint64_t i = 0; i < n; ++i) {
        StreamItem item;
        item.timestamp = tick_;
        item.stratum = s.label;
        item.value = s.value_mean + s.value_sd * standard_normal(rng_);
        tick_items.push_back(std::move(item));
      }
    }
    for (std::size_t i = tick_items.size(); i > 1; --i) {
      std::swap(tick_items[i - 1], tick_items[uniform_below(rng_, i)]);
    }
    for (auto& item : tick_items) {
      item.id = next_id_++;
      out.push_back(std::move(item));
    }
  }
  return out;
}

std::vector<StreamItem> generate(const ScenarioSpec& spec, Timestamp ticks) {
  SyntheticStream stream(spec.substreams, spec.ticks_per_unit, spec.seed);
  return stream.generate_until(ticks);
}

SyntheticSource::SyntheticSource(const ScenarioSpec& spec, Timestamp total_ticks, Timestamp ticks_per_batch)
    : stream_(spec.substreams, spec.ticks_per_unit, spec.seed),
      total_ticks_(total_ticks),
      ticks_per_batch_(std::max<Timestamp>(ticks_per_batch, 1)) {}

std::vector<StreamItem> SyntheticSource::next_batch() {
  std::vector<StreamItem> batch;
  while (batch.empty() && stream_.next_tick() < total_ticks_) {
    batch = stream_.generate_until(std::min(total_ticks_, stream_.next_tick() + ticks_per_batch_));
  }
  return batch;
}

Timestamp ticks_for_items(double items, double total_rate, std::uint64_t ticks_per_unit) {
  if (!(total_rate > 0.0)) throw ScenarioError("total arrival rate must be positive");
  const double ticks = items / total_rate * static_cast<double>(ticks_per_unit);
  return std::max<Timestamp>(1, static_cast<Timestamp>(std::llround(ticks)));
}

std::optional<Experiment> parse_experiment(const std::string& name) {
  if (name == "sample_size") return Experiment::SampleSize;
  if (name == "slide_interval") return Experiment::SlideInterval;
  if (name == "window_size") return Experiment::WindowSize;
  if (name == "arrival_rate") return Experiment::ArrivalRate;
  return std::nullopt;
}

std::string to_string(Experiment experiment) {
  switch (experiment) {
    case Experiment::SampleSize: return "sample_size";
    case Experiment::SlideInterval: return "slide_interval";
    case Experiment::WindowSize: return "window_size";
    case Experiment::ArrivalRate: return "arrival_rate";
  }
  return "unknown";
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

double total_rate(const std::vector<SubstreamSpec>& streams, std::size_t phase) {
  double sum = 0.0;
  for (const auto& s : streams) sum += s.rate_in_phase(phase);
  return sum;
}

Timestamp slide_ticks(double percent, Timestamp length) {
  return std::max<Timestamp>(1, static_cast<Timestamp>(std::llround(percent / 100.0 * static_cast<double>(length))));
}

// Running per-substream means over measured windows.
class Accumulator {
 public:
  explicit Accumulator(const std::vector<SubstreamSpec>& streams) {
    for (const auto& s : streams) labels_.push_back(s.label);
    labels_.push_back("all");
  }

  // `memoized_from_carry` selects the memo carried from the previous window
  // instead of the items actually reused.
  void add(const WindowResult& r, bool memoized_from_carry) {
    ++windows_;
    for (const auto& report : r.strata) {
      auto& t = totals_[report.stratum];
      t.memoized += static_cast<double>(memoized_from_carry ? report.memo_carried : report.reused);
      t.fraction += report.sampled == 0 ? 0.0 : static_cast<double>(report.reused) / static_cast<double>(report.sampled);
      t.sampled += static_cast<double>(report.sampled);
      t.population += static_cast<double>(report.population);
    }
    auto& all = totals_["all"];
    all.memoized += static_cast<double>(memoized_from_carry ? r.memo_carried : r.reused);
    all.fraction += r.reuse_fraction;
    all.sampled += static_cast<double>(r.sample_size);
    all.population += static_cast<double>(r.window_items);
  }

  void emit(const std::string& experiment, const std::string& grid_value, std::vector<BenchRow>& rows) const {
    const double n = windows_ == 0 ? 1.0 : static_cast<double>(windows_);
    for (const auto& label : labels_) {
      Totals t;
      if (auto it = totals_.find(label); it != totals_.end()) t = it->second;
      rows.push_back({experiment, grid_value, label, t.memoized / n, t.fraction / n, t.sampled / n, t.population / n});
    }
  }

 private:
  struct Totals {
    double memoized = 0.0;
    double fraction = 0.0;
    double sampled = 0.0;
    double population = 0.0;
  };
  std::vector<std::string> labels_;
  std::map<std::string, Totals> totals_;
  std::uint64_t windows_ = 0;
};

// Drives an engine over a generated stream with time window [start, start + length).
class Driver {
 public:
  Driver(const std::vector<SubstreamSpec>& streams, const ScenarioSpec& spec, Timestamp length, Timestamp slide,
         double sample_percent)
      : stream_(streams, spec.ticks_per_unit, derive_seed(spec.seed, 0)), engine_(make_config(spec, length, slide, sample_percent)) {}

  void set_phase(std::size_t phase) { stream_.set_phase(phase); }
  void resize(Timestamp length) { engine_.resize_window(length); }

  WindowResult next() {
    engine_.ingest(stream_.generate_until(engine_.state().end()));
    return engine_.close_window();
  }

 private:
  static EngineConfig make_config(const ScenarioSpec& spec, Timestamp length, Timestamp slide, double sample_percent) {
    EngineConfig config;
    config.start = 0;
    config.length = length;
    config.slide = slide;
    config.query = QueryDef{Aggregate::Sum, false};
    config.budget.mode = BudgetMode::SampleFraction;
    config.budget.amount = sample_percent / 100.0;
    config.seed = spec.seed;
    return config;
  }

  SyntheticStream stream_;
  Engine engine_;
};

std::vector<BenchRow> steady_point(const ScenarioSpec& spec, const std::string& experiment, const std::string& grid,
                                   double slide_percent, double sample_percent) {
  const Timestamp length = ticks_for_items(static_cast<double>(spec.window_items), total_rate(spec.substreams, 0),
                                           spec.ticks_per_unit);
  Driver driver(spec.substreams, spec, length, slide_ticks(slide_percent, length), sample_percent);
  Accumulator acc(spec.substreams);
  for (std::uint64_t w = 0; w < spec.warmup + spec.windows; ++w) {
    const WindowResult r = driver.next();
    if (w >= spec.warmup) acc.add(r, false);
  }
  std::vector<BenchRow> rows;
  acc.emit(experiment, grid, rows);
  return rows;
}

// Windows alternate between the base length and base + delta; the measured
// windows are the resized ones, compared against the memo carried from the
// base-length window before them.
std::vector<BenchRow> window_size_point(const ScenarioSpec& spec, std::int64_t delta) {
  const auto& ex = spec.window_size;
  const double rate = total_rate(spec.substreams, 0);
  const Timestamp base = ticks_for_items(static_cast<double>(spec.window_items), rate, spec.ticks_per_unit);
  const Timestamp resized =
      ticks_for_items(static_cast<double>(static_cast<std::int64_t>(spec.window_items) + delta), rate, spec.ticks_per_unit);
  Driver driver(spec.substreams, spec, base, slide_ticks(ex.slide_percent, base), ex.sample_percent);
  Accumulator acc(spec.substreams);
  for (std::uint64_t w = 0; w < spec.warmup; ++w) driver.next();
  for (std::uint64_t i = 0; i < ex.windows; ++i) {
    driver.resize(base);
    driver.next();
    driver.resize(resized);
    acc.add(driver.next(), true);
  }
  std::vector<BenchRow> rows;
  acc.emit("window_size", std::to_string(delta), rows);
  return rows;
}

std::vector<BenchRow> arrival_rate_run(const ScenarioSpec& spec) {
  const auto& ex = spec.arrival_rate;
  const auto& streams = ex.substreams.empty() ? spec.substreams : ex.substreams;
  const Timestamp length =
      ticks_for_items(static_cast<double>(spec.window_items), total_rate(streams, 0), spec.ticks_per_unit);
  Driver driver(streams, spec, length, slide_ticks(ex.slide_percent, length), ex.sample_percent);
  for (std::uint64_t w = 0; w < spec.warmup; ++w) driver.next();

  std::vector<BenchRow> rows;
  const std::size_t phases = ex.phases();
  for (std::size_t phase = 0; phase < phases; ++phase) {
    driver.set_phase(phase);
    Accumulator acc(streams);
    for (std::uint64_t w = 0; w < ex.phase_windows; ++w) acc.add(driver.next(), false);
    std::string grid = "phase" + std::to_string(phase) + ":";
    for (std::size_t i = 0; i < streams.size(); ++i) {
      if (i > 0) grid += '/';
      grid += format_number(streams[i].rate_in_phase(phase));
    }
    acc.emit("arrival_rate", grid, rows);
  }
  return rows;
}

std::vector<BenchRow> run_grid(std::vector<std::function<std::vector<BenchRow>()>> points, unsigned jobs) {
  std::vector<BenchRow> rows;
  const std::size_t step = std::max(1u, jobs);
  for (std::size_t begin = 0; begin < points.size(); begin += step) {
    const std::size_t end = std::min(points.size(), begin + step);
    std::vector<std::vector<BenchRow>> results(end - begin);
    if (step == 1) {
      results[0] = points[begin]();
    } else {
      std::vector<std::future<std::vector<BenchRow>>> futures;
      for (std::size_t i = begin; i < end; ++i) futures.push_back(std::async(std::launch::async, points[i]));
      for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    }
    for (auto& part : results) rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

}  // namespace

std::vector<BenchRow> run_experiment(Experiment which, const ScenarioSpec& spec, const BenchOptions& options) {
  spec.validate();
  if (spec.substreams.empty()) throw ScenarioError("scenario declares no substreams");
  std::vector<std::function<std::vector<BenchRow>()>> points;
  switch (which) {
    case Experiment::SampleSize:
      for (double p : spec.sample_size.sample_percents) {
        points.push_back([&spec, p] {
          return steady_point(spec, "sample_size", format_number(p), spec.sample_size.slide_percent, p);
        });
      }
      break;
    case Experiment::SlideInterval:
      for (double p : spec.slide_interval.slide_percents) {
        points.push_back([&spec, p] {
          return steady_point(spec, "slide_interval", format_number(p), p, spec.slide_interval.sample_percent);
        });
      }
      break;
    case Experiment::WindowSize:
      for (auto delta : spec.window_size.window_deltas) {
        points.push_back([&spec, delta] { return window_size_point(spec, delta); });
      }
      break;
    case Experiment::ArrivalRate:
      points.push_back([&spec] { return arrival_rate_run(spec); });
      break;
  }
  return run_grid(std::move(points), options.jobs);
}

const char* const kBenchCsvHeader =
    "experiment,grid_value,substream,avg_memoized_items,memo_fraction,sample_size,window_items";

void write_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.grid_value << ',' << r.substream << ',' << format_number(r.avg_memoized_items)
        << ',' << format_number(r.memo_fraction) << ',' << format_number(r.sample_size) << ','
        << format_number(r.window_items) << '\n';
  }
}

}  // namespace incapprox
