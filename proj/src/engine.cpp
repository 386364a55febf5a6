#include "incapprox/engine.hpp"

#include <algorithm>
#include <cmath>

#include "incapprox/random.hpp"

namespace incapprox {

using Clock = std::chrono::steady_clock;

void QueryBudget::validate() const {
  switch (mode) {
    case BudgetMode::SampleFraction:
      if (!(amount > 0.0 && amount <= 1.0)) throw ConfigError("sample fraction must lie in (0, 1]");
      break;
    case BudgetMode::MaxItems:
      if (!(amount >= 1.0)) throw ConfigError("item budget must be at least 1");
      break;
    case BudgetMode::MaxLatencyMs:
      if (!(amount > 0.0)) throw ConfigError("latency budget must be positive");
      break;
  }
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
}

QueryBudget QueryBudget::parse(const std::string& text, double confidence) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("budget must look like mode:amount, got '" + text + "'");
  const std::string mode = text.substr(0, colon);
  const std::string amount = text.substr(colon + 1);

  QueryBudget budget;
  budget.confidence = confidence;
  if (mode == "fraction") {
    budget.mode = BudgetMode::SampleFraction;
  } else if (mode == "items") {
    budget.mode = BudgetMode::MaxItems;
  } else if (mode == "latency") {
    budget.mode = BudgetMode::MaxLatencyMs;
  } else {
    throw ConfigError("unknown budget mode '" + mode + "' (expected fraction, items or latency)");
  }
  try {
    std::size_t used = 0;
    budget.amount = std::stod(amount, &used);
    if (used != amount.size()) throw std::invalid_argument(amount);
  } catch (const std::logic_error&) {
    throw ConfigError("invalid budget amount '" + amount + "'");
  }
  budget.validate();
  return budget;
}

LatencyCalibrator::LatencyCalibrator(std::uint64_t every, double alpha)
    : every_(every == 0 ? 1 : every), alpha_(alpha), cost_ms_(0.0) {}

void LatencyCalibrator::tick() {
  if (windows_++ % every_ != 0) return;
  const double measured = measure();
  cost_ms_ = cost_ms_ == 0.0 ? measured : alpha_ * measured + (1.0 - alpha_) * cost_ms_;
}

double LatencyCalibrator::measure() {
  constexpr std::size_t kItems = 4096;
  std::vector<StreamItem> items(kItems);
  for (std::size_t i = 0; i < kItems; ++i) {
    items[i].id = i;
    items[i].timestamp = static_cast<Timestamp>(i);
    items[i].stratum = i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c");
    items[i].value = static_cast<double>(i % 17);
  }
  const auto begin = Clock::now();
  StratifiedReservoir reservoir(kItems, 0, 1);
  for (const auto& item : items) reservoir.offer(item);
  reservoir.finish();
  BiasedSample biased;
  biased.sub = reservoir.sample();
  MemoStore memo;
  run_incremental(QueryDef{}, biased, memo);
  const auto elapsed = std::chrono::duration<double, std::milli>(Clock::now() - begin).count();
  return std::max(elapsed / static_cast<double>(kItems), 1e-9);
}

std::size_t cost_function(const QueryBudget& budget, std::uint64_t k, double cost_per_item_ms) {
  double items = 0.0;
  switch (budget.mode) {
    case BudgetMode::SampleFraction:
      // Guard against fractions like 0.1 * 10000 landing a hair above the integer.
      items = std::ceil(budget.amount * static_cast<double>(k) - 1e-9);
      break;
    case BudgetMode::MaxItems:
      items = std::floor(budget.amount);
      break;
    case BudgetMode::MaxLatencyMs:
      items = cost_per_item_ms > 0.0 ? std::floor(budget.amount / cost_per_item_ms) : static_cast<double>(k);
      break;
  }
  if (!(items > 0.0)) return 0;
  return static_cast<std::size_t>(std::min(items, static_cast<double>(k)));
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  WindowSpec{config_.start.value_or(0), config_.length, config_.slide}.validate();
  config_.budget.validate();
  if (config_.start) {
    state_ = WindowState(*config_.start, config_.length);
    started_ = true;
  }
}

void Engine::ingest(std::span<const StreamItem> batch) {
  if (batch.empty()) return;
  if (!started_) {
    Timestamp first = batch.front().timestamp;
    for (const auto& item : batch) first = std::min(first, item.timestamp);
    state_ = WindowState(std::max<Timestamp>(first, 0), config_.length);
    started_ = true;
  }
  state_.ingest(batch);
}

void Engine::set_budget(const QueryBudget& budget) {
  budget.validate();
  config_.budget = budget;
}

void Engine::resize_window(Timestamp length) {
  state_.resize(length);
  config_.length = length;
  memo_.evict_from(state_.end());
}

WindowResult Engine::close_window() {
  WindowResult result;
  try {
    result = process();
  } catch (const WindowError&) {
    throw;
  } catch (const std::exception& e) {
    throw WindowError(window_index_, e.what());
  }
  if (memo_observer_) memo_observer_(memo_);
  advance();
  return result;
}

namespace {

WindowEstimate estimate_for(Aggregate aggregate, std::span<const StratumStats> stats, double confidence) {
  switch (aggregate) {
    case Aggregate::Sum: return estimate_sum(stats, confidence);
    case Aggregate::Count: return estimate_count(stats, confidence);
    case Aggregate::Mean: return estimate_mean(stats, confidence);
  }
  throw ConfigError("unknown aggregate");
}

// Mean of a keyed subpopulation: estimated sum over estimated count.
WindowEstimate keyed_mean(std::span<const StratumStats> stats, const std::vector<std::uint64_t>& key_counts,
                          double confidence) {
  WindowEstimate est = estimate_sum(stats, confidence);
  double count = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    count += static_cast<double>(stats[i].population) * static_cast<double>(key_counts[i]) /
             static_cast<double>(stats[i].sampled);
  }
  if (count > 0.0) {
    est.value /= count;
    if (est.error_bound) *est.error_bound /= count;
  }
  return est;
}

}  // namespace

WindowResult Engine::process() {
  WindowResult result;
  result.window_index = window_index_;
  result.start = state_.start();
  result.end = state_.end();
  result.window_items = state_.total();
  result.late_items = state_.late_items();
  result.estimate.confidence = config_.budget.confidence;
  result.estimate.error_bound = 0.0;

  if (config_.budget.mode == BudgetMode::MaxLatencyMs) calibrator_.tick();
  result.target_sample = cost_function(config_.budget, result.window_items, calibrator_.cost_per_item_ms());

  // Memo entries that survived the previous eviction.
  const StratifiedSample memo_items = memo_.items_by_stratum();
  for (const auto& [_, n] : carried_) result.memo_carried += n;
  result.memo_available = memo_.size();

  auto t0 = Clock::now();
  StratifiedReservoir reservoir(result.target_sample, config_.realloc_every,
                                derive_seed(config_.seed, window_index_));
  for (const auto& item : state_.items()) reservoir.offer(item);
  reservoir.finish();
  const StratifiedSample sample = reservoir.sample();
  auto t1 = Clock::now();
  const BiasedSample biased = bias(sample, memo_items);
  auto t2 = Clock::now();
  IncrementalResult run = run_incremental(config_.query, biased, memo_);
  auto t3 = Clock::now();

  std::map<std::string, std::uint64_t> underfill;
  for (const auto& m : reservoir.metrics()) underfill[m.stratum] = m.underfill;

  // Strata with b_i = 0 cannot be weighted and are left out of the estimate.
  for (const auto& stratum : state_.strata_order()) {
    StratumReport report;
    report.stratum = stratum;
    report.population = state_.stratum_counts().at(stratum);
    if (auto it = biased.sub.find(stratum); it != biased.sub.end()) report.sampled = it->second.size();
    if (auto it = carried_.find(stratum); it != carried_.end()) report.memo_carried = it->second;
    if (auto it = memo_items.find(stratum); it != memo_items.end()) report.memo_available = it->second.size();
    if (auto it = biased.reused.find(stratum); it != biased.reused.end()) report.reused = it->second;
    report.underfill = underfill[stratum];
    if (report.sampled == 0) ++result.unsampled_strata;
    result.strata.push_back(std::move(report));
  }
  result.sample_size = biased.size();
  result.reused = biased.reused_total();
  result.reuse_fraction =
      result.sample_size == 0 ? 0.0 : static_cast<double>(result.reused) / static_cast<double>(result.sample_size);
  result.reuse_stats = std::move(run.stats);

  auto stats_for = [&](const KeyAggregate* agg, std::vector<std::uint64_t>* key_counts) {
    std::vector<StratumStats> stats;
    for (const auto& report : result.strata) {
      if (report.sampled == 0) continue;
      Moments m;
      if (agg != nullptr) {
        if (auto it = agg->by_stratum.find(report.stratum); it != agg->by_stratum.end()) m = it->second;
      }
      if (key_counts != nullptr) key_counts->push_back(m.count);
      stats.push_back(StratumStats::from_moments(report.stratum, report.population, report.sampled, m));
    }
    return stats;
  };

  const double confidence = config_.budget.confidence;
  if (result.sample_size > 0) {
    if (!config_.query.group_by) {
      auto it = run.output.find(std::string());
      const auto stats = stats_for(it == run.output.end() ? nullptr : &it->second, nullptr);
      result.estimate = estimate_for(config_.query.aggregate, stats, confidence);
    } else {
      for (const auto& [key, agg] : run.output) {
        std::vector<std::uint64_t> key_counts;
        const auto stats = stats_for(&agg, &key_counts);
        result.by_key[key] = config_.query.aggregate == Aggregate::Mean
                                 ? keyed_mean(stats, key_counts, confidence)
                                 : estimate_for(config_.query.aggregate, stats, confidence);
      }
    }
  }
  auto t4 = Clock::now();
  result.timings = {t1 - t0, t2 - t1, t3 - t2, t4 - t3};

  carried_.clear();
  for (const auto& [stratum, items] : biased.sub) carried_[stratum] = items.size();
  return result;
}

void Engine::advance() {
  if (!started_) {
    ++window_index_;
    return;
  }
  const auto evicted = state_.slide(config_.slide);
  std::vector<ItemId> ids;
  ids.reserve(evicted.size());
  for (const auto& item : evicted) ids.push_back(item.id);
  memo_.evict(state_.start(), ids);
  memo_.evict_from(state_.end());
  ++window_index_;
}

std::uint64_t run_stream(StreamSource& source, Engine& engine,
                         const std::function<void(const WindowResult&)>& on_window,
                         const std::function<void(Engine&)>& before_window) {
  std::uint64_t emitted = 0;
  auto close = [&] {
    if (before_window) before_window(engine);
    on_window(engine.close_window());
    ++emitted;
  };
  for (auto batch = source.next_batch(); !batch.empty(); batch = source.next_batch()) {
    engine.ingest(batch);
    while (engine.window_complete()) close();
  }
  if (engine.has_items()) close();
  return emitted;
}

}  // namespace incapprox
