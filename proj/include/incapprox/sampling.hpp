#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "incapprox/core.hpp"
#include "incapprox/random.hpp"

namespace incapprox {

/// Per-stratum sample, keyed by stratum label.
using StratifiedSample = std::map<std::string, std::vector<StreamItem>>;

struct SubReservoir {
  std::vector<StreamItem> items;
  std::size_t target = 0;
};

/// Conventional reservoir step. Draws r uniformly from [0, seen_in_stratum);
/// if r < |sub.items| the item is accepted and a second draw picks the victim
/// slot. Returns true if the item replaced a resident.
/// Requires seen_in_stratum >= |sub.items| > 0.
bool crs_step(SubReservoir& sub, const StreamItem& item, std::uint64_t seen_in_stratum, Rng& rng);

struct StratumCount {
  std::string stratum;
  std::uint64_t count = 0;
};

/// Proportional allocation of `capacity` slots over strata (given in first-seen
/// order) by largest remainder. Ties in the remainder go to the earlier stratum.
/// Sizes sum to capacity; each is within 1 of capacity * count / total.
/// Returns an empty vector when total is 0.
std::vector<std::size_t> compute_allocation(std::span<const StratumCount> seen, std::uint64_t total,
                                            std::size_t capacity);

struct StratumMetrics {
  std::string stratum;
  std::uint64_t seen = 0;
  std::size_t target = 0;
  std::size_t size = 0;
  std::size_t debt = 0;       // outstanding ARS fill
  std::uint64_t underfill = 0;  // fill slots that were never repaid
};

/// Fixed-capacity sample partitioned into per-stratum sub-reservoirs.
///
/// Items fill the reservoir until it holds `capacity` items. After that the
/// reservoir is reallocated every `realloc_every` observed items: each stratum
/// receives capacity * seen_i / total slots. Strata that shrink evict random
/// residents; strata that grow take on a fill debt, repaid by appending the
/// next items of that stratum. All other items pass through crs_step.
class StratifiedReservoir {
 public:
  using ReallocationObserver =
      std::function<void(std::span<const StratumCount>, std::uint64_t total, std::span<const std::size_t>)>;

  /// realloc_every == 0 selects the default interval, equal to capacity.
  StratifiedReservoir(std::size_t capacity, std::uint64_t realloc_every, std::uint64_t seed);

  void offer(const StreamItem& item);

  /// Grows (c > 0, as fill debt) or shrinks (c < 0, random eviction) a stratum's sub-reservoir.
  void adjust(const std::string& stratum, std::int64_t c);

  /// Final reallocation over everything seen, if anything arrived since the last one.
  /// Outstanding debts at this point are recorded as underfill.
  void finish();

  std::size_t capacity() const { return capacity_; }
  std::uint64_t realloc_every() const { return realloc_every_; }
  std::uint64_t total_seen() const { return total_seen_; }
  std::size_t size() const { return size_; }
  bool filling() const { return filling_; }
  std::uint64_t reallocations() const { return reallocations_; }

  /// Strata in first-seen order.
  std::vector<StratumMetrics> metrics() const;
  const SubReservoir* sub(const std::string& stratum) const;
  std::uint64_t seen(const std::string& stratum) const;

  /// Snapshot of the sample, each stratum sorted by (timestamp, id).
  StratifiedSample sample() const;

  void set_observer(ReallocationObserver observer) { observer_ = std::move(observer); }

 private:
  struct Slot {
    std::string stratum;
    std::uint64_t seen = 0;
    SubReservoir sub;
    std::size_t debt = 0;
    std::uint64_t underfill = 0;
  };

  Slot& slot_for(const std::string& stratum);
  void reallocate();
  void evict_random(Slot& slot, std::size_t count);

  std::size_t capacity_;
  std::uint64_t realloc_every_;
  Rng rng_;
  std::vector<Slot> slots_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t total_seen_ = 0;
  std::uint64_t since_realloc_ = 0;
  std::size_t size_ = 0;
  bool filling_ = true;
  std::uint64_t reallocations_ = 0;
  ReallocationObserver observer_;
};

/// Runs one reservoir over `items` in order and returns the finished sample.
StratifiedSample stratified_sample(std::span<const StreamItem> items, std::size_t capacity,
                                   std::uint64_t realloc_every, std::uint64_t seed);

}  // namespace incapprox
