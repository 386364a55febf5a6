#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "incapprox/biasing.hpp"
#include "incapprox/core.hpp"

namespace incapprox {

enum class Aggregate { Sum, Count, Mean };

class UnsupportedQuery : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "sum", "count" or "mean". "min"/"max" throw UnsupportedQuery, anything else ConfigError.
Aggregate parse_aggregate(const std::string& name);
std::string to_string(Aggregate aggregate);

struct QueryDef {
  Aggregate aggregate = Aggregate::Sum;
  bool group_by = false;
};

/// Count, sum and centered second moment of a set of values.
/// combine() is Chan's pairwise update; sum is carried exactly as a running sum.
struct Moments {
  std::uint64_t count = 0;
  double sum = 0.0;
  double m2 = 0.0;

  static Moments of(double value) { return {1, value, 0.0}; }
  static Moments combine(const Moments& a, const Moments& b);
  double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }
  double sum_sq() const;
  bool operator==(const Moments&) const = default;
};

/// Output of one map task: a single item's contribution to its group.
struct MapResult {
  StreamItem item;
  std::string key;
  Moments contrib;
};

/// The map function: the item's group key and its contribution (value, or 1 for COUNT).
MapResult map_item(const QueryDef& query, const StreamItem& item);

/// Reduce partials for one (key, stratum) group.
///
/// A treap over map results ordered by (timestamp, id) with priorities hashed
/// from the item id, so the tree shape depends only on the set of items. Each
/// node memoizes the aggregate of its subtree. Inserting or erasing an item
/// dirties the nodes whose subtree changed; recompute() re-aggregates exactly
/// those and leaves every other node's memoized value in place.
class AggregationTree {
 public:
  void insert(const MapResult& result);
  /// Returns false if the item is not present.
  bool erase(ItemId id, Timestamp ts);

  /// Re-aggregates dirty nodes bottom-up. Returns how many were recomputed.
  std::size_t recompute();

  Moments root() const;
  std::size_t size() const { return live_; }
  bool empty() const { return live_ == 0; }
  bool any_dirty() const;

  /// Node-level view for inspection. Each node is identified by the item it holds.
  struct NodeView {
    ItemId id;
    bool dirty;
    std::vector<ItemId> subtree;  // ids under this node, in (timestamp, id) order
  };
  std::vector<NodeView> nodes() const;

 private:
  struct Node {
    ItemId id = 0;
    Timestamp ts = 0;
    std::uint64_t priority = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    Moments leaf;
    Moments agg;
    bool dirty = true;
  };

  bool less(Timestamp ts_a, ItemId id_a, const Node& b) const {
    return ts_a != b.ts ? ts_a < b.ts : id_a < b.id;
  }
  std::int32_t insert_at(std::int32_t at, std::int32_t fresh);
  std::int32_t erase_at(std::int32_t at, ItemId id, Timestamp ts, bool& found);
  std::int32_t rotate_right(std::int32_t at);
  std::int32_t rotate_left(std::int32_t at);
  std::size_t recompute_at(std::int32_t at);
  void collect(std::int32_t at, std::vector<NodeView>& out, std::vector<ItemId>& ids) const;

  std::vector<Node> pool_;
  std::vector<std::int32_t> free_;
  std::int32_t root_ = -1;
  std::size_t live_ = 0;
};

struct GroupKey {
  std::string key;
  std::string stratum;
  auto operator<=>(const GroupKey&) const = default;
};

/// Per-key query output: moments per stratum and over all strata.
struct KeyAggregate {
  std::map<std::string, Moments> by_stratum;
  Moments total;
};
using QueryOutput = std::map<std::string, KeyAggregate>;

struct ReuseStats {
  std::size_t map_reused = 0;
  std::size_t map_computed = 0;
  std::size_t map_dropped = 0;  // memoized results not in this sample
  std::size_t reduce_reused = 0;
  std::size_t reduce_recomputed = 0;
  std::set<std::string> keys_recomputed;
  std::set<std::string> keys_reused;
};

struct IncrementalResult;
class MemoStore;
IncrementalResult run_incremental(const QueryDef& query, const BiasedSample& biased, MemoStore& memo);

/// Memoized map results and reduce partials from the previous run.
class MemoStore {
 public:
  const std::unordered_map<ItemId, MapResult>& by_item() const { return by_item_; }
  const std::map<GroupKey, AggregationTree>& trees() const { return trees_; }
  std::size_t size() const { return by_item_.size(); }
  bool contains(ItemId id) const { return by_item_.contains(id); }

  /// Memoized items grouped by stratum, each sorted by (timestamp, id).
  StratifiedSample items_by_stratum() const;

  /// Ids memoized by the last run.
  std::unordered_set<ItemId> last_window_ids() const;

  /// Drops entries for the given ids and for any item older than window_start,
  /// dirtying the dependent reduce partials. Returns the number of entries dropped.
  std::size_t evict(Timestamp window_start, std::span<const ItemId> evicted_ids);

  /// Drops entries at or beyond window_end (used when a window shrinks).
  std::size_t evict_from(Timestamp window_end);

  void clear();

  /// Writes one JSON object per memoized map result.
  void write_snapshot(std::ostream& out) const;

 private:
  friend IncrementalResult run_incremental(const QueryDef&, const BiasedSample&, MemoStore&);
  void drop(std::unordered_map<ItemId, MapResult>::iterator it);

  std::unordered_map<ItemId, MapResult> by_item_;
  std::map<GroupKey, AggregationTree> trees_;
  std::set<std::string> touched_keys_;  // keys whose partials changed since the last run
  bool has_query_ = false;
  QueryDef query_;
};

struct IncrementalResult {
  QueryOutput output;
  ReuseStats stats;
};

/// Evaluates `query` over the biased sample, reusing memoized map results and
/// reduce partials. Afterwards `memo` holds map results for exactly the
/// sample's items. A memo built for a different query is discarded first.
IncrementalResult run_incremental(const QueryDef& query, const BiasedSample& biased, MemoStore& memo);

}  // namespace incapprox
