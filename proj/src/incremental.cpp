#include "incapprox/incremental.hpp"

#include <algorithm>
#include <json.hpp>
#include <ostream>

#include "incapprox/random.hpp"

namespace incapprox {

Aggregate parse_aggregate(const std::string& name) {
  if (name == "sum") return Aggregate::Sum;
  if (name == "count") return Aggregate::Count;
  if (name == "mean") return Aggregate::Mean;
  if (name == "min" || name == "max") throw UnsupportedQuery("unsupported: requires extreme value theory");
  throw ConfigError("unknown aggregate '" + name + "' (expected sum, count or mean)");
}

std::string to_string(Aggregate aggregate) {
  switch (aggregate) {
    case Aggregate::Sum: return "sum";
    case Aggregate::Count: return "count";
    case Aggregate::Mean: return "mean";
  }
  return "?";
}

Moments Moments::combine(const Moments& a, const Moments& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double cross = a.sum * nb - b.sum * na;
  return {a.count + b.count, a.sum + b.sum, a.m2 + b.m2 + cross * cross / (na * nb * (na + nb))};
}

double Moments::sum_sq() const {
  return count == 0 ? 0.0 : m2 + sum * sum / static_cast<double>(count);
}

MapResult map_item(const QueryDef& query, const StreamItem& item) {
  MapResult result;
  result.item = item;
  result.key = query.group_by ? item.key : std::string();
  result.contrib = Moments::of(query.aggregate == Aggregate::Count ? 1.0 : item.value);
  return result;
}

// ---- AggregationTree ----

void AggregationTree::insert(const MapResult& result) {
  std::int32_t fresh;
  if (!free_.empty()) {
    fresh = free_.back();
    free_.pop_back();
  } else {
    fresh = static_cast<std::int32_t>(pool_.size());
    pool_.emplace_back();
  }
  Node& node = pool_[fresh];
  node = Node{};
  node.id = result.item.id;
  node.ts = result.item.timestamp;
  node.priority = mix64(result.item.id);
  node.leaf = result.contrib;
  root_ = insert_at(root_, fresh);
  ++live_;
}

std::int32_t AggregationTree::insert_at(std::int32_t at, std::int32_t fresh) {
  if (at < 0) return fresh;
  const Node& item = pool_[fresh];
  pool_[at].dirty = true;
  if (less(item.ts, item.id, pool_[at])) {
    pool_[at].left = insert_at(pool_[at].left, fresh);
    if (pool_[pool_[at].left].priority > pool_[at].priority) at = rotate_right(at);
  } else {
    pool_[at].right = insert_at(pool_[at].right, fresh);
    if (pool_[pool_[at].right].priority > pool_[at].priority) at = rotate_left(at);
  }
  return at;
}

bool AggregationTree::erase(ItemId id, Timestamp ts) {
  // Locate first so a miss leaves no dirty marks behind.
  std::int32_t at = root_;
  while (at >= 0 && pool_[at].id != id) at = less(ts, id, pool_[at]) ? pool_[at].left : pool_[at].right;
  if (at < 0) return false;
  bool found = false;
  root_ = erase_at(root_, id, ts, found);
  --live_;
  return true;
}

std::int32_t AggregationTree::erase_at(std::int32_t at, ItemId id, Timestamp ts, bool& found) {
  if (at < 0) return at;
  Node& node = pool_[at];
  if (node.id == id) {
    found = true;
    if (node.left < 0 || node.right < 0) {
      // The surviving child keeps its subtree, so it stays clean.
      const std::int32_t child = node.left < 0 ? node.right : node.left;
      free_.push_back(at);
      return child;
    }
    if (pool_[node.left].priority > pool_[node.right].priority) {
      at = rotate_right(at);
      pool_[at].right = erase_at(pool_[at].right, id, ts, found);
    } else {
      at = rotate_left(at);
      pool_[at].left = erase_at(pool_[at].left, id, ts, found);
    }
    return at;
  }
  node.dirty = true;
  if (less(ts, id, node)) {
    node.left = erase_at(node.left, id, ts, found);
  } else {
    node.right = erase_at(node.right, id, ts, found);
  }
  return at;
}

std::int32_t AggregationTree::rotate_right(std::int32_t at) {
  const std::int32_t up = pool_[at].left;
  pool_[at].left = pool_[up].right;
  pool_[up].right = at;
  pool_[at].dirty = true;
  pool_[up].dirty = true;
  return up;
}

std::int32_t AggregationTree::rotate_left(std::int32_t at) {
  const std::int32_t up = pool_[at].right;
  pool_[at].right = pool_[up].left;
  pool_[up].left = at;
  pool_[at].dirty = true;
  pool_[up].dirty = true;
  return up;
}

std::size_t AggregationTree::recompute() { return recompute_at(root_); }

std::size_t AggregationTree::recompute_at(std::int32_t at) {
  // Ancestors of a dirty node are dirty, so a clean node ends the descent.
  if (at < 0 || !pool_[at].dirty) return 0;
  const std::size_t below = recompute_at(pool_[at].left) + recompute_at(pool_[at].right);
  Node& node = pool_[at];
  Moments agg = node.left >= 0 ? pool_[node.left].agg : Moments{};
  agg = Moments::combine(agg, node.leaf);
  if (node.right >= 0) agg = Moments::combine(agg, pool_[node.right].agg);
  node.agg = agg;
  node.dirty = false;
  return below + 1;
}

Moments AggregationTree::root() const { return root_ < 0 ? Moments{} : pool_[root_].agg; }

bool AggregationTree::any_dirty() const { return root_ >= 0 && pool_[root_].dirty; }

std::vector<AggregationTree::NodeView> AggregationTree::nodes() const {
  std::vector<NodeView> out;
  std::vector<ItemId> ids;
  collect(root_, out, ids);
  return out;
}

void AggregationTree::collect(std::int32_t at, std::vector<NodeView>& out, std::vector<ItemId>& ids) const {
  if (at < 0) return;
  const std::size_t begin = ids.size();
  collect(pool_[at].left, out, ids);
  ids.push_back(pool_[at].id);
  collect(pool_[at].right, out, ids);
  out.push_back({pool_[at].id, pool_[at].dirty, std::vector<ItemId>(ids.begin() + begin, ids.end())});
}

// ---- MemoStore ----

StratifiedSample MemoStore::items_by_stratum() const {
  StratifiedSample out;
  for (const auto& [_, result] : by_item_) out[result.item.stratum].push_back(result.item);
  for (auto& [_, items] : out) std::sort(items.begin(), items.end(), item_order);
  return out;
}

std::unordered_set<ItemId> MemoStore::last_window_ids() const {
  std::unordered_set<ItemId> ids;
  ids.reserve(by_item_.size());
  for (const auto& [id, _] : by_item_) ids.insert(id);
  return ids;
}

void MemoStore::drop(std::unordered_map<ItemId, MapResult>::iterator it) {
  const MapResult& result = it->second;
  GroupKey group{result.key, result.item.stratum};
  auto tree = trees_.find(group);
  if (tree != trees_.end()) {
    tree->second.erase(result.item.id, result.item.timestamp);
    if (tree->second.empty()) trees_.erase(tree);
  }
  touched_keys_.insert(result.key);
  by_item_.erase(it);
}

std::size_t MemoStore::evict(Timestamp window_start, std::span<const ItemId> evicted_ids) {
  std::size_t dropped = 0;
  for (ItemId id : evicted_ids) {
    auto it = by_item_.find(id);
    if (it == by_item_.end()) continue;
    drop(it);
    ++dropped;
  }
  std::vector<ItemId> stale;
  for (const auto& [id, result] : by_item_)
    if (result.item.timestamp < window_start) stale.push_back(id);
  std::sort(stale.begin(), stale.end());
  for (ItemId id : stale) {
    drop(by_item_.find(id));
    ++dropped;
  }
  return dropped;
}

std::size_t MemoStore::evict_from(Timestamp window_end) {
  std::vector<ItemId> stale;
  for (const auto& [id, result] : by_item_)
    if (result.item.timestamp >= window_end) stale.push_back(id);
  std::sort(stale.begin(), stale.end());
  for (ItemId id : stale) drop(by_item_.find(id));
  return stale.size();
}

void MemoStore::clear() {
  by_item_.clear();
  trees_.clear();
  touched_keys_.clear();
  has_query_ = false;
}

void MemoStore::write_snapshot(std::ostream& out) const {
  std::vector<const MapResult*> ordered;
  ordered.reserve(by_item_.size());
  for (const auto& [_, result] : by_item_) ordered.push_back(&result);
  std::sort(ordered.begin(), ordered.end(),
            [](const MapResult* a, const MapResult* b) { return item_order(a->item, b->item); });
  for (const MapResult* result : ordered) {
    nlohmann::json j;
    j["id"] = result->item.id;
    j["ts"] = result->item.timestamp;
    j["stratum"] = result->item.stratum;
    j["key"] = result->key;
    j["count"] = result->contrib.count;
    j["sum"] = result->contrib.sum;
    out << j.dump() << '\n';
  }
}

// ---- change propagation ----

IncrementalResult run_incremental(const QueryDef& query, const BiasedSample& biased, MemoStore& memo) {
  if (memo.has_query_ &&
      (memo.query_.aggregate != query.aggregate || memo.query_.group_by != query.group_by)) {
    memo.clear();
  }
  memo.has_query_ = true;
  memo.query_ = query;

  IncrementalResult result;
  ReuseStats& stats = result.stats;

  std::unordered_set<ItemId> wanted;
  wanted.reserve(biased.size());
  for (const auto& [_, items] : biased.sub)
    for (const auto& item : items) wanted.insert(item.id);

  std::vector<ItemId> leaving;
  for (const auto& [id, _] : memo.by_item_)
    if (!wanted.contains(id)) leaving.push_back(id);
  std::sort(leaving.begin(), leaving.end());
  for (ItemId id : leaving) memo.drop(memo.by_item_.find(id));
  stats.map_dropped = leaving.size();

  for (const auto& [_, items] : biased.sub) {
    for (const auto& item : items) {
      if (memo.by_item_.contains(item.id)) {
        ++stats.map_reused;
        continue;
      }
      MapResult mapped = map_item(query, item);
      memo.trees_[GroupKey{mapped.key, item.stratum}].insert(mapped);
      memo.touched_keys_.insert(mapped.key);
      memo.by_item_.emplace(item.id, std::move(mapped));
      ++stats.map_computed;
    }
  }

  std::size_t nodes = 0;
  for (auto& [group, tree] : memo.trees_) {
    nodes += tree.size();
    stats.reduce_recomputed += tree.recompute();
    KeyAggregate& agg = result.output[group.key];
    agg.by_stratum[group.stratum] = tree.root();
    agg.total = Moments::combine(agg.total, tree.root());
  }
  stats.reduce_reused = nodes - stats.reduce_recomputed;

  for (const auto& [key, _] : result.output) {
    if (memo.touched_keys_.contains(key)) {
      stats.keys_recomputed.insert(key);
    } else {
      stats.keys_reused.insert(key);
    }
  }
  memo.touched_keys_.clear();
  return result;
}

}  // namespace incapprox
