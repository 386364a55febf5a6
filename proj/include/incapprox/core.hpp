#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace incapprox {

using ItemId = std::uint64_t;
using Timestamp = std::int64_t;

/// One record from a substream. Items are immutable once read.
struct StreamItem {
  ItemId id = 0;
  Timestamp timestamp = 0;
  std::string stratum;
  std::string key;  // empty when the record carries no group key
  double value = 0.0;

  bool operator==(const StreamItem&) const = default;
};

/// Canonical in-window order: ascending (timestamp, id).
inline bool item_order(const StreamItem& a, const StreamItem& b) {
  return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
}

/// Newest-first order, the reverse of item_order.
inline bool newest_first(const StreamItem& a, const StreamItem& b) {
  return item_order(b, a);
}

class DuplicateIdError : public std::runtime_error {
 public:
  explicit DuplicateIdError(ItemId id)
      : std::runtime_error("duplicate item id " + std::to_string(id)), id_(id) {}
  ItemId id() const { return id_; }

 private:
  ItemId id_;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowSpec {
  Timestamp start = 0;
  Timestamp length = 1;
  Timestamp slide = 1;

  /// Throws ConfigError unless 0 < slide <= length.
  void validate() const;
};

/// Items of the current half-open window [start, start + length).
///
/// Items at or beyond the window end are held in a carryover queue and move
/// into the window as it slides. Items older than the window start are
/// dropped and counted as late.
class WindowState {
 public:
  WindowState() = default;
  WindowState(Timestamp start, Timestamp length);

  /// Adds a batch. The batch is sorted internally; duplicate ids (within the
  /// batch or against buffered items) reject the whole batch.
  void ingest(std::span<const StreamItem> batch);

  /// Moves the window start to start + slide and returns evicted items.
  std::vector<StreamItem> slide(Timestamp slide);

  /// Moves the window start to new_start. A no-op when new_start <= start().
  std::vector<StreamItem> advance_to(Timestamp new_start);

  /// Changes the window length. Items beyond the new end return to carryover.
  void resize(Timestamp new_length);

  Timestamp start() const { return start_; }
  Timestamp length() const { return length_; }
  Timestamp end() const { return start_ + length_; }

  const std::deque<StreamItem>& items() const { return items_; }
  const std::map<std::string, std::uint64_t>& stratum_counts() const { return counts_; }
  const std::vector<std::string>& strata_order() const { return strata_order_; }
  std::uint64_t total() const { return items_.size(); }

  const std::deque<StreamItem>& carryover() const { return carry_; }
  std::uint64_t late_items() const { return late_; }

 private:
  void insert_in_window(StreamItem item);
  void insert_carry(StreamItem item);
  void pull_carryover();
  void remove_count(const std::string& stratum);

  Timestamp start_ = 0;
  Timestamp length_ = 1;
  std::deque<StreamItem> items_;
  std::deque<StreamItem> carry_;
  std::unordered_set<ItemId> ids_;  // ids held in items_ or carry_
  std::map<std::string, std::uint64_t> counts_;
  std::vector<std::string> strata_order_;
  std::uint64_t late_ = 0;
};

}  // namespace incapprox
