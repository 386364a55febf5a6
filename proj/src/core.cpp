#include "incapprox/core.hpp"

#include <algorithm>

namespace incapprox {

void WindowSpec::validate() const {
  if (length <= 0) throw ConfigError("window length must be positive");
  if (slide <= 0 || slide > length) throw ConfigError("slide must satisfy 0 < slide <= length");
}

WindowState::WindowState(Timestamp start, Timestamp length) : start_(start), length_(length) {
  if (start < 0) throw ConfigError("window start must be non-negative");
  if (length <= 0) throw ConfigError("window length must be positive");
}

void WindowState::ingest(std::span<const StreamItem> batch) {
  if (batch.empty()) return;

  std::vector<StreamItem> sorted(batch.begin(), batch.end());
  std::sort(sorted.begin(), sorted.end(), item_order);

  std::unordered_set<ItemId> seen;
  for (const auto& item : sorted) {
    if (item.stratum.empty()) throw std::invalid_argument("item has an empty stratum label");
    if (item.timestamp < 0) throw std::invalid_argument("item has a negative timestamp");
    if (ids_.contains(item.id) || !seen.insert(item.id).second) throw DuplicateIdError(item.id);
  }

  for (auto& item : sorted) {
    if (item.timestamp < start_) {
      ++late_;
    } else if (item.timestamp < end()) {
      insert_in_window(std::move(item));
    } else {
      insert_carry(std::move(item));
    }
  }
}

std::vector<StreamItem> WindowState::slide(Timestamp slide) { return advance_to(start_ + slide); }

std::vector<StreamItem> WindowState::advance_to(Timestamp new_start) {
  std::vector<StreamItem> evicted;
  if (new_start <= start_) return evicted;
  start_ = new_start;
  while (!items_.empty() && items_.front().timestamp < start_) {
    ids_.erase(items_.front().id);
    remove_count(items_.front().stratum);
    evicted.push_back(std::move(items_.front()));
    items_.pop_front();
  }
  // Carryover can also fall behind when the slide jumps past a gap.
  while (!carry_.empty() && carry_.front().timestamp < start_) {
    ids_.erase(carry_.front().id);
    carry_.pop_front();
    ++late_;
  }
  pull_carryover();
  return evicted;
}

void WindowState::resize(Timestamp new_length) {
  if (new_length <= 0) throw ConfigError("window length must be positive");
  length_ = new_length;
  while (!items_.empty() && items_.back().timestamp >= end()) {
    remove_count(items_.back().stratum);
    carry_.push_front(std::move(items_.back()));
    items_.pop_back();
  }
  pull_carryover();
}

void WindowState::insert_in_window(StreamItem item) {
  ids_.insert(item.id);
  auto [it, inserted] = counts_.try_emplace(item.stratum, 0);
  if (inserted || it->second == 0) {
    if (std::find(strata_order_.begin(), strata_order_.end(), item.stratum) == strata_order_.end())
      strata_order_.push_back(item.stratum);
  }
  ++it->second;
  if (items_.empty() || item_order(items_.back(), item)) {
    items_.push_back(std::move(item));
  } else {
    auto pos = std::upper_bound(items_.begin(), items_.end(), item, item_order);
    items_.insert(pos, std::move(item));
  }
}

void WindowState::insert_carry(StreamItem item) {
  ids_.insert(item.id);
  if (carry_.empty() || item_order(carry_.back(), item)) {
    carry_.push_back(std::move(item));
  } else {
    auto pos = std::upper_bound(carry_.begin(), carry_.end(), item, item_order);
    carry_.insert(pos, std::move(item));
  }
}

void WindowState::pull_carryover() {
  while (!carry_.empty() && carry_.front().timestamp < end()) {
    StreamItem item = std::move(carry_.front());
    carry_.pop_front();
    ids_.erase(item.id);
    insert_in_window(std::move(item));
  }
}

void WindowState::remove_count(const std::string& stratum) {
  auto it = counts_.find(stratum);
  if (--it->second == 0) {
    counts_.erase(it);
    std::erase(strata_order_, stratum);
  }
}

}  // namespace incapprox
