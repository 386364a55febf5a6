#include "incapprox/biasing.hpp"

#include <algorithm>
#include <unordered_set>

namespace incapprox {

std::size_t BiasedSample::size() const {
  std::size_t n = 0;
  for (const auto& [_, items] : sub) n += items.size();
  return n;
}

std::size_t BiasedSample::reused_total() const {
  std::size_t n = 0;
  for (const auto& [_, count] : reused) n += count;
  return n;
}

std::map<std::string, std::size_t> BiasedSample::sizes() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [stratum, items] : sub) out[stratum] = items.size();
  return out;
}

namespace {

std::vector<const StreamItem*> newest_first_view(const std::vector<StreamItem>& items) {
  std::vector<const StreamItem*> view;
  view.reserve(items.size());
  for (const auto& item : items) view.push_back(&item);
  std::sort(view.begin(), view.end(),
            [](const StreamItem* a, const StreamItem* b) { return newest_first(*a, *b); });
  return view;
}

}  // namespace

BiasedSample bias(const StratifiedSample& sample, const StratifiedSample& memo) {
  BiasedSample out;
  static const std::vector<StreamItem> kNone;

  for (const auto& [stratum, sampled] : sample) {
    const auto memo_it = memo.find(stratum);
    const auto& memoized = memo_it == memo.end() ? kNone : memo_it->second;
    const std::size_t y = sampled.size();

    auto& result = out.sub[stratum];
    result.reserve(y);
    std::unordered_set<ItemId> taken;
    taken.reserve(y);

    for (const StreamItem* item : newest_first_view(memoized)) {
      if (result.size() == y) break;
      if (taken.insert(item->id).second) result.push_back(*item);
    }
    out.reused[stratum] = result.size();

    if (result.size() < y) {
      for (const StreamItem* item : newest_first_view(sampled)) {
        if (result.size() == y) break;
        if (taken.insert(item->id).second) result.push_back(*item);
      }
      if (result.size() < y) {
        throw BiasError("stratum '" + stratum + "' sample exhausted at " +
                        std::to_string(result.size()) + " of " + std::to_string(y) + " items");
      }
    }
    std::sort(result.begin(), result.end(), item_order);
  }
  return out;
}

}  // namespace incapprox
