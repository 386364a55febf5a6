#include "incapprox/sampling.hpp"

#include <algorithm>
#include <cassert>
#include <numeric>

namespace incapprox {

bool crs_step(SubReservoir& sub, const StreamItem& item, std::uint64_t seen_in_stratum, Rng& rng) {
  assert(!sub.items.empty());
  assert(seen_in_stratum >= sub.items.size());
  const std::uint64_t accept = uniform_below(rng, seen_in_stratum);
  if (accept >= sub.items.size()) return false;
  const std::uint64_t victim = uniform_below(rng, sub.items.size());
  sub.items[victim] = item;
  return true;
}

std::vector<std::size_t> compute_allocation(std::span<const StratumCount> seen, std::uint64_t total,
                                            std::size_t capacity) {
  if (total == 0) return {};

  std::vector<std::size_t> sizes(seen.size());
  std::vector<unsigned __int128> remainders(seen.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    const auto scaled = static_cast<unsigned __int128>(capacity) * seen[i].count;
    sizes[i] = static_cast<std::size_t>(scaled / total);
    remainders[i] = scaled % total;
    assigned += sizes[i];
  }

  std::vector<std::size_t> order(seen.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  // Shortfall is below the number of strata with a non-zero remainder.
  for (std::size_t k = 0; assigned < capacity && k < order.size(); ++k, ++assigned) ++sizes[order[k]];
  return sizes;
}

StratifiedReservoir::StratifiedReservoir(std::size_t capacity, std::uint64_t realloc_every,
                                         std::uint64_t seed)
    : capacity_(capacity),
      realloc_every_(realloc_every == 0 ? std::max<std::uint64_t>(capacity, 1) : realloc_every),
      rng_(seed),
      filling_(capacity > 0) {}

StratifiedReservoir::Slot& StratifiedReservoir::slot_for(const std::string& stratum) {
  auto [it, inserted] = index_.try_emplace(stratum, slots_.size());
  if (inserted) {
    slots_.emplace_back();
    slots_.back().stratum = stratum;
  }
  return slots_[it->second];
}

void StratifiedReservoir::offer(const StreamItem& item) {
  Slot& slot = slot_for(item.stratum);
  ++slot.seen;
  ++total_seen_;
  if (capacity_ == 0) return;

  if (filling_) {
    slot.sub.items.push_back(item);
    slot.sub.target = slot.sub.items.size();
    if (++size_ == capacity_) {
      filling_ = false;
      since_realloc_ = 0;
    }
    return;
  }

  if (++since_realloc_ >= realloc_every_) reallocate();

  // reallocate() may have moved slots_; look the stratum up again.
  Slot& current = slots_[index_.at(item.stratum)];
  if (current.debt > 0) {
    current.sub.items.push_back(item);
    --current.debt;
    ++size_;
    return;
  }
  if (current.sub.items.empty()) return;
  crs_step(current.sub, item, current.seen, rng_);
}

void StratifiedReservoir::adjust(const std::string& stratum, std::int64_t c) {
  if (c == 0) return;
  Slot& slot = slot_for(stratum);
  if (c < 0) {
    const auto drop = std::min<std::size_t>(static_cast<std::size_t>(-c), slot.sub.items.size());
    evict_random(slot, drop);
    slot.debt = 0;
    slot.sub.target = slot.sub.items.size();
  } else {
    slot.debt += static_cast<std::size_t>(c);
    slot.sub.target = slot.sub.items.size() + slot.debt;
  }
}

void StratifiedReservoir::finish() {
  if (!filling_ && since_realloc_ > 0) reallocate();
  for (auto& slot : slots_) {
    slot.underfill += slot.debt;
    slot.debt = 0;
  }
}

void StratifiedReservoir::reallocate() {
  std::vector<StratumCount> seen;
  seen.reserve(slots_.size());
  for (const auto& slot : slots_) seen.push_back({slot.stratum, slot.seen});
  const auto sizes = compute_allocation(seen, total_seen_, capacity_);

  for (std::size_t i = 0; i < slots_.size(); ++i) {
    Slot& slot = slots_[i];
    slot.underfill += slot.debt;
    slot.debt = 0;
    const auto have = static_cast<std::int64_t>(slot.sub.items.size());
    const std::int64_t c = static_cast<std::int64_t>(sizes[i]) - have;
    if (c != 0) adjust(slot.stratum, c);
    slot.sub.target = sizes[i];
  }
  since_realloc_ = 0;
  ++reallocations_;
  if (observer_) observer_(seen, total_seen_, sizes);
}

void StratifiedReservoir::evict_random(Slot& slot, std::size_t count) {
  auto& items = slot.sub.items;
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t victim = uniform_below(rng_, items.size());
    std::swap(items[victim], items.back());
    items.pop_back();
    --size_;
  }
}

std::vector<StratumMetrics> StratifiedReservoir::metrics() const {
  std::vector<StratumMetrics> out;
  out.reserve(slots_.size());
  for (const auto& slot : slots_) {
    out.push_back({slot.stratum, slot.seen, slot.sub.target, slot.sub.items.size(), slot.debt,
                   slot.underfill});
  }
  return out;
}

const SubReservoir* StratifiedReservoir::sub(const std::string& stratum) const {
  auto it = index_.find(stratum);
  return it == index_.end() ? nullptr : &slots_[it->second].sub;
}

std::uint64_t StratifiedReservoir::seen(const std::string& stratum) const {
  auto it = index_.find(stratum);
  return it == index_.end() ? 0 : slots_[it->second].seen;
}

StratifiedSample StratifiedReservoir::sample() const {
  StratifiedSample out;
  for (const auto& slot : slots_) {
    auto& items = out[slot.stratum];
    items = slot.sub.items;
    std::sort(items.begin(), items.end(), item_order);
  }
  return out;
}

StratifiedSample stratified_sample(std::span<const StreamItem> items, std::size_t capacity,
                                   std::uint64_t realloc_every, std::uint64_t seed) {
  StratifiedReservoir reservoir(capacity, realloc_every, seed);
  for (const auto& item : items) reservoir.offer(item);
  reservoir.finish();
  return reservoir.sample();
}

}  // namespace incapprox
