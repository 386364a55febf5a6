#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "incapprox/core.hpp"
#include "incapprox/incremental.hpp"

namespace testing {

inline incapprox::StreamItem item(incapprox::ItemId id, incapprox::Timestamp ts, std::string stratum,
                                  double value = 0.0, std::string key = {}) {
  return incapprox::StreamItem{id, ts, std::move(stratum), std::move(key), value};
}

inline bool close_rel(double a, double b, double rel = 1e-9) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

// From-scratch evaluation: per key and stratum, count, plain sum, and sum of squares.
struct Fold {
  std::uint64_t count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

inline std::map<std::string, std::map<std::string, Fold>> fold(const incapprox::QueryDef& q,
                                                                const std::vector<incapprox::StreamItem>& items) {
  std::map<std::string, std::map<std::string, Fold>> out;
  for (const auto& it : items) {
    const std::string key = q.group_by ? it.key : std::string();
    const double v = q.aggregate == incapprox::Aggregate::Count ? 1.0 : it.value;
    auto& f = out[key][it.stratum];
    ++f.count;
    f.sum += v;
    f.sum_sq += v * v;
  }
  return out;
}

}  // namespace testing
