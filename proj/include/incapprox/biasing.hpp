#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "incapprox/sampling.hpp"

namespace incapprox {

struct BiasedSample {
  StratifiedSample sub;
  std::map<std::string, std::size_t> reused;  // memo-sourced items per stratum

  std::size_t size() const;
  std::size_t reused_total() const;
  /// Per-stratum sizes, the vector that biasing must preserve.
  std::map<std::string, std::size_t> sizes() const;
};

class BiasError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Biases a stratified sample toward memoized items, stratum by stratum.
///
/// With x memoized and y sampled items in a stratum: if x >= y the result is
/// the first y memo items; otherwise it is all x memo items followed by sample
/// items, skipping ids already taken, until it holds y items. Both inputs are
/// walked newest first, i.e. descending (timestamp, id). Memo strata that have
/// no sampled items are ignored.
///
/// Throws BiasError if a stratum's sample runs out before reaching y, which
/// only happens when the sample itself holds duplicate ids.
BiasedSample bias(const StratifiedSample& sample, const StratifiedSample& memo);

}  // namespace incapprox
