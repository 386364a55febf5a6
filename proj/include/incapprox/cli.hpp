#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "incapprox/core.hpp"

namespace incapprox::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2 };

struct RunConfig {
  std::string source;  // path, "-" for stdin, or host:port
  std::string query = "sum";
  bool group_by = false;  // group by the record's "key" field
  Timestamp window = 0;
  std::optional<Timestamp> slide;  // defaults to the window length
  std::optional<Timestamp> start;
  std::string budget = "fraction:1";
  double confidence = 0.95;
  std::optional<std::uint64_t> seed;  // random (and reported) when unset
  std::uint64_t realloc_every = 0;
  std::string output;  // empty: stdout
  std::string format = "csv";
  std::string budget_file;    // re-read between windows when set
  std::string memo_snapshot;  // memo written here after the last window
  bool verbose = false;
};

struct BenchConfig {
  std::string scenario;
  std::string experiment = "all";
  std::string output_dir = ".";
  unsigned jobs = 1;
};

struct GenerateConfig {
  std::string scenario;
  Timestamp ticks = 0;
  std::optional<std::uint64_t> seed;
  std::string output;
};

int cmd_run(const RunConfig& config, std::ostream& log);
int cmd_bench(const BenchConfig& config, std::ostream& out, std::ostream& log);
int cmd_generate(const GenerateConfig& config, std::ostream& log);

/// Parses the command line (with INCAPPROX_* environment overrides) and dispatches.
int main(int argc, char** argv);

}  // namespace incapprox::cli
