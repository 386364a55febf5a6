#include "incapprox/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "incapprox/bench.hpp"
#include "incapprox/engine.hpp"
#include "incapprox/scenario.hpp"
#include "incapprox/source.hpp"

namespace incapprox::cli {

namespace {

std::string number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

std::string fixed(double v, int precision) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

// Append-only output that is flushed and synced at window boundaries.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path.empty() || path == "-") {
      file_ = stdout;
      return;
    }
    file_ = std::fopen(path.c_str(), "w");
    if (file_ == nullptr) throw std::ios_base::failure("cannot open output " + path);
    owned_ = true;
  }
  ~Sink() {
    if (owned_) std::fclose(file_);
  }
  Sink(const Sink&) = delete;
  Sink& operator=(const Sink&) = delete;

  void write(const std::string& text) {
    if (std::fwrite(text.data(), 1, text.size(), file_) != text.size()) throw std::ios_base::failure("write failed");
  }

  void sync() {
    if (std::fflush(file_) != 0) throw std::ios_base::failure("flush failed");
    if (owned_) ::fsync(::fileno(file_));
  }

 private:
  std::FILE* file_ = nullptr;
  bool owned_ = false;
};

class ResultWriter {
 public:
  ResultWriter(Sink& sink, bool jsonl, bool grouped) : sink_(sink), jsonl_(jsonl), grouped_(grouped) {
    if (!jsonl_) {
      sink_.write(grouped_ ? "window,key,estimate,error_bound,confidence,sample_size,reuse_fraction\n"
                           : "window,estimate,error_bound,confidence,sample_size,reuse_fraction\n");
    }
  }

  void write(const WindowResult& r) {
    std::string text;
    if (grouped_) {
      for (const auto& [key, est] : r.by_key) text += line(r, &key, est);
    } else {
      text = line(r, nullptr, r.estimate);
    }
    sink_.write(text);
    sink_.sync();
  }

 private:
  std::string line(const WindowResult& r, const std::string* key, const WindowEstimate& est) const {
    if (jsonl_) {
      nlohmann::ordered_json j;
      j["window"] = r.window_index;
      j["start"] = r.start;
      j["end"] = r.end;
      if (key != nullptr) j["key"] = *key;
      j["estimate"] = est.value;
      j["error_bound"] = est.error_bound ? nlohmann::ordered_json(*est.error_bound) : nlohmann::ordered_json();
      j["confidence"] = est.confidence;
      j["sample_size"] = r.sample_size;
      j["window_items"] = r.window_items;
      j["reuse_fraction"] = r.reuse_fraction;
      return j.dump() + "\n";
    }
    std::string s = std::to_string(r.window_index) + ",";
    if (key != nullptr) s += csv_field(*key) + ",";
    s += number(est.value) + ",";
    s += est.error_bound ? number(*est.error_bound) : std::string("NA");
    s += "," + number(est.confidence) + "," + std::to_string(r.sample_size) + "," + number(r.reuse_fraction) + "\n";
    return s;
  }

  static std::string csv_field(const std::string& v) {
    if (v.find_first_of(",\"\n") == std::string::npos) return v;
    std::string out = "\"";
    for (char c : v) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  Sink& sink_;
  bool jsonl_;
  bool grouped_;
};

std::optional<QueryBudget> read_budget_file(const std::string& path, double confidence, std::ostream& log) {
  std::ifstream in(path);
  std::string text;
  if (!in || !(in >> text)) {
    log << "warning: cannot read budget file " << path << ", keeping current budget\n";
    return std::nullopt;
  }
  try {
    return QueryBudget::parse(text, confidence);
  } catch (const ConfigError& e) {
    log << "warning: " << path << ": " << e.what() << ", keeping current budget\n";
    return std::nullopt;
  }
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

int cmd_run(const RunConfig& config, std::ostream& log) {
  EngineConfig engine_config;
  try {
    if (config.format != "csv" && config.format != "jsonl") throw ConfigError("unknown format '" + config.format + "'");
    engine_config.query.aggregate = parse_aggregate(config.query);
    engine_config.query.group_by = config.group_by;
    if (config.window <= 0) throw ConfigError("--window must be positive");
    engine_config.length = config.window;
    engine_config.slide = config.slide.value_or(config.window);
    engine_config.start = config.start;
    engine_config.budget = QueryBudget::parse(config.budget, config.confidence);
    engine_config.realloc_every = config.realloc_every;
    if (config.seed) {
      engine_config.seed = *config.seed;
    } else {
      engine_config.seed = random_seed();
      log << "seed: " << engine_config.seed << "\n";
    }
    if (config.start && *config.start < 0) throw ConfigError("--start must not be negative");
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    Engine engine(engine_config);
    auto source = open_source(config.source);
    Sink sink(config.output);
    ResultWriter writer(sink, config.format == "jsonl", config.group_by);

    std::function<void(Engine&)> before;
    if (!config.budget_file.empty()) {
      before = [&](Engine& e) {
        if (auto budget = read_budget_file(config.budget_file, config.confidence, log)) e.set_budget(*budget);
      };
    }
    // The slide after each window evicts from the memo, so keep the last
    // window's memo as it stood before eviction.
    std::string snapshot;
    if (!config.memo_snapshot.empty()) {
      engine.set_memo_observer([&](const MemoStore& memo) {
        std::ostringstream out;
        memo.write_snapshot(out);
        snapshot = std::move(out).str();
      });
    }
    const auto windows = run_stream(*source, engine, [&](const WindowResult& r) {
      writer.write(r);
      if (config.verbose) {
        log << "window " << r.window_index << " [" << r.start << ", " << r.end << "): items " << r.window_items
            << ", sample " << r.sample_size << ", reused " << r.reused;
        if (r.unsampled_strata > 0) log << ", unsampled strata " << r.unsampled_strata;
        if (r.late_items > 0) log << ", late " << r.late_items;
        log << "\n";
      }
    }, before);
    if (config.verbose) log << windows << " windows\n";

    if (!config.memo_snapshot.empty()) {
      std::ofstream snap(config.memo_snapshot);
      if (!snap) throw std::ios_base::failure("cannot open memo snapshot " + config.memo_snapshot);
      snap << snapshot;
      if (!snap.flush()) throw std::ios_base::failure("cannot write memo snapshot " + config.memo_snapshot);
    }
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

int cmd_bench(const BenchConfig& config, std::ostream& out, std::ostream& log) {
  std::vector<Experiment> experiments;
  if (config.experiment == "all") {
    experiments = {Experiment::SampleSize, Experiment::SlideInterval, Experiment::WindowSize,
                   Experiment::ArrivalRate};
  } else if (auto e = parse_experiment(config.experiment)) {
    experiments = {*e};
  } else {
    log << "error: unknown experiment '" << config.experiment
        << "' (expected sample_size, slide_interval, window_size, arrival_rate or all)\n";
    return kConfigError;
  }

  ScenarioSpec spec;
  try {
    spec = load_scenario(config.scenario);
  } catch (const ScenarioError& e) {
    log << "error: " << config.scenario << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kIoError;
  }
  try {
    std::filesystem::create_directories(config.output_dir);
    out << "experiment      grid                substream  memoized  fraction    sample    window\n";
    for (auto experiment : experiments) {
      const auto rows = run_experiment(experiment, spec, BenchOptions{config.jobs});
      const auto path = std::filesystem::path(config.output_dir) / (to_string(experiment) + ".csv");
      std::ofstream csv(path);
      if (!csv) throw std::ios_base::failure("cannot open " + path.string());
      write_csv(csv, rows);
      if (!csv.flush()) throw std::ios_base::failure("cannot write " + path.string());
      for (const auto& r : rows) {
        auto pad = [](std::string s, std::size_t w) {
          if (s.size() < w) s.append(w - s.size(), ' ');
          return s;
        };
        auto lpad = [](std::string s, std::size_t w) {
          if (s.size() < w) s.insert(0, w - s.size(), ' ');
          return s;
        };
        out << pad(r.experiment, 16) << pad(r.grid_value, 20) << pad(r.substream, 9)
            << lpad(fixed(r.avg_memoized_items, 1), 10) << lpad(fixed(r.memo_fraction, 4), 10)
            << lpad(fixed(r.sample_size, 1), 10) << lpad(fixed(r.window_items, 0), 10) << "\n";
      }
      log << "wrote " << path.string() << "\n";
    }
  } catch (const ScenarioError& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

int cmd_generate(const GenerateConfig& config, std::ostream& log) {
  ScenarioSpec spec;
  try {
    spec = load_scenario(config.scenario);
    if (config.ticks <= 0) throw ConfigError("--ticks must be positive");
  } catch (const ScenarioError& e) {
    log << "error: " << config.scenario << ": " << e.what() << "\n";
    return kConfigError;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kIoError;
  }
  if (config.seed) spec.seed = *config.seed;
  try {
    Sink sink(config.output);
    SyntheticSource source(spec, config.ticks);
    for (auto batch = source.next_batch(); !batch.empty(); batch = source.next_batch()) {
      std::string text;
      for (const auto& item : batch) text += format_record(item) + "\n";
      sink.write(text);
    }
    sink.sync();
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kIoError;
  }
  return kOk;
}

int main(int argc, char** argv) {
  CLI::App app{"Approximate, incremental sliding-window aggregation over data streams"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("incapprox 0.1.0"));

  RunConfig run;
  auto* run_cmd = app.add_subcommand("run", "Run a query over a stream of JSON Lines records");
  run_cmd->add_option("source", run.source, "Input: file path, '-' for stdin, or host:port")
      ->required()
      ->envname("INCAPPROX_SOURCE");
  run_cmd->add_option("-q,--query", run.query, "Aggregate: sum, count or mean")->envname("INCAPPROX_QUERY");
  run_cmd->add_flag("-g,--group-by", run.group_by, "Group results by the record key")->envname("INCAPPROX_GROUP_BY");
  run_cmd->add_option("-w,--window", run.window, "Window length in time units")
      ->required()
      ->envname("INCAPPROX_WINDOW");
  run_cmd->add_option("-s,--slide", run.slide, "Slide interval in time units (default: window length)")
      ->envname("INCAPPROX_SLIDE");
  run_cmd->add_option("--start", run.start, "Start of the first window (default: first timestamp)")
      ->envname("INCAPPROX_START");
  run_cmd->add_option("-b,--budget", run.budget, "fraction:<f>, items:<n> or latency:<ms>")
      ->envname("INCAPPROX_BUDGET");
  run_cmd->add_option("-c,--confidence", run.confidence, "Confidence level of the error bound")
      ->envname("INCAPPROX_CONFIDENCE");
  run_cmd->add_option("--seed", run.seed, "Random seed (random and reported when omitted)")
      ->envname("INCAPPROX_SEED");
  run_cmd->add_option("--realloc", run.realloc_every, "Items between reservoir reallocations (0: capacity)")
      ->envname("INCAPPROX_REALLOC");
  run_cmd->add_option("-o,--output", run.output, "Output file (default: stdout)")->envname("INCAPPROX_OUTPUT");
  run_cmd->add_option("-f,--format", run.format, "csv or jsonl")->envname("INCAPPROX_FORMAT");
  run_cmd->add_option("--budget-file", run.budget_file, "File holding a budget, re-read before each window")
      ->envname("INCAPPROX_BUDGET_FILE");
  run_cmd->add_option("--memo-snapshot", run.memo_snapshot, "Write the final memo as JSON Lines")
      ->envname("INCAPPROX_MEMO_SNAPSHOT");
  run_cmd->add_flag("-v,--verbose", run.verbose, "Log per-window statistics to stderr");

  BenchConfig bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run memoization experiments from a scenario file");
  bench_cmd->add_option("scenario", bench.scenario, "Scenario file")->required()->envname("INCAPPROX_SCENARIO");
  bench_cmd->add_option("-e,--experiment", bench.experiment,
                        "sample_size, slide_interval, window_size, arrival_rate or all")
      ->envname("INCAPPROX_EXPERIMENT");
  bench_cmd->add_option("-d,--output-dir", bench.output_dir, "Directory for the CSV files")
      ->envname("INCAPPROX_OUTPUT_DIR");
  bench_cmd->add_option("-j,--jobs", bench.jobs, "Grid points run in parallel")->envname("INCAPPROX_JOBS");

  GenerateConfig gen;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic stream from a scenario's substreams");
  gen_cmd->add_option("scenario", gen.scenario, "Scenario file")->required();
  gen_cmd->add_option("-t,--ticks", gen.ticks, "Number of ticks to generate")->required();
  gen_cmd->add_option("--seed", gen.seed, "Overrides the scenario seed");
  gen_cmd->add_option("-o,--output", gen.output, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (run_cmd->parsed()) return cmd_run(run, std::cerr);
  if (bench_cmd->parsed()) return cmd_bench(bench, std::cout, std::cerr);
  return cmd_generate(gen, std::cerr);
}

}  // namespace incapprox::cli
