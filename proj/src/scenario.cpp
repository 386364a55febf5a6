#include "incapprox/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace incapprox {

double SubstreamSpec::rate_in_phase(std::size_t phase) const {
  if (schedule.empty()) return rate;
  return schedule[std::min(phase, schedule.size() - 1)];
}

std::size_t ArrivalRateExperiment::phases() const {
  std::size_t n = 1;
  for (const auto& s : substreams) n = std::max(n, s.schedule.size());
  return n;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::vector<T> out;
  T v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ScenarioError("invalid number in " + what + ": '" + text + "'");
  return out;
}

template <typename T>
T parse_one(const std::string& text, const std::string& what) {
  auto values = parse_list<T>(text, what);
  if (values.size() != 1) throw ScenarioError(what + " expects a single value");
  return values.front();
}

SubstreamSpec parse_substream(const std::string& label, const std::string& text, bool scheduled) {
  SubstreamSpec spec;
  spec.label = label;
  std::string rates = text;
  std::string values;
  if (scheduled) {
    if (auto bar = text.find('|'); bar != std::string::npos) {
      rates = text.substr(0, bar);
      values = text.substr(bar + 1);
    }
    spec.schedule = parse_list<double>(rates, "schedule of " + label);
    if (spec.schedule.empty()) throw ScenarioError("substream " + label + " has no rates");
    spec.rate = spec.schedule.front();
  } else {
    auto numbers = parse_list<double>(text, "substream " + label);
    if (numbers.size() != 1 && numbers.size() != 3)
      throw ScenarioError("substream " + label + " expects <rate> [<mean> <sd>]");
    spec.rate = numbers[0];
    if (numbers.size() == 3) {
      spec.value_mean = numbers[1];
      spec.value_sd = numbers[2];
    }
    return spec;
  }
  if (!trim(values).empty()) {
    auto numbers = parse_list<double>(values, "values of " + label);
    if (numbers.size() != 2) throw ScenarioError("substream " + label + " expects | <mean> <sd>");
    spec.value_mean = numbers[0];
    spec.value_sd = numbers[1];
  }
  return spec;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (window_items == 0) throw ScenarioError("window_items must be positive");
  if (ticks_per_unit == 0) throw ScenarioError("ticks_per_unit must be positive");
  if (windows == 0) throw ScenarioError("windows must be positive");
  auto check_streams = [](const std::vector<SubstreamSpec>& streams, const std::string& where) {
    for (const auto& s : streams) {
      if (!(s.rate > 0.0)) throw ScenarioError(where + ": rate of " + s.label + " must be positive");
      for (double r : s.schedule)
        if (!(r > 0.0)) throw ScenarioError(where + ": rates of " + s.label + " must be positive");
      if (s.value_sd < 0.0) throw ScenarioError(where + ": value sd of " + s.label + " is negative");
    }
  };
  check_streams(substreams, "substreams");
  check_streams(arrival_rate.substreams, "arrival_rate");
  auto check_percent = [](double p, const std::string& what) {
    if (!(p > 0.0 && p <= 100.0)) throw ScenarioError(what + " must lie in (0, 100]");
  };
  if (sample_size.sample_percents.empty()) throw ScenarioError("sample_size grid is empty");
  if (slide_interval.slide_percents.empty()) throw ScenarioError("slide_interval grid is empty");
  if (window_size.window_deltas.empty()) throw ScenarioError("window_size grid is empty");
  for (double p : sample_size.sample_percents) check_percent(p, "sample percent");
  for (double p : slide_interval.slide_percents) check_percent(p, "slide percent");
  check_percent(sample_size.slide_percent, "slide percent");
  check_percent(slide_interval.sample_percent, "sample percent");
  check_percent(window_size.slide_percent, "slide percent");
  check_percent(window_size.sample_percent, "sample percent");
  check_percent(arrival_rate.slide_percent, "slide percent");
  check_percent(arrival_rate.sample_percent, "sample percent");
  for (auto delta : window_size.window_deltas)
    if (delta <= -static_cast<std::int64_t>(window_items)) throw ScenarioError("window delta shrinks the window to nothing");
}

ScenarioSpec parse_scenario(std::istream& in) {
  ScenarioSpec spec;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  bool saw_arrival_streams = false;

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError("line " + std::to_string(line_no) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known{"substreams", "sample_size", "slide_interval", "window_size",
                                               "arrival_rate"};
      if (!known.contains(section))
        throw ScenarioError("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ScenarioError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = "line " + std::to_string(line_no) + " (" + key + ")";

    try {
      if (section.empty()) {
        if (key == "seed") spec.seed = parse_one<std::uint64_t>(value, where);
        else if (key == "window_items") spec.window_items = parse_one<std::uint64_t>(value, where);
        else if (key == "ticks_per_unit") spec.ticks_per_unit = parse_one<std::uint64_t>(value, where);
        else if (key == "windows") spec.windows = parse_one<std::uint64_t>(value, where);
        else if (key == "warmup") spec.warmup = parse_one<std::uint64_t>(value, where);
        else throw ScenarioError("unknown key " + where);
      } else if (section == "substreams") {
        spec.substreams.push_back(parse_substream(key, value, false));
      } else if (section == "sample_size") {
        if (key == "slide_percent") spec.sample_size.slide_percent = parse_one<double>(value, where);
        else if (key == "sample_percents") spec.sample_size.sample_percents = parse_list<double>(value, where);
        else throw ScenarioError("unknown key " + where);
      } else if (section == "slide_interval") {
        if (key == "sample_percent") spec.slide_interval.sample_percent = parse_one<double>(value, where);
        else if (key == "slide_percents") spec.slide_interval.slide_percents = parse_list<double>(value, where);
        else throw ScenarioError("unknown key " + where);
      } else if (section == "window_size") {
        if (key == "slide_percent") spec.window_size.slide_percent = parse_one<double>(value, where);
        else if (key == "sample_percent") spec.window_size.sample_percent = parse_one<double>(value, where);
        else if (key == "window_deltas") spec.window_size.window_deltas = parse_list<std::int64_t>(value, where);
        else if (key == "windows") spec.window_size.windows = parse_one<std::uint64_t>(value, where);
        else throw ScenarioError("unknown key " + where);
      } else if (section == "arrival_rate") {
        if (key == "slide_percent") spec.arrival_rate.slide_percent = parse_one<double>(value, where);
        else if (key == "sample_percent") spec.arrival_rate.sample_percent = parse_one<double>(value, where);
        else if (key == "phase_windows") spec.arrival_rate.phase_windows = parse_one<std::uint64_t>(value, where);
        else {
          saw_arrival_streams = true;
          spec.arrival_rate.substreams.push_back(parse_substream(key, value, true));
        }
      } else {
        throw ScenarioError("unknown section [" + section + "]");
      }
    } catch (const ScenarioError& e) {
      const std::string msg = e.what();
      if (msg.rfind("line ", 0) == 0) throw;
      throw ScenarioError(where + ": " + msg);
    }
  }
  if (spec.substreams.empty()) throw ScenarioError("scenario declares no substreams");
  if (!saw_arrival_streams) spec.arrival_rate.substreams.clear();
  spec.validate();
  return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario " + path);
  return parse_scenario(in);
}

}  // namespace incapprox
