#pragma once

#include <cstddef>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "incapprox/core.hpp"

namespace incapprox {

class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pull interface over a timestamp-ordered stream. next_batch returns an empty
/// vector once the stream is exhausted.
class StreamSource {
 public:
  virtual ~StreamSource() = default;
  virtual std::vector<StreamItem> next_batch() = 0;
};

/// Parses one JSON Lines record: {"ts": int, "stratum": str, "key": str|null, "value": num}.
/// Throws SourceError on malformed input.
StreamItem parse_record(const std::string& line, ItemId id);

/// Serializes an item back into the input record format (the id is not written).
std::string format_record(const StreamItem& item);

/// Reads JSONL records from any line-oriented stream. Ids are assigned as a
/// monotonically increasing counter starting at 0. Blank lines are skipped.
class LineSource : public StreamSource {
 public:
  LineSource(std::istream& in, std::size_t batch_size = 1024);
  std::vector<StreamItem> next_batch() override;

 private:
  std::istream& in_;
  std::size_t batch_size_;
  ItemId next_id_ = 0;
  std::size_t line_no_ = 0;
};

/// Owns an input file and reads it as a LineSource.
class FileSource : public StreamSource {
 public:
  explicit FileSource(const std::string& path, std::size_t batch_size = 1024);
  ~FileSource() override;
  std::vector<StreamItem> next_batch() override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Connects to host:port and reads newline-delimited records until the peer closes.
class TcpSource : public StreamSource {
 public:
  TcpSource(const std::string& host, std::uint16_t port, std::size_t batch_size = 1024);
  ~TcpSource() override;
  TcpSource(const TcpSource&) = delete;
  TcpSource& operator=(const TcpSource&) = delete;
  std::vector<StreamItem> next_batch() override;

 private:
  std::optional<std::string> read_line();

  int fd_ = -1;
  std::size_t batch_size_;
  std::string buffer_;
  bool eof_ = false;
  ItemId next_id_ = 0;
  std::size_t line_no_ = 0;
};

/// Opens a source from a specifier: "-" for stdin, "host:port" for TCP, anything else is a path.
/// A specifier is treated as TCP only if it has no '/' and ends in ":<digits>" and no such file exists.
std::unique_ptr<StreamSource> open_source(const std::string& spec, std::size_t batch_size = 1024);

}  // namespace incapprox
