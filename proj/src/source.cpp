#include "incapprox/source.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

namespace incapprox {

namespace {

std::string describe(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

StreamItem parse_record(const std::string& line, ItemId id) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SourceError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw SourceError("record is not a JSON object");

  StreamItem item;
  item.id = id;
  auto ts = j.find("ts");
  if (ts == j.end() || !ts->is_number_integer()) throw SourceError("missing integer field \"ts\"");
  item.timestamp = ts->get<std::int64_t>();
  if (item.timestamp < 0) throw SourceError("negative timestamp");

  auto stratum = j.find("stratum");
  if (stratum == j.end() || !stratum->is_string()) throw SourceError("missing string field \"stratum\"");
  item.stratum = stratum->get<std::string>();
  if (item.stratum.empty()) throw SourceError("empty stratum label");

  auto key = j.find("key");
  if (key != j.end() && !key->is_null()) {
    if (!key->is_string()) throw SourceError("field \"key\" must be a string or null");
    item.key = key->get<std::string>();
  }

  auto value = j.find("value");
  if (value == j.end() || !value->is_number()) throw SourceError("missing numeric field \"value\"");
  item.value = value->get<double>();
  return item;
}

std::string format_record(const StreamItem& item) {
  nlohmann::json j;
  j["ts"] = item.timestamp;
  j["stratum"] = item.stratum;
  if (item.key.empty()) {
    j["key"] = nullptr;
  } else {
    j["key"] = item.key;
  }
  j["value"] = item.value;
  return j.dump();
}

LineSource::LineSource(std::istream& in, std::size_t batch_size)
    : in_(in), batch_size_(batch_size == 0 ? 1 : batch_size) {}

std::vector<StreamItem> LineSource::next_batch() {
  std::vector<StreamItem> batch;
  std::string line;
  while (batch.size() < batch_size_ && std::getline(in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    try {
      batch.push_back(parse_record(line, next_id_++));
    } catch (const SourceError& e) {
      throw SourceError(describe(line_no_, e.what()));
    }
  }
  if (in_.bad()) throw SourceError("read failure");
  return batch;
}

struct FileSource::Impl {
  std::ifstream file;
  LineSource lines;
  Impl(const std::string& path, std::size_t batch_size) : file(path), lines(file, batch_size) {}
};

FileSource::FileSource(const std::string& path, std::size_t batch_size)
    : impl_(std::make_unique<Impl>(path, batch_size)) {
  if (!impl_->file) throw SourceError("cannot open " + path);
}

FileSource::~FileSource() = default;

std::vector<StreamItem> FileSource::next_batch() { return impl_->lines.next_batch(); }

TcpSource::TcpSource(const std::string& host, std::uint16_t port, std::size_t batch_size)
    : batch_size_(batch_size == 0 ? 1 : batch_size) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw SourceError("cannot resolve " + host + ": " + ::gai_strerror(rc));

  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw SourceError("cannot connect to " + host + ":" + service);
}

TcpSource::~TcpSource() {
  if (fd_ >= 0) ::close(fd_);
}

std::optional<std::string> TcpSource::read_line() {
  while (true) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw SourceError(std::string("socket read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

std::vector<StreamItem> TcpSource::next_batch() {
  std::vector<StreamItem> batch;
  while (batch.size() < batch_size_) {
    auto line = read_line();
    if (!line) break;
    ++line_no_;
    if (blank(*line)) continue;
    try {
      batch.push_back(parse_record(*line, next_id_++));
    } catch (const SourceError& e) {
      throw SourceError(describe(line_no_, e.what()));
    }
  }
  return batch;
}

namespace {

class StdinSource : public StreamSource {
 public:
  explicit StdinSource(std::size_t batch_size) : lines_(std::cin, batch_size) {}
  std::vector<StreamItem> next_batch() override { return lines_.next_batch(); }

 private:
  LineSource lines_;
};

}  // namespace

std::unique_ptr<StreamSource> open_source(const std::string& spec, std::size_t batch_size) {
  if (spec == "-") return std::make_unique<StdinSource>(batch_size);

  auto colon = spec.rfind(':');
  bool tcp_shaped = colon != std::string::npos && colon > 0 && colon + 1 < spec.size() &&
                    spec.find('/') == std::string::npos &&
                    spec.find_first_not_of("0123456789", colon + 1) == std::string::npos;
  if (tcp_shaped && !std::filesystem::exists(spec)) {
    unsigned long port = std::stoul(spec.substr(colon + 1));
    if (port == 0 || port > 65535) throw SourceError("invalid port in " + spec);
    return std::make_unique<TcpSource>(spec.substr(0, colon), static_cast<std::uint16_t>(port),
                                       batch_size);
  }
  return std::make_unique<FileSource>(spec, batch_size);
}

}  // namespace incapprox
