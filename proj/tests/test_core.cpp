#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <doctest.h>

#include <numeric>
#include <sstream>
#include <thread>

#include "helpers.hpp"
#include "incapprox/bench.hpp"
#include "incapprox/random.hpp"
#include "incapprox/source.hpp"

using namespace incapprox;
using testing::item;

namespace {

void check_invariants(const WindowState& s) {
  std::uint64_t sum = 0;
  for (const auto& [_, n] : s.stratum_counts()) sum += n;
  CHECK(sum == s.total());
  CHECK(s.items().size() == s.total());
  CHECK(s.strata_order().size() == s.stratum_counts().size());
  for (const auto& stratum : s.strata_order()) CHECK(s.stratum_counts().contains(stratum));
  for (const auto& it : s.items()) {
    CHECK(it.timestamp >= s.start());
    CHECK(it.timestamp < s.end());
  }
  CHECK(std::is_sorted(s.items().begin(), s.items().end(), item_order));
}

}  // namespace

TEST_CASE("empty batch leaves the window unchanged") {
  WindowState s(0, 100);
  s.ingest({});
  CHECK(s.total() == 0);
  CHECK(s.carryover().empty());
  CHECK(s.strata_order().empty());
}

TEST_CASE("ingest counts items per stratum") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 1, "A"), item(2, 2, "A"), item(3, 3, "B"), item(4, 4, "A"),
                                item(5, 5, "B")};
  s.ingest(batch);
  CHECK(s.total() == 5);
  CHECK(s.stratum_counts().at("A") == 3);
  CHECK(s.stratum_counts().at("B") == 2);
  CHECK(s.strata_order() == std::vector<std::string>{"A", "B"});
  check_invariants(s);
}

TEST_CASE("an item at the window end is buffered for the next window") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 99, "A"), item(2, 100, "A")};
  s.ingest(batch);
  CHECK(s.total() == 1);
  REQUIRE(s.carryover().size() == 1);
  CHECK(s.carryover().front().id == 2);
  s.slide(10);
  CHECK(s.total() == 2);
  CHECK(s.carryover().empty());
}

TEST_CASE("tumbling slide evicts every item") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 0, "A"), item(2, 50, "B"), item(3, 99, "A")};
  s.ingest(batch);
  auto evicted = s.slide(100);
  CHECK(evicted.size() == 3);
  CHECK(s.total() == 0);
  CHECK(s.stratum_counts().empty());
  CHECK(s.strata_order().empty());
  CHECK(s.start() == 100);
}

TEST_CASE("slide evicts only items before the new start") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 5, "A"), item(2, 50, "A")};
  s.ingest(batch);
  auto evicted = s.slide(10);
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].id == 1);
  CHECK(s.total() == 1);
  CHECK(s.items().front().id == 2);
  check_invariants(s);
}

TEST_CASE("a 4% slide over a 10,000-item window evicts about 400 items") {
  ScenarioSpec spec;
  spec.seed = 11;
  spec.substreams = {{"S1", 3}, {"S2", 4}, {"S3", 5}};
  const Timestamp length = ticks_for_items(10000, 12, spec.ticks_per_unit);
  const Timestamp slide = length * 4 / 100;
  const auto items = generate(spec, length + 20 * slide);
  WindowState s(0, length);
  s.ingest(items);
  double evicted = 0;
  for (int i = 0; i < 20; ++i) evicted += static_cast<double>(s.slide(slide).size());
  CHECK(evicted / 20 == doctest::Approx(400).epsilon(0.05));
}

TEST_CASE("advance_to is idempotent for the same start") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 5, "A"), item(2, 50, "A"), item(3, 70, "B")};
  s.ingest(batch);
  CHECK(s.advance_to(60).size() == 2);
  CHECK(s.advance_to(60).empty());
  CHECK(s.advance_to(30).empty());
  CHECK(s.start() == 60);
  CHECK(s.total() == 1);
}

TEST_CASE("item order depends only on timestamp and id") {
  std::vector<StreamItem> batch{item(4, 3, "B"), item(1, 3, "A"), item(3, 1, "A"), item(2, 2, "B"),
                                item(0, 3, "C")};
  std::vector<ItemId> reference;
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    for (std::size_t i = batch.size(); i > 1; --i) std::swap(batch[i - 1], batch[uniform_below(rng, i)]);
    WindowState s(0, 10);
    s.ingest(batch);
    std::vector<ItemId> ids;
    for (const auto& it : s.items()) ids.push_back(it.id);
    if (trial == 0) reference = ids;
    CHECK(ids == reference);
  }
  CHECK(reference == std::vector<ItemId>{3, 2, 0, 1, 4});
}

TEST_CASE("duplicate ids reject the whole batch") {
  WindowState s(0, 100);
  std::vector<StreamItem> first{item(1, 1, "A")};
  s.ingest(first);
  std::vector<StreamItem> clash{item(2, 2, "A"), item(1, 3, "A")};
  CHECK_THROWS_AS(s.ingest(clash), DuplicateIdError);
  CHECK(s.total() == 1);
  std::vector<StreamItem> inner{item(5, 2, "A"), item(5, 3, "B")};
  CHECK_THROWS_AS(s.ingest(inner), DuplicateIdError);
  CHECK(s.total() == 1);
  std::vector<StreamItem> carried{item(7, 150, "A")};
  s.ingest(carried);
  std::vector<StreamItem> clash_carry{item(7, 10, "A")};
  CHECK_THROWS_AS(s.ingest(clash_carry), DuplicateIdError);
}

TEST_CASE("items older than the window start are counted as late") {
  WindowState s(50, 100);
  std::vector<StreamItem> batch{item(1, 10, "A"), item(2, 60, "A")};
  s.ingest(batch);
  CHECK(s.late_items() == 1);
  CHECK(s.total() == 1);
}

TEST_CASE("invalid items and window specs are rejected") {
  WindowState s(0, 10);
  std::vector<StreamItem> no_stratum{item(1, 1, "")};
  CHECK_THROWS(s.ingest(no_stratum));
  CHECK_THROWS_AS((WindowSpec{0, 10, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((WindowSpec{0, 10, 11}.validate()), ConfigError);
  CHECK_NOTHROW((WindowSpec{0, 10, 10}.validate()));
  CHECK_THROWS_AS(WindowState(0, 0), ConfigError);
}

TEST_CASE("resize moves items past the new end back to carryover") {
  WindowState s(0, 100);
  std::vector<StreamItem> batch{item(1, 10, "A"), item(2, 80, "B"), item(3, 120, "A")};
  s.ingest(batch);
  s.resize(50);
  CHECK(s.total() == 1);
  CHECK(s.carryover().size() == 2);
  CHECK(s.strata_order() == std::vector<std::string>{"A"});
  s.resize(200);
  CHECK(s.total() == 3);
  CHECK(s.carryover().empty());
  check_invariants(s);
}

TEST_CASE("counts stay consistent under random ingest and slide") {
  Rng rng(99);
  WindowState s(0, 50);
  ItemId next = 0;
  Timestamp now = 0;
  for (int round = 0; round < 200; ++round) {
    std::vector<StreamItem> batch;
    const auto n = uniform_below(rng, 8);
    for (std::uint64_t i = 0; i < n; ++i) {
      batch.push_back(item(next++, now + static_cast<Timestamp>(uniform_below(rng, 30)),
                           std::string(1, static_cast<char>('A' + uniform_below(rng, 4)))));
    }
    s.ingest(batch);
    check_invariants(s);
    if (uniform_below(rng, 3) == 0) {
      s.slide(1 + static_cast<Timestamp>(uniform_below(rng, 10)));
      check_invariants(s);
    }
    now = s.start();
  }
}

TEST_CASE("JSON records round-trip") {
  auto it = parse_record(R"({"ts": 12, "stratum": "S1", "key": "k", "value": 2.5})", 3);
  CHECK(it.id == 3);
  CHECK(it.timestamp == 12);
  CHECK(it.stratum == "S1");
  CHECK(it.key == "k");
  CHECK(it.value == 2.5);
  auto back = parse_record(format_record(it), 3);
  CHECK(back.timestamp == it.timestamp);
  CHECK(back.key == it.key);
  CHECK(back.value == it.value);

  auto nokey = parse_record(R"({"ts": 0, "stratum": "S", "key": null, "value": 1})", 0);
  CHECK(nokey.key.empty());
  CHECK_THROWS_AS(parse_record("{", 0), SourceError);
  CHECK_THROWS_AS(parse_record(R"({"ts": 1.5, "stratum": "S", "value": 1})", 0), SourceError);
  CHECK_THROWS_AS(parse_record(R"({"ts": 1, "stratum": "", "value": 1})", 0), SourceError);
  CHECK_THROWS_AS(parse_record(R"({"ts": 1, "stratum": "S"})", 0), SourceError);
  CHECK_THROWS_AS(parse_record(R"({"ts": -1, "stratum": "S", "value": 1})", 0), SourceError);
}

TEST_CASE("line source assigns increasing ids and skips blank lines") {
  std::istringstream in(
      "{\"ts\": 1, \"stratum\": \"A\", \"value\": 1}\n\n"
      "{\"ts\": 2, \"stratum\": \"B\", \"value\": 2}\n"
      "{\"ts\": 3, \"stratum\": \"A\", \"value\": 3}\n");
  LineSource src(in, 2);
  auto a = src.next_batch();
  auto b = src.next_batch();
  REQUIRE(a.size() == 2);
  REQUIRE(b.size() == 1);
  CHECK(a[0].id == 0);
  CHECK(a[1].id == 1);
  CHECK(b[0].id == 2);
  CHECK(src.next_batch().empty());
}

TEST_CASE("line source reports the failing line") {
  std::istringstream in("{\"ts\": 1, \"stratum\": \"A\", \"value\": 1}\nnot json\n");
  LineSource src(in);
  try {
    src.next_batch();
    FAIL("expected SourceError");
  } catch (const SourceError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("missing input file is a source error") {
  CHECK_THROWS_AS(open_source("/nonexistent/input.jsonl"), SourceError);
}

TEST_CASE("tcp source reads records from a socket") {
  int server = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(server >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  REQUIRE(::listen(server, 1) == 0);
  socklen_t len = sizeof addr;
  REQUIRE(::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  const auto port = ntohs(addr.sin_port);

  std::thread peer([server] {
    int conn = ::accept(server, nullptr, nullptr);
    std::string payload;
    for (int i = 0; i < 50; ++i) {
      payload += "{\"ts\": " + std::to_string(i) + ", \"stratum\": \"S" + std::to_string(i % 3) +
                 "\", \"key\": null, \"value\": " + std::to_string(i) + "}\n";
    }
    // Split mid-record to exercise reassembly.
    (void)!::write(conn, payload.data(), 37);
    ::usleep(1000);
    (void)!::write(conn, payload.data() + 37, payload.size() - 37);
    ::close(conn);
  });

  auto src = open_source("127.0.0.1:" + std::to_string(port), 16);
  std::vector<StreamItem> all;
  for (auto batch = src->next_batch(); !batch.empty(); batch = src->next_batch())
    all.insert(all.end(), batch.begin(), batch.end());
  peer.join();
  ::close(server);

  REQUIRE(all.size() == 50);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].id == i);
    CHECK(all[i].timestamp == static_cast<Timestamp>(i));
    CHECK(all[i].value == static_cast<double>(i));
  }
}

TEST_CASE("tcp connection failure is a source error") {
  int probe = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(probe, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(probe, reinterpret_cast<sockaddr*>(&addr), &len);
  const auto port = ntohs(addr.sin_port);
  ::close(probe);
  CHECK_THROWS_AS(open_source("127.0.0.1:" + std::to_string(port)), SourceError);
}
