#include <doctest.h>

#include <unordered_set>

#include "cbid/flow_index.hpp"
#include "cbid/prng.hpp"
#include "test_util.hpp"

using namespace cbid;

namespace {

FlowKey flow_n(std::uint32_t n) {
  FlowKey k;
  k.version = 4;
  k.src_addr = {10, 0, 0, static_cast<std::uint8_t>(n)};
  k.dst_addr = {10, 0, 1, static_cast<std::uint8_t>(n >> 8)};
  k.src_port = static_cast<std::uint16_t>(1000 + n);
  k.dst_port = 80;
  k.protocol = IpProto::tcp;
  return k;
}

// Fig-7-shaped table: 5 flows x 10 sections. Row r lists 1-based columns.
BitmapIndexTable example_table() {
  BitmapIndexTable t(10);
  const std::vector<std::vector<int>> ones = {
      {2, 3, 6, 10}, {1, 3, 4, 6, 7, 8}, {4, 5}, {1, 2, 3, 4, 6, 7, 8, 9, 10}, {3, 5, 7, 9, 10}};
  for (const auto& row : ones) {
    const std::uint32_t r = t.add_row();
    for (int col1 : row) t.set(r, static_cast<std::uint32_t>(col1 - 1));
  }
  return t;
}

}  // namespace

TEST_CASE("flow list: registration is idempotent, row ids dense") {
  FlowList list;
  CHECK(list.register_flow(flow_n(0)) == 0);
  CHECK(list.register_flow(flow_n(1)) == 1);
  CHECK(list.register_flow(flow_n(0)) == 0);
  CHECK(list.size() == 2);
  CHECK(list.row_of(flow_n(1)).value() == 1);
  CHECK(!list.row_of(flow_n(9)).has_value());
}

TEST_CASE("flow list: duplicates collapse to the distinct count") {
  FlowList list;
  std::unordered_set<std::uint32_t> oracle;
  Prng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const auto n = static_cast<std::uint32_t>(rng.next_below(700));
    list.register_flow(flow_n(n));
    oracle.insert(n);
  }
  CHECK(list.size() == oracle.size());
}

TEST_CASE("index table: set is idempotent and row-isolated") {
  BitmapIndexTable t(64);
  t.add_row();
  t.add_row();
  t.set(0, 5);
  const Bytes snapshot = t.raw();
  t.set(0, 5);
  CHECK(t.raw() == snapshot);
  CHECK(t.get(0, 5));
  CHECK(!t.get(1, 5));
  t.set(1, 63);
  CHECK(t.get(0, 5));
  CHECK(!t.get(0, 63));
  CHECK(t.ones() == 2);
  CHECK_THROWS_AS(t.set(2, 0), std::logic_error);
  CHECK_THROWS_AS(t.set(0, 64), std::logic_error);
}

TEST_CASE("index table: worked five-flow example") {
  const BitmapIndexTable t = example_table();
  FlowList list;
  for (std::uint32_t i = 1; i <= 5; ++i) list.register_flow(flow_n(i));

  // row of flow 1 reads 0110010001 across the ten columns
  const std::vector<int> expect_row1 = {0, 1, 1, 0, 0, 1, 0, 0, 0, 1};
  for (int c = 0; c < 10; ++c) CHECK(t.get(0, c) == (expect_row1[c] == 1));

  SUBCASE("sections {3,6,10} leave flows 1 and 4") {
    const auto rows = t.candidate_rows({2, 5, 9});
    CHECK(rows == std::vector<std::uint32_t>{0, 3});
    const auto flows = candidate_flows(t, list, {2, 5, 9});
    REQUIRE(flows.size() == 2);
    CHECK(flows[0] == flow_n(1));
    CHECK(flows[1] == flow_n(4));
  }
  SUBCASE("section {5} leaves flows 3 and 5") {
    const auto rows = t.candidate_rows({4});
    CHECK(rows == std::vector<std::uint32_t>{2, 4});
  }
  SUBCASE("empty section set keeps every flow") {
    CHECK(t.candidate_rows({}).size() == 5);
  }
}

TEST_CASE("index table: pruning is monotone in the section set") {
  Prng rng(7);
  BitmapIndexTable t(32);
  for (int r = 0; r < 40; ++r) {
    t.add_row();
    for (int c = 0; c < 32; ++c) {
      if (rng.next_double() < 0.35) t.set(r, c);
    }
  }
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<std::uint32_t> sections;
    for (std::uint32_t c = 0; c < 32; ++c) {
      if (rng.next_double() < 0.15) sections.push_back(c);
    }
    auto before = t.candidate_rows(sections);
    sections.push_back(static_cast<std::uint32_t>(rng.next_below(32)));
    auto after = t.candidate_rows(sections);
    // after is a subset of before
    std::unordered_set<std::uint32_t> b(before.begin(), before.end());
    CHECK(after.size() <= before.size());
    for (auto r : after) CHECK(b.count(r) == 1);
  }
}

TEST_CASE("compression: all-zero table crushes to under 1%") {
  BitmapIndexTable t(1 << 13);  // 1024 bytes per row
  for (int r = 0; r < 128; ++r) t.add_row();  // 1,048,576 bits
  const CompressedTable ct = compress_table(t, TableCodec::lzma);
  CHECK(ct.payload.size() * 100 < t.raw().size());
  CHECK(decompress_table(ct) == t);
}

TEST_CASE("compression: random tables round-trip bit-exactly in every codec") {
  Prng rng(99);
  BitmapIndexTable t(333);
  for (int r = 0; r < 50; ++r) {
    t.add_row();
    for (std::uint32_t c = 0; c < 333; ++c) {
      if (rng.next_double() < 0.5) t.set(r, c);
    }
  }
  for (TableCodec codec : {TableCodec::none, TableCodec::lzma, TableCodec::deflate}) {
    const CompressedTable ct = compress_table(t, codec);
    const BitmapIndexTable back = decompress_table(ct);
    CHECK(back == t);
    CHECK(back.rows() == 50);
    CHECK(back.columns() == 333);
  }
}

TEST_CASE("table stats: degenerate and analytic cases") {
  SUBCASE("all-zero table has zero entropy") {
    BitmapIndexTable t(64);
    for (int r = 0; r < 8; ++r) t.add_row();
    const TableStats st = table_stats(t, 1);
    CHECK(st.ones_fraction == 0.0);
    CHECK(st.entropy_bits == 0.0);
    CHECK(std::isinf(st.best_theoretical_ratio));
  }
  SUBCASE("uniform random bytes are incompressible") {
    Prng rng(123);
    Bytes raw(std::size_t(1 << 10) * 1024);
    rng.fill(raw.data(), raw.size());
    const auto table = BitmapIndexTable::from_raw(1024, 1 << 13, std::move(raw));
    const TableStats st = table_stats(table, 1);
    CHECK(st.entropy_bits > 7.99);
    CHECK(st.best_theoretical_ratio == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("64x64 diagonal table: 64 distinct 8-byte symbols, entropy 6 bits") {
    BitmapIndexTable t(64);
    for (int r = 0; r < 64; ++r) {
      t.add_row();
      t.set(r, r);
    }
    const TableStats st = table_stats(t, 8);
    CHECK(st.entropy_bits == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(st.best_theoretical_ratio == doctest::Approx(64.0 / 6.0).epsilon(1e-9));
    CHECK(st.ones_fraction == doctest::Approx(1.0 / 64.0));
  }
  SUBCASE("table smaller than one symbol is an error") {
    BitmapIndexTable t(8);
    t.add_row();
    CHECK_THROWS(table_stats(t, 2));
  }
}
