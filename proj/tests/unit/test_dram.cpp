#include <gtest/gtest.h>

#include "gbhammer/dram.hpp"
#include "gen.hpp"

using namespace gbh;

namespace {

DramGeometry small_geometry() {
  DramGeometry g;
  g.row_count = 16;
  return g;
}

}  // namespace

TEST(Dram, MemoryStartsZeroed) {
  PhysMem mem(small_geometry());
  const auto bytes = mem.read(0, mem.capacity());
  for (auto b : bytes) ASSERT_EQ(b, 0);
}

TEST(Dram, GeometryRejectsBadRowSize) {
  DramGeometry g;
  g.row_size_bytes = 1000;
  EXPECT_THROW(g.validate(), Fault);
  g.row_size_bytes = 8192;
  g.row_count = 0;
  EXPECT_THROW(g.validate(), Fault);
}

TEST(Dram, OutOfRangeAccessFaults) {
  PhysMem mem(small_geometry());
  EXPECT_THROW(mem.read(mem.capacity() - 2, 4), Fault);
  EXPECT_THROW(mem.activate_row(16), Fault);
  EXPECT_THROW(mem.write_le(mem.capacity(), 8, 1), Fault);
}

TEST(Dram, LittleEndianRoundTrip) {
  PhysMem mem(small_geometry());
  mem.write_le(0x100, 8, 0x1122334455667788ull);
  EXPECT_EQ(mem.read(0x100, 1)[0], 0x88);
  EXPECT_EQ(mem.read_le(0x100, 8), 0x1122334455667788ull);
  EXPECT_EQ(mem.read_le(0x100, 4), 0x55667788ull);
}

TEST(Dram, FlipHappensExactlyAtThreshold) {
  HammerConfig h{100, 1};
  const VulnerableBit vb{5, 16000, 1};
  PhysMem mem(small_geometry(), h, {vb});
  EXPECT_TRUE(mem.hammer_row(4, 99).empty());
  EXPECT_FALSE(mem.bit(vb.physical_bit(mem.geometry())));
  const auto ev = mem.activate_row(4);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].aggressor_row, 4u);
  EXPECT_EQ(ev[0].bit, vb);
  EXPECT_EQ(ev[0].physical_bit, 5 * 8192 * 8 + 16000);
  EXPECT_TRUE(mem.bit(vb.physical_bit(mem.geometry())));
}

TEST(Dram, FlipsAreIdempotentAndDirectional) {
  HammerConfig h{10, 1};
  const VulnerableBit up{3, 8, 1};
  const VulnerableBit down{3, 9, 0};
  PhysMem mem(small_geometry(), h, {up, down});
  auto ev = mem.hammer_row(2, 50);
  ASSERT_EQ(ev.size(), 1u);  // `down` already holds 0
  EXPECT_EQ(ev[0].bit, up);
  EXPECT_TRUE(mem.hammer_row(4, 50).empty());
  EXPECT_EQ(mem.flip_log().size(), 1u);

  mem.fill(3 * 8192, 8192, 0xFF);
  mem.refresh();
  ev = mem.hammer_row(4, 10);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].bit, down);
}

TEST(Dram, AggressorAndFarRowsUntouched) {
  HammerConfig h{10, 1};
  PhysMem mem(small_geometry(), h, {VulnerableBit{7, 0, 1}, VulnerableBit{9, 0, 1}, VulnerableBit{10, 0, 1}});
  const auto ev = mem.hammer_row(7, 100);
  EXPECT_TRUE(ev.empty());
  const auto ev2 = mem.hammer_row(8, 100);
  ASSERT_EQ(ev2.size(), 2u);
  EXPECT_FALSE(mem.bit(VulnerableBit{10, 0, 1}.physical_bit(mem.geometry())));
}

TEST(Dram, BlastRadiusWidensTheNeighbourhood) {
  HammerConfig h{10, 2};
  PhysMem mem(small_geometry(), h, {VulnerableBit{10, 0, 1}, VulnerableBit{11, 0, 1}});
  EXPECT_EQ(mem.hammer_row(8, 10).size(), 1u);
  EXPECT_EQ(mem.hammer_row(12, 10).size(), 1u);
}

TEST(Dram, RefreshResetsCounters) {
  HammerConfig h{10, 1};
  PhysMem mem(small_geometry(), h, {VulnerableBit{3, 0, 1}});
  mem.hammer_row(2, 9);
  EXPECT_EQ(mem.activations(2), 9u);
  mem.refresh();
  EXPECT_EQ(mem.activations(2), 0u);
  EXPECT_TRUE(mem.hammer_row(2, 9).empty());
}

TEST(Dram, SeededMapIsDeterministicWithExpectedDensity) {
  DramGeometry g;
  const auto a = seed_vulnerable_bits(g, 42, 0.25);
  const auto b = seed_vulnerable_bits(g, 42, 0.25);
  const auto c = seed_vulnerable_bits(g, 43, 0.25);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_NEAR(static_cast<double>(a.size()) / g.row_count, 0.25, 0.04);
  for (const auto& v : a) {
    EXPECT_LT(v.row, g.row_count);
    EXPECT_LT(v.bit_offset_in_row, g.row_bits());
    EXPECT_LE(v.flip_to, 1);
  }
  EXPECT_TRUE(seed_vulnerable_bits(g, 1, 0.0).empty());
  EXPECT_EQ(seed_vulnerable_bits(g, 1, 1.0).size(), g.row_count);
}

// hammer_row(n) must be observationally identical to n single activations.
TEST(DramProperty, HammerRowMatchesRepeatedActivation) {
  proptest::Gen gen(7);
  for (int iter = 0; iter < 200; ++iter) {
    DramGeometry g;
    g.row_count = 8;
    HammerConfig h{gen.range(1, 40), gen.range(1, 2)};
    VulnMap map;
    for (int i = 0; i < 6; ++i)
      map.insert(VulnerableBit{gen.below(8), gen.below(g.row_bits()), static_cast<std::uint8_t>(gen.coin())});
    PhysMem bulk(g, h, map);
    PhysMem single(g, h, map);
    for (int op = 0; op < 12; ++op) {
      const std::uint64_t row = gen.below(8);
      const std::uint64_t n = gen.below(60);
      if (gen.chance(15)) {
        bulk.refresh();
        single.refresh();
        continue;
      }
      const auto a = bulk.hammer_row(row, n);
      std::vector<FlipEvent> b;
      for (std::uint64_t i = 0; i < n; ++i) {
        auto e = single.activate_row(row);
        b.insert(b.end(), e.begin(), e.end());
      }
      ASSERT_EQ(a, b);
      ASSERT_EQ(bulk.activations(row), single.activations(row));
    }
    ASSERT_EQ(bulk.read(0, bulk.capacity()), single.read(0, single.capacity()));
  }
}

// Flips never touch cells outside the vulnerable map.
TEST(DramProperty, OnlyVulnerableCellsChange) {
  proptest::Gen gen(11);
  DramGeometry g;
  g.row_count = 32;
  const auto map = seed_vulnerable_bits(g, 5, 0.5);
  PhysMem mem(g, HammerConfig{5, 1}, map);
  for (int i = 0; i < 100; ++i) mem.hammer_row(gen.below(32), gen.below(10));
  const auto bytes = mem.read(0, mem.capacity());
  std::uint64_t set = 0;
  for (std::uint64_t byte = 0; byte < bytes.size(); ++byte) {
    for (unsigned b = 0; b < 8; ++b) {
      if (!((bytes[byte] >> b) & 1)) continue;
      ++set;
      const std::uint64_t pbit = byte * 8 + b;
      const VulnerableBit vb{pbit / g.row_bits(), pbit % g.row_bits(), 1};
      ASSERT_TRUE(map.contains(vb)) << "unexpected set bit " << pbit;
    }
  }
  EXPECT_EQ(set, mem.flip_log().size());
}
