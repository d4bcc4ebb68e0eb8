#include <gtest/gtest.h>

#include <algorithm>

#include "gbhammer/tlb.hpp"
#include "gen.hpp"

using namespace gbh;

namespace {

TlbEntry entry(Vpn vpn, Asid asid, bool global = false, TlbKind kind = TlbKind::Data, Pfn ppn = 0) {
  return TlbEntry{vpn, ppn ? ppn : vpn + 0x1000, asid, global, kind};
}

bool resident(const Tlb& tlb, TlbKind kind, Vpn vpn, Asid asid) {
  const auto es = tlb.entries(kind);
  return std::any_of(es.begin(), es.end(), [&](const TlbEntry& e) { return e.vpn == vpn && e.asid == asid; });
}

}  // namespace

TEST(Tlb, MissThenHit) {
  Tlb tlb;
  EXPECT_FALSE(tlb.lookup(TlbKind::Data, 0x20, 1));
  tlb.insert(entry(0x20, 1));
  const auto hit = tlb.lookup(TlbKind::Data, 0x20, 1);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->ppn, 0x1020u);
  EXPECT_EQ(tlb.stats(TlbKind::Data).hits, 1u);
  EXPECT_EQ(tlb.stats(TlbKind::Data).misses, 1u);
}

TEST(Tlb, KindsAreSeparate) {
  Tlb tlb;
  tlb.insert(entry(0x20, 1, false, TlbKind::Instruction));
  EXPECT_FALSE(tlb.lookup(TlbKind::Data, 0x20, 1));
  EXPECT_TRUE(tlb.lookup(TlbKind::Instruction, 0x20, 1));
}

TEST(Tlb, ForeignEntryMatchesOnlyWhenGlobal) {
  Tlb tlb;
  tlb.insert(entry(0x20, 2));
  EXPECT_FALSE(tlb.lookup(TlbKind::Data, 0x20, 1));
  tlb.insert(entry(0x20, 2, true));
  const auto hit = tlb.lookup(TlbKind::Data, 0x20, 1);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->asid, 2u);
  EXPECT_TRUE(hit->global);
}

TEST(Tlb, OwnEntryWinsOverForeignGlobal) {
  Tlb tlb;
  tlb.insert(entry(0x20, 1, false, TlbKind::Data, 0x111));
  tlb.insert(entry(0x20, 2, true, TlbKind::Data, 0x222));
  EXPECT_EQ(tlb.lookup(TlbKind::Data, 0x20, 1)->ppn, 0x111u);
  EXPECT_EQ(tlb.lookup(TlbKind::Data, 0x20, 3)->ppn, 0x222u);
}

TEST(Tlb, SameAsidReplacesInPlace) {
  Tlb tlb;
  tlb.insert(entry(0x20, 1, false, TlbKind::Data, 0x111));
  EXPECT_FALSE(tlb.insert(entry(0x20, 1, false, TlbKind::Data, 0x333)));
  EXPECT_EQ(tlb.occupancy(TlbKind::Data), 1u);
  EXPECT_EQ(tlb.lookup(TlbKind::Data, 0x20, 1)->ppn, 0x333u);
}

TEST(Tlb, HonorGlobalOffIgnoresGlobalEntries) {
  Tlb tlb(TlbConfig{64, Replacement::Lru, false});
  tlb.insert(entry(0x20, 2, true));
  EXPECT_FALSE(tlb.lookup(TlbKind::Data, 0x20, 1));
  EXPECT_TRUE(tlb.lookup(TlbKind::Data, 0x20, 2));
}

TEST(Tlb, LruEvictsLeastRecentlyUsed) {
  Tlb tlb(TlbConfig{2, Replacement::Lru, true});
  tlb.insert(entry(1, 1));
  tlb.insert(entry(2, 1));
  tlb.lookup(TlbKind::Data, 1, 1);
  const auto ev = tlb.insert(entry(3, 1));
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->vpn, 2u);
}

TEST(Tlb, FifoIgnoresHits) {
  Tlb tlb(TlbConfig{2, Replacement::Fifo, true});
  tlb.insert(entry(1, 1));
  tlb.insert(entry(2, 1));
  tlb.lookup(TlbKind::Data, 1, 1);
  const auto ev = tlb.insert(entry(3, 1));
  ASSERT_TRUE(ev);
  EXPECT_EQ(ev->vpn, 1u);
}

TEST(Tlb, Flushes) {
  Tlb tlb;
  tlb.insert(entry(1, 1));
  tlb.insert(entry(2, 1, true));
  tlb.insert(entry(3, 2));
  EXPECT_EQ(tlb.flush_asid(1), 2u);
  tlb.insert(entry(1, 1));
  tlb.insert(entry(2, 1, true));
  EXPECT_EQ(tlb.flush_all(true), 2u);
  EXPECT_EQ(tlb.occupancy(TlbKind::Data), 1u);
  EXPECT_EQ(tlb.flush_page(2), 1u);
  EXPECT_EQ(tlb.occupancy(TlbKind::Data), 0u);
}

TEST(Tlb, InvalidatePageRemovesOwnAndGlobalEntries) {
  Tlb tlb;
  tlb.insert(entry(0x20, 1));
  tlb.insert(entry(0x20, 2, true));
  tlb.insert(entry(0x20, 3));
  EXPECT_EQ(tlb.invalidate_page(0x20, 1), 2u);
  EXPECT_TRUE(resident(tlb, TlbKind::Data, 0x20, 3));
}

TEST(Tlb, RejectsZeroCapacity) { EXPECT_THROW(Tlb(TlbConfig{0, Replacement::Lru, true}), Fault); }

TEST(Tlb, ReplacementNames) {
  EXPECT_EQ(parse_replacement("lru"), Replacement::Lru);
  EXPECT_EQ(parse_replacement("FIFO"), Replacement::Fifo);
  EXPECT_THROW(parse_replacement("random"), std::invalid_argument);
}

TEST(Tlb, EvictionSequenceShape) {
  TlbConfig lru{64, Replacement::Lru, true};
  TlbConfig fifo{64, Replacement::Fifo, true};
  const auto a = access_sequence_to_evict(0x20, lru, 0);
  const auto b = access_sequence_to_evict(0x20, fifo, 0);
  EXPECT_EQ(a.size(), 64u);
  EXPECT_EQ(b.size(), 128u);
  EXPECT_EQ(std::count(a.begin(), a.end(), Vpn{0x20}), 0);
  std::vector<Vpn> small{1, 2, 3};
  EXPECT_THROW(access_sequence_to_evict(0x20, lru, small), std::invalid_argument);
}

// Whatever the TLB held before, replaying the sequence under the victim's or
// anyone's ASID removes every entry for the target vpn, for both policies.
TEST(TlbProperty, EvictionSequenceAlwaysEvicts) {
  proptest::Gen gen(17);
  for (int iter = 0; iter < 300; ++iter) {
    const std::size_t cap = gen.range(1, 24);
    const TlbConfig cfg{cap, gen.coin() ? Replacement::Lru : Replacement::Fifo, true};
    Tlb tlb(cfg);
    const Vpn target = gen.below(64);
    const Asid victim = 1;
    const Asid attacker = 2;
    for (int i = 0; i < 80; ++i) {
      const Vpn v = gen.chance(20) ? target : gen.below(256);
      const Asid a = gen.coin() ? victim : attacker;
      if (gen.coin()) tlb.insert(entry(v, a, gen.chance(30)));
      else tlb.lookup(TlbKind::Data, v, a);
    }
    tlb.insert(entry(target, victim));
    std::vector<Vpn> pool;
    for (Vpn v = 0; v < 4 * cap + 8; ++v) pool.push_back(gen.below(3) == 0 ? target : v + 100);
    std::vector<Vpn> seq;
    try {
      seq = gen.coin() ? access_sequence_to_evict(target, cfg, gen.below(1000))
                       : access_sequence_to_evict(target, cfg, pool);
    } catch (const std::invalid_argument&) {
      continue;
    }
    for (Vpn v : seq) {
      if (!tlb.lookup(TlbKind::Data, v, attacker)) tlb.insert(entry(v, attacker));
    }
    ASSERT_FALSE(resident(tlb, TlbKind::Data, target, victim)) << "cap " << cap;
  }
}

TEST(TlbProperty, OccupancyNeverExceedsCapacity) {
  proptest::Gen gen(23);
  Tlb tlb(TlbConfig{8, Replacement::Lru, true});
  for (int i = 0; i < 5000; ++i) {
    tlb.insert(entry(gen.below(40), static_cast<Asid>(gen.below(4)), gen.coin(),
                     gen.coin() ? TlbKind::Data : TlbKind::Instruction));
    ASSERT_LE(tlb.occupancy(TlbKind::Data), 8u);
    ASSERT_LE(tlb.occupancy(TlbKind::Instruction), 8u);
  }
}
