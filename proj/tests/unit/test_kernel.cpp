#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gbhammer/kernel.hpp"
#include "gen.hpp"

using namespace gbh;

namespace {

struct Machine {
  explicit Machine(Isa isa = Isa::X86_64, KernelPolicy policy = {}, std::uint64_t rows = 256)
      : mem(geometry(rows)), tlb(), kernel(mem, tlb, PagingProfile::get(isa), policy) {}

  static DramGeometry geometry(std::uint64_t rows) {
    DramGeometry g;
    g.row_count = rows;
    return g;
  }

  PhysMem mem;
  Tlb tlb;
  Kernel kernel;
};

std::vector<std::uint8_t> bytes_of(std::string_view s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(FrameAllocator, PopsAscendingThenLifo) {
  FrameAllocator fa(1, 10);
  EXPECT_EQ(fa.allocate(), 1u);
  EXPECT_EQ(fa.allocate(), 2u);
  const Pfn a = fa.allocate();
  const Pfn b = fa.allocate();
  fa.free(a);
  fa.free(b);
  EXPECT_EQ(fa.allocate(), b);
  EXPECT_EQ(fa.allocate(), a);
}

TEST(FrameAllocator, RejectsDoubleFreeAndForeignFrames) {
  FrameAllocator fa(1, 10);
  const Pfn a = fa.allocate();
  fa.free(a);
  EXPECT_THROW(fa.free(a), KernelError);
  EXPECT_THROW(fa.free(0), KernelError);
  EXPECT_THROW(fa.free(10), KernelError);
}

TEST(FrameAllocator, ContiguousRunsAreAlignedAndLowest) {
  FrameAllocator fa(1, 64);
  const auto run = fa.allocate_contiguous(4, 4);
  ASSERT_TRUE(run);
  EXPECT_EQ(run->front(), 4u);
  EXPECT_EQ(run->size(), 4u);
  for (Pfn p : *run) EXPECT_FALSE(fa.is_free(p));
  EXPECT_FALSE(fa.allocate_contiguous(100));
  EXPECT_THROW(fa.allocate(1000), KernelError);
}

TEST(Kernel, SpawnPlacesSegmentsAtTheirAddresses) {
  Machine m;
  Segment seg{0x20000, bytes_of("hello")};
  const Process& p = m.kernel.spawn("victim", std::span(&seg, 1));
  EXPECT_EQ(p.load_bias, 0u);
  const auto t = m.kernel.touch(p.pid, 0x20000, AccessKind::Read);
  EXPECT_EQ(m.mem.read(t.pa, 5), bytes_of("hello"));
  EXPECT_FALSE(t.tlb_hit);
  EXPECT_TRUE(m.kernel.touch(p.pid, 0x20001, AccessKind::Read).tlb_hit);
}

TEST(Kernel, DistinctProcessesGetDistinctAsidsAndRoots) {
  Machine m;
  const Pid a = m.kernel.spawn("a", {}).pid;
  const Pid b = m.kernel.spawn("b", {}).pid;
  EXPECT_NE(m.kernel.process(a).asid, m.kernel.process(b).asid);
  EXPECT_NE(m.kernel.process(a).root_pa, m.kernel.process(b).root_pa);
}

TEST(Kernel, PicRelocationShiftsTheImage) {
  KernelPolicy pol;
  pol.pic_relocation = true;
  pol.aslr_seed = 9;
  Machine m(Isa::X86_64, pol);
  Segment seg{0x20000, bytes_of("x")};
  const Process& p = m.kernel.spawn("victim", std::span(&seg, 1));
  EXPECT_NE(p.load_bias, 0u);
  EXPECT_EQ(p.load_bias % kPageSize, 0u);
  EXPECT_EQ(p.program_address(0x20000), 0x20000 + p.load_bias);
  EXPECT_EQ(p.program_address(0x90000), 0x90000u);
  EXPECT_TRUE(m.kernel.walk(p.pid, 0x20000).page_fault());
  EXPECT_FALSE(m.kernel.walk(p.pid, 0x20000 + p.load_bias).page_fault());
  EXPECT_FALSE(m.kernel.load_static(p.pid, 0x50000, bytes_of("y")).has_value());
}

TEST(Kernel, MmapHonoursOrIgnoresHints) {
  Machine m;
  const Pid pid = m.kernel.spawn("a", {}).pid;
  EXPECT_EQ(m.kernel.mmap(pid, 0x20000, kPageSize, true), 0x20000u);
  EXPECT_NE(m.kernel.mmap(pid, 0x20000, kPageSize, true), 0x20000u);  // taken

  KernelPolicy pol;
  pol.respect_mmap_hint = false;
  Machine n(Isa::X86_64, pol);
  const Pid q = n.kernel.spawn("a", {}).pid;
  EXPECT_NE(n.kernel.mmap(q, 0x20000, kPageSize, true), 0x20000u);
  EXPECT_EQ(n.kernel.load_static(q, 0x20000, bytes_of("z")), VirtAddr{0x20000});
}

TEST(Kernel, DemandPagingAndFaults) {
  Machine m;
  const Pid pid = m.kernel.spawn("a", {}).pid;
  const VirtAddr va = m.kernel.mmap(pid, std::nullopt, 4 * kPageSize, false);
  EXPECT_TRUE(m.kernel.walk(pid, va).page_fault());
  const auto t = m.kernel.touch(pid, va + kPageSize, AccessKind::Write);
  EXPECT_TRUE(t.demand_paged);
  EXPECT_FALSE(m.kernel.walk(pid, va + kPageSize).page_fault());
  EXPECT_THROW(m.kernel.touch(pid, 0x1000, AccessKind::Read), PageFault);
}

TEST(Kernel, MunmapReturnsFramesAndInvalidatesTlb) {
  Machine m;
  const Pid pid = m.kernel.spawn("a", {}).pid;
  const VirtAddr va = m.kernel.mmap(pid, std::nullopt, 8 * kPageSize, true);
  const auto t = m.kernel.touch(pid, va + 3 * kPageSize, AccessKind::Read);
  const auto freed = m.kernel.munmap(pid, va + 3 * kPageSize, kPageSize);
  ASSERT_EQ(freed.size(), 1u);
  EXPECT_EQ(freed[0], t.pa >> kPageShift);
  EXPECT_TRUE(m.kernel.frames().is_free(freed[0]));
  EXPECT_EQ(m.kernel.frames().free_list().back(), freed[0]);
  EXPECT_FALSE(m.tlb.peek(TlbKind::Data, vpn_of(va + 3 * kPageSize), m.kernel.process(pid).asid));
  EXPECT_THROW(m.kernel.touch(pid, va + 3 * kPageSize, AccessKind::Read), PageFault);
  EXPECT_FALSE(m.kernel.walk(pid, va + 4 * kPageSize).page_fault());
  EXPECT_EQ(m.kernel.process(pid).regions.size(), 2u);
}

TEST(Kernel, FreedPageBecomesTheNextTablePage) {
  Machine m;
  const Pid pid = m.kernel.spawn("attacker", {}).pid;
  const VirtAddr r = m.kernel.mmap(pid, std::nullopt, 16 * kPageSize, true);
  m.kernel.mmap(pid, 0x220000, kPageSize, true);  // builds the upper tables for 0x20000
  const Pfn target = m.kernel.walk(pid, r + 5 * kPageSize).result->pa >> kPageShift;
  m.kernel.munmap(pid, r + 5 * kPageSize, kPageSize);
  ASSERT_EQ(m.kernel.mmap(pid, 0x20000, kPageSize, true), 0x20000u);
  const auto w = m.kernel.walk(pid, 0x20000);
  ASSERT_FALSE(w.page_fault());
  EXPECT_EQ(w.result->pte_locations.back().table_pa, target << kPageShift);
}

// Every frame is either free or reachable from exactly one place in some
// page table, across random mmap / munmap / touch sequences.
TEST(KernelProperty, FramesAreConserved) {
  proptest::Gen gen(29);
  for (int iter = 0; iter < 30; ++iter) {
    const Isa isa = gen.pick(std::vector<Isa>{Isa::X86_64, Isa::RV39, Isa::ARMV7});
    Machine m(isa, {}, 128);
    std::vector<Pid> pids;
    for (int i = 0; i < 3; ++i) pids.push_back(m.kernel.spawn("p" + std::to_string(i), {}).pid);
    for (int op = 0; op < 60; ++op) {
      const Pid pid = gen.pick(pids);
      const auto& regions = m.kernel.process(pid).regions;
      try {
        switch (gen.below(4)) {
          case 0: m.kernel.mmap(pid, std::nullopt, gen.range(1, 6) * kPageSize, gen.coin()); break;
          case 1:
            m.kernel.mmap(pid, (gen.below(64) + 16) * kPageSize * (gen.coin() ? 1 : 512), gen.range(1, 3) * kPageSize,
                          true);
            break;
          case 2:
            if (!regions.empty()) {
              auto it = regions.begin();
              std::advance(it, static_cast<long>(gen.below(regions.size())));
              const Region r = it->second;
              const std::uint64_t pages = r.length / kPageSize;
              const std::uint64_t first = gen.below(pages);
              m.kernel.munmap(pid, r.start + first * kPageSize, gen.range(1, pages - first) * kPageSize);
            }
            break;
          case 3:
            if (!regions.empty()) {
              const Region r = regions.begin()->second;
              m.kernel.touch(pid, r.start + gen.below(r.length), gen.coin() ? AccessKind::Read : AccessKind::Write);
            }
            break;
        }
      } catch (const KernelError&) {
        // exhausted memory and the like are legitimate outcomes
      }
      const auto owned = m.kernel.owned_frames();
      std::set<Pfn> unique(owned.begin(), owned.end());
      ASSERT_EQ(unique.size(), owned.size()) << "frame referenced twice";
      for (Pfn f : owned) ASSERT_FALSE(m.kernel.frames().is_free(f));
      const std::size_t pool = m.kernel.frames().end() - m.kernel.frames().first();
      ASSERT_EQ(owned.size() + m.kernel.frames().free_count(), pool) << isa_name(isa) << " op " << op;
    }
  }
}
