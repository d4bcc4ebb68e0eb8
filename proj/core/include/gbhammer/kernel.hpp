#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbhammer/dram.hpp"
#include "gbhammer/paging.hpp"
#include "gbhammer/tlb.hpp"
#include "gbhammer/trace.hpp"
#include "gbhammer/types.hpp"

namespace gbh {

enum class AccessKind { Read, Write, Exec };

std::string_view access_kind_name(AccessKind kind);
inline TlbKind tlb_kind_for(AccessKind kind) { return kind == AccessKind::Exec ? TlbKind::Instruction : TlbKind::Data; }

class PageFault : public KernelError {
 public:
  PageFault(VirtAddr va, std::string what) : KernelError(std::move(what)), va_(va) {}
  VirtAddr va() const { return va_; }

 private:
  VirtAddr va_;
};

struct KernelPolicy {
  bool respect_mmap_hint = true;
  bool allow_fixed_static_load = true;
  bool pic_relocation = false;
  std::uint64_t aslr_seed = 0;

  bool static_placement_allowed() const { return allow_fixed_static_load && !pic_relocation; }
};

/// LIFO free list standing in for the buddy allocator: the most recently
/// freed frame is handed out first. Contiguous requests search for the
/// lowest ascending run of free frames.
class FrameAllocator {
 public:
  FrameAllocator(Pfn first, Pfn end);

  Pfn allocate();
  std::vector<Pfn> allocate(std::size_t count);
  std::optional<std::vector<Pfn>> allocate_contiguous(std::size_t count, std::size_t align = 1);
  void free(Pfn pfn);

  bool is_free(Pfn pfn) const;
  std::size_t free_count() const { return stack_.size(); }
  Pfn first() const { return first_; }
  Pfn end() const { return end_; }
  /// Bottom of the stack first; back() is allocated next.
  const std::vector<Pfn>& free_list() const { return stack_; }

 private:
  Pfn first_;
  Pfn end_;
  std::vector<Pfn> stack_;
  std::vector<bool> free_;
};

struct Segment {
  VirtAddr va = 0;
  std::vector<std::uint8_t> bytes;  // rounded up to whole pages when mapped
};

struct Region {
  VirtAddr start = 0;
  std::uint64_t length = 0;
  bool populated = false;
  bool is_static = false;

  VirtAddr end() const { return start + length; }
  bool contains(VirtAddr va) const { return va >= start && va < end(); }
};

struct Process {
  Pid pid = 0;
  Asid asid = 0;
  std::string name;
  PhysAddr root_pa = 0;
  std::map<VirtAddr, Region> regions;
  std::uint64_t load_bias = 0;
  std::vector<Region> image;  // declared (unbiased) segment ranges
  VirtAddr next_mmap = 0;
  bool alive = true;

  const Region* region_at(VirtAddr va) const;
  /// Address the program means by `va`: shifted by load_bias when it falls in
  /// one of the program's own declared segments.
  VirtAddr program_address(VirtAddr va) const;
};

struct Translation {
  PhysAddr pa = 0;
  bool tlb_hit = false;
  bool global = false;
  Asid serving_asid = 0;
  bool demand_paged = false;
};

class Kernel {
 public:
  Kernel(PhysMem& mem, Tlb& tlb, const PagingProfile& profile, KernelPolicy policy, TraceSink* sink = nullptr);

  const PagingProfile& profile() const { return profile_; }
  const KernelPolicy& policy() const { return policy_; }
  PhysMem& mem() { return mem_; }
  const PhysMem& mem() const { return mem_; }
  Tlb& tlb() { return tlb_; }
  FrameAllocator& frames() { return frames_; }
  const FrameAllocator& frames() const { return frames_; }
  void set_sink(TraceSink* sink) { sink_ = sink; }

  Process& spawn(std::string name, std::span<const Segment> segments);
  Process& process(Pid pid);
  const Process& process(Pid pid) const;
  std::vector<Pid> pids() const;

  VirtAddr mmap(Pid pid, std::optional<VirtAddr> hint, std::uint64_t length, bool populate);
  /// Unmaps a whole region (length 0) or a page-aligned sub-range of one.
  /// Returns the freed data frames followed by the emptied table pages, in
  /// the order they were pushed to the free list.
  std::vector<Pfn> munmap(Pid pid, VirtAddr start, std::uint64_t length = 0);
  /// Places bytes at exactly `va` as a statically linked binary would be
  /// loaded; nullopt when the policy forbids fixed static placement.
  std::optional<VirtAddr> load_static(Pid pid, VirtAddr va, std::span<const std::uint8_t> bytes);

  /// MMU path: TLB lookup, walk on miss, insert with the walked global flag.
  Translation touch(Pid pid, VirtAddr va, AccessKind kind);
  /// What touch() would return, without side effects or demand paging.
  std::optional<Translation> peek(Pid pid, VirtAddr va, AccessKind kind) const;
  WalkOutcome walk(Pid pid, VirtAddr va) const;

  /// Frames currently referenced by a present leaf PTE or used as a table.
  std::vector<Pfn> owned_frames() const;
  VirtAddr user_va_limit() const;

 private:
  void emit(std::string_view event, TraceFields fields);
  Pfn allocate_zeroed();
  PhysAddr allocate_root();
  PhysAddr ensure_leaf_slot(Process& proc, VirtAddr va);
  void install(Process& proc, VirtAddr va, Pfn frame);
  void populate(Process& proc, VirtAddr start, std::uint64_t length);
  bool range_free(const Process& proc, VirtAddr start, std::uint64_t length) const;
  VirtAddr pick_va(Process& proc, std::uint64_t length);
  bool table_empty(PhysAddr table_pa, unsigned level) const;
  void collect_tables(const Process& proc, PhysAddr table_pa, unsigned level, std::vector<Pfn>& out) const;

  PhysMem& mem_;
  Tlb& tlb_;
  const PagingProfile& profile_;
  KernelPolicy policy_;
  TraceSink* sink_;
  FrameAllocator frames_;
  std::map<Pid, Process> procs_;
  Pid next_pid_ = 1;
  Asid next_asid_ = 1;
};

}  // namespace gbh
