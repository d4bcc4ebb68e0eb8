#include "gbhammer/kernel.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace gbh {

namespace {

std::uint64_t round_up_pages(std::uint64_t len) { return (len + kPageSize - 1) & ~(kPageSize - 1); }

struct IsaLayout {
  VirtAddr user_limit;
  VirtAddr mmap_base;
  VirtAddr pic_base;
};

IsaLayout layout_for(Isa isa) {
  switch (isa) {
    case Isa::X86_64: return {0x0000800000000000ull, 0x00007f0000000000ull, 0x0000555500000000ull};
    case Isa::RV39: return {0x0000004000000000ull, 0x0000002000000000ull, 0x0000001000000000ull};
    case Isa::ARMV7: return {0xC0000000ull, 0x40000000ull, 0x10000000ull};
  }
  return {};
}

std::string str(std::uint64_t v) { return std::to_string(v); }

}  // namespace

std::string_view access_kind_name(AccessKind kind) {
  switch (kind) {
    case AccessKind::Read: return "read";
    case AccessKind::Write: return "write";
    case AccessKind::Exec: return "exec";
  }
  return "?";
}

// FrameAllocator -----------------------------------------------------------

FrameAllocator::FrameAllocator(Pfn first, Pfn end) : first_(first), end_(end), free_(end, false) {
  if (first >= end) throw KernelError("frame allocator needs at least one frame");
  stack_.reserve(end - first);
  for (Pfn p = end; p-- > first;) {
    stack_.push_back(p);
    free_[p] = true;
  }
}

Pfn FrameAllocator::allocate() {
  if (stack_.empty()) throw KernelError("out of physical memory");
  const Pfn p = stack_.back();
  stack_.pop_back();
  free_[p] = false;
  return p;
}

std::vector<Pfn> FrameAllocator::allocate(std::size_t count) {
  if (count > stack_.size()) throw KernelError("out of physical memory");
  std::vector<Pfn> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(allocate());
  return out;
}

std::optional<std::vector<Pfn>> FrameAllocator::allocate_contiguous(std::size_t count, std::size_t align) {
  if (count == 0) return std::vector<Pfn>{};
  if (align == 0) align = 1;
  Pfn start = (first_ + align - 1) / align * align;
  while (start + count <= end_) {
    std::size_t run = 0;
    while (run < count && free_[start + run]) ++run;
    if (run == count) {
      std::erase_if(stack_, [&](Pfn p) { return p >= start && p < start + count; });
      std::vector<Pfn> out;
      for (Pfn p = start; p < start + count; ++p) {
        free_[p] = false;
        out.push_back(p);
      }
      return out;
    }
    start = (start + run + 1 + align - 1) / align * align;
  }
  return std::nullopt;
}

void FrameAllocator::free(Pfn pfn) {
  if (pfn < first_ || pfn >= end_) throw KernelError("freeing frame outside the pool: " + to_hex(pfn));
  if (free_[pfn]) throw KernelError("double free of frame " + to_hex(pfn));
  free_[pfn] = true;
  stack_.push_back(pfn);
}

bool FrameAllocator::is_free(Pfn pfn) const { return pfn < end_ && free_[pfn]; }

// Process ------------------------------------------------------------------

const Region* Process::region_at(VirtAddr va) const {
  auto it = regions.upper_bound(va);
  if (it == regions.begin()) return nullptr;
  --it;
  return it->second.contains(va) ? &it->second : nullptr;
}

VirtAddr Process::program_address(VirtAddr va) const {
  if (load_bias == 0) return va;
  for (const auto& r : image) {
    if (r.contains(va)) return va + load_bias;
  }
  return va;
}

// Kernel -------------------------------------------------------------------

Kernel::Kernel(PhysMem& mem, Tlb& tlb, const PagingProfile& profile, KernelPolicy policy, TraceSink* sink)
    : mem_(mem),
      tlb_(tlb),
      profile_(profile),
      policy_(policy),
      sink_(sink),
      frames_(1, mem.capacity() / kPageSize) {}

void Kernel::emit(std::string_view event, TraceFields fields) {
  if (sink_) sink_->emit(event, std::move(fields));
}

VirtAddr Kernel::user_va_limit() const { return layout_for(profile_.isa).user_limit; }

Process& Kernel::process(Pid pid) {
  auto it = procs_.find(pid);
  if (it == procs_.end()) throw KernelError("no such process: " + std::to_string(pid));
  return it->second;
}

const Process& Kernel::process(Pid pid) const {
  auto it = procs_.find(pid);
  if (it == procs_.end()) throw KernelError("no such process: " + std::to_string(pid));
  return it->second;
}

std::vector<Pid> Kernel::pids() const {
  std::vector<Pid> out;
  for (const auto& [pid, _] : procs_) out.push_back(pid);
  return out;
}

Pfn Kernel::allocate_zeroed() {
  const Pfn p = frames_.allocate();
  mem_.fill(p << kPageShift, kPageSize, 0);
  return p;
}

PhysAddr Kernel::allocate_root() {
  const auto& root = profile_.level(profile_.root_level());
  const std::size_t frames = std::max<std::size_t>(1, root.table_bytes() / kPageSize);
  if (frames == 1) return allocate_zeroed() << kPageShift;
  auto run = frames_.allocate_contiguous(frames, frames);
  if (!run) throw KernelError("no aligned run of " + std::to_string(frames) + " frames for a root table");
  mem_.fill(run->front() << kPageShift, frames * kPageSize, 0);
  return run->front() << kPageShift;
}

PhysAddr Kernel::ensure_leaf_slot(Process& proc, VirtAddr va) {
  PhysAddr table = proc.root_pa;
  for (unsigned lvl = profile_.root_level(); lvl > 0; --lvl) {
    const auto& desc = profile_.levels[lvl];
    const PhysAddr entry_pa = table + profile_.index(lvl, va) * desc.entry_bytes();
    const RawPte raw{mem_.read_le(entry_pa, desc.entry_bytes())};
    const PteView view = decode_pte(profile_, lvl, raw);
    if (!view.present) {
      const Pfn t = allocate_zeroed();
      mem_.write_le(entry_pa, desc.entry_bytes(), encode_pte(profile_, lvl, table_pointer_view(profile_, lvl, t)).raw);
      emit("table_alloc", {{"pid", str(proc.pid)}, {"level", str(lvl - 1)}, {"frame", to_hex(t)}, {"va", to_hex(va)}});
      table = t << kPageShift;
    } else if (profile_.isa == Isa::ARMV7 && lvl == 1) {
      table = raw.raw & 0xFFFFFC00u;
    } else {
      table = view.frame << kPageShift;
    }
  }
  return table + profile_.index(0, va) * profile_.levels[0].entry_bytes();
}

void Kernel::install(Process& proc, VirtAddr va, Pfn frame) {
  PteView leaf;
  leaf.present = true;
  leaf.writable = true;
  leaf.user = true;
  leaf.executable = true;
  leaf.global = false;
  leaf.frame = frame;
  const auto& desc = profile_.levels[0];
  const PhysAddr slot = ensure_leaf_slot(proc, va);
  mem_.write_le(slot, desc.entry_bytes(), encode_pte(profile_, 0, leaf).raw);
}

void Kernel::populate(Process& proc, VirtAddr start, std::uint64_t length) {
  const std::uint64_t pages = length / kPageSize;
  // Table pages come off the free list first, so a just-freed frame lands in
  // the first table the mapping needs.
  std::vector<VirtAddr> todo;
  for (std::uint64_t i = 0; i < pages; ++i) {
    const VirtAddr va = start + i * kPageSize;
    if (gbh::walk(profile_, proc.root_pa, va, mem_).page_fault()) {
      ensure_leaf_slot(proc, va);
      todo.push_back(va);
    }
  }
  std::vector<Pfn> data;
  if (todo.size() > 1) {
    if (auto run = frames_.allocate_contiguous(todo.size())) data = std::move(*run);
  }
  if (data.empty()) data = frames_.allocate(todo.size());
  for (std::size_t i = 0; i < todo.size(); ++i) {
    mem_.fill(data[i] << kPageShift, kPageSize, 0);
    install(proc, todo[i], data[i]);
  }
  if (!todo.empty() && todo.size() == pages && pages > 0) {
    emit("populate", {{"pid", str(proc.pid)}, {"va", to_hex(start)}, {"pages", str(pages)},
                      {"first_frame", to_hex(data.front())}});
  }
}

bool Kernel::range_free(const Process& proc, VirtAddr start, std::uint64_t length) const {
  if (length == 0 || start + length > user_va_limit() || start + length < start) return false;
  for (const auto& [_, r] : proc.regions) {
    if (start < r.end() && r.start < start + length) return false;
  }
  return true;
}

VirtAddr Kernel::pick_va(Process& proc, std::uint64_t length) {
  VirtAddr cand = std::max(proc.next_mmap, layout_for(profile_.isa).mmap_base);
  for (bool moved = true; moved;) {
    moved = false;
    for (const auto& [_, r] : proc.regions) {
      if (cand < r.end() && r.start < cand + length) {
        cand = r.end();
        moved = true;
      }
    }
  }
  if (cand + length > user_va_limit()) throw KernelError("virtual address space exhausted");
  proc.next_mmap = cand + length;
  return cand;
}

Process& Kernel::spawn(std::string name, std::span<const Segment> segments) {
  const Pid pid = next_pid_++;
  std::uint64_t bias = 0;
  if (!policy_.static_placement_allowed() && !segments.empty()) {
    std::mt19937_64 rng(policy_.aslr_seed * 0x9E3779B97F4A7C15ull + pid);
    bias = layout_for(profile_.isa).pic_base + (1 + rng() % 0xFFFF) * kPageSize;
  }

  Process proc;
  proc.pid = pid;
  proc.name = std::move(name);
  proc.load_bias = bias;
  for (const auto& seg : segments) {
    if (!page_aligned(seg.va)) throw KernelError("segment va " + to_hex(seg.va) + " is not page aligned");
    const std::uint64_t len = round_up_pages(std::max<std::uint64_t>(seg.bytes.size(), 1));
    for (const auto& other : proc.image) {
      if (seg.va < other.end() && other.start < seg.va + len)
        throw KernelError("segment collision at " + to_hex(seg.va));
    }
    if (seg.va + bias + len > user_va_limit()) throw KernelError("segment outside user address space");
    proc.image.push_back(Region{seg.va, len, true, true});
  }

  std::set<Asid> live;
  for (const auto& [_, p] : procs_) {
    if (p.alive) live.insert(p.asid);
  }
  while (live.contains(next_asid_)) ++next_asid_;
  proc.asid = next_asid_++;
  proc.root_pa = allocate_root();
  proc.next_mmap = layout_for(profile_.isa).mmap_base;

  auto& stored = procs_.emplace(pid, std::move(proc)).first->second;
  emit("spawn", {{"pid", str(pid)}, {"asid", str(stored.asid)}, {"name", stored.name},
                 {"root", to_hex(stored.root_pa)}, {"load_bias", to_hex(bias)}});
  for (const auto& seg : segments) {
    const VirtAddr va = seg.va + bias;
    const std::uint64_t len = round_up_pages(std::max<std::uint64_t>(seg.bytes.size(), 1));
    stored.regions[va] = Region{va, len, true, true};
    populate(stored, va, len);
    for (std::uint64_t off = 0; off < seg.bytes.size(); off += kPageSize) {
      const auto w = gbh::walk(profile_, stored.root_pa, va + off, mem_);
      const std::size_t n = std::min<std::uint64_t>(kPageSize, seg.bytes.size() - off);
      mem_.write(w.result->pa, std::span(seg.bytes).subspan(off, n));
    }
    emit("segment", {{"pid", str(pid)}, {"va", to_hex(va)}, {"length", str(len)}});
  }
  return stored;
}

VirtAddr Kernel::mmap(Pid pid, std::optional<VirtAddr> hint, std::uint64_t length, bool populate_now) {
  auto& proc = process(pid);
  if (length == 0) throw KernelError("mmap length must be positive");
  if (hint && !page_aligned(*hint)) throw KernelError("mmap hint " + to_hex(*hint) + " is not page aligned");
  const std::uint64_t len = round_up_pages(length);
  VirtAddr start;
  if (hint && policy_.respect_mmap_hint && range_free(proc, *hint, len)) {
    start = *hint;
  } else {
    start = pick_va(proc, len);
  }
  proc.regions[start] = Region{start, len, populate_now, false};
  emit("mmap", {{"pid", str(pid)}, {"hint", hint ? to_hex(*hint) : "none"}, {"va", to_hex(start)},
                {"length", str(len)}, {"populate", populate_now ? "1" : "0"}});
  if (populate_now) populate(proc, start, len);
  return start;
}

std::optional<VirtAddr> Kernel::load_static(Pid pid, VirtAddr va, std::span<const std::uint8_t> bytes) {
  auto& proc = process(pid);
  if (!policy_.static_placement_allowed()) {
    emit("static_load", {{"pid", str(pid)}, {"va", to_hex(va)}, {"result", "refused"}});
    return std::nullopt;
  }
  if (!page_aligned(va)) throw KernelError("static segment va " + to_hex(va) + " is not page aligned");
  const std::uint64_t len = round_up_pages(std::max<std::uint64_t>(bytes.size(), 1));
  if (!range_free(proc, va, len)) throw KernelError("static segment collides at " + to_hex(va));
  proc.regions[va] = Region{va, len, true, true};
  populate(proc, va, len);
  for (std::uint64_t off = 0; off < bytes.size(); off += kPageSize) {
    const auto w = gbh::walk(profile_, proc.root_pa, va + off, mem_);
    const std::size_t n = std::min<std::uint64_t>(kPageSize, bytes.size() - off);
    mem_.write(w.result->pa, bytes.subspan(off, n));
  }
  emit("static_load", {{"pid", str(pid)}, {"va", to_hex(va)}, {"result", "placed"}});
  return va;
}

bool Kernel::table_empty(PhysAddr table_pa, unsigned level) const {
  const auto& desc = profile_.levels[level];
  for (std::uint64_t i = 0; i < desc.entries_per_table; ++i) {
    const RawPte raw{mem_.read_le(table_pa + i * desc.entry_bytes(), desc.entry_bytes())};
    if (decode_pte(profile_, level, raw).present) return false;
  }
  return true;
}

std::vector<Pfn> Kernel::munmap(Pid pid, VirtAddr start, std::uint64_t length) {
  auto& proc = process(pid);
  const Region* found = proc.region_at(start);
  if (!found) throw KernelError("munmap of unmapped address " + to_hex(start));
  const Region region = *found;
  std::uint64_t len = length;
  if (len == 0) {
    if (start != region.start) throw KernelError("munmap: " + to_hex(start) + " is not the start of a region");
    len = region.length;
  }
  len = round_up_pages(len);
  if (!page_aligned(start) || start + len > region.end())
    throw KernelError("munmap range " + to_hex(start) + "+" + std::to_string(len) + " exceeds its region");

  const auto& leaf_desc = profile_.levels[0];
  std::vector<Pfn> data;
  std::vector<std::vector<PteLocation>> paths;
  for (VirtAddr va = start; va < start + len; va += kPageSize) {
    const auto w = gbh::walk(profile_, proc.root_pa, va, mem_);
    if (w.page_fault()) continue;
    data.push_back(w.result->leaf.frame);
    const auto& leaf = w.consulted.back();
    mem_.write_le(leaf.entry_pa, leaf_desc.entry_bytes(), 0);
    tlb_.invalidate_page(vpn_of(va), proc.asid);
    paths.push_back(w.consulted);
  }

  std::vector<Pfn> tables;
  std::set<PhysAddr> freed_tables;
  for (const auto& path : paths) {
    // path is root first: path[i].level == root_level - i
    for (std::size_t i = path.size() - 1; i > 0; --i) {
      const PteLocation& loc = path[i];
      if (freed_tables.contains(loc.table_pa)) continue;
      if (!table_empty(loc.table_pa, loc.level)) break;
      const PteLocation& parent = path[i - 1];
      mem_.write_le(parent.entry_pa, profile_.levels[parent.level].entry_bytes(), 0);
      freed_tables.insert(loc.table_pa);
      tables.push_back(loc.table_pa >> kPageShift);
    }
  }

  for (Pfn f : data) frames_.free(f);
  for (Pfn t : tables) frames_.free(t);

  // region bookkeeping: drop or split
  proc.regions.erase(region.start);
  if (start > region.start)
    proc.regions[region.start] = Region{region.start, start - region.start, region.populated, region.is_static};
  if (start + len < region.end())
    proc.regions[start + len] = Region{start + len, region.end() - (start + len), region.populated, region.is_static};

  std::vector<Pfn> freed = data;
  freed.insert(freed.end(), tables.begin(), tables.end());
  emit("munmap", {{"pid", str(pid)}, {"va", to_hex(start)}, {"length", str(len)}, {"frames", str(data.size())},
                  {"tables", str(tables.size())}, {"top", freed.empty() ? "none" : to_hex(freed.back())}});
  return freed;
}

WalkOutcome Kernel::walk(Pid pid, VirtAddr va) const {
  return gbh::walk(profile_, process(pid).root_pa, va & profile_.va_mask(), mem_);
}

Translation Kernel::touch(Pid pid, VirtAddr va, AccessKind kind) {
  auto& proc = process(pid);
  const TlbKind tkind = tlb_kind_for(kind);
  const Vpn vpn = vpn_of(va);
  Translation t;
  if (auto hit = tlb_.lookup(tkind, vpn, proc.asid)) {
    t.pa = (hit->ppn << kPageShift) + page_offset(va);
    t.tlb_hit = true;
    t.global = hit->global;
    t.serving_asid = hit->asid;
    emit("tlb_lookup", {{"kind", std::string(tlb_kind_name(tkind))}, {"vpn", to_hex(vpn)}, {"asid", str(proc.asid)},
                        {"result", "HIT"}, {"serving_asid", str(hit->asid)}, {"global", hit->global ? "1" : "0"}});
    return t;
  }
  emit("tlb_lookup", {{"kind", std::string(tlb_kind_name(tkind))}, {"vpn", to_hex(vpn)}, {"asid", str(proc.asid)},
                      {"result", "MISS"}, {"serving_asid", "-"}, {"global", "-"}});

  auto w = walk(pid, va);
  if (w.page_fault()) {
    const Region* r = proc.region_at(va);
    if (!r) {
      emit("page_fault", {{"pid", str(pid)}, {"va", to_hex(va)}, {"level", str(w.fault_level)}});
      throw PageFault(va, "page fault at " + to_hex(va) + " in pid " + std::to_string(pid));
    }
    ensure_leaf_slot(proc, va);
    const Pfn f = allocate_zeroed();
    install(proc, va & ~(kPageSize - 1), f);
    emit("demand_alloc", {{"pid", str(pid)}, {"va", to_hex(va & ~(kPageSize - 1))}, {"frame", to_hex(f)}});
    t.demand_paged = true;
    w = walk(pid, va);
    if (w.page_fault()) throw PageFault(va, "page fault after demand paging at " + to_hex(va));
  }
  const WalkResult& r = *w.result;
  emit("walk", {{"pid", str(pid)}, {"va", to_hex(va)}, {"pa", to_hex(r.pa)}, {"global", r.global ? "1" : "0"}});
  const TlbEntry entry{vpn, r.pa >> kPageShift, proc.asid, r.global, tkind};
  if (auto evicted = tlb_.insert(entry)) {
    emit("tlb_evict", {{"kind", std::string(tlb_kind_name(tkind))}, {"vpn", to_hex(evicted->vpn)},
                       {"asid", str(evicted->asid)}, {"global", evicted->global ? "1" : "0"}});
  }
  emit("tlb_insert", {{"kind", std::string(tlb_kind_name(tkind))}, {"vpn", to_hex(vpn)}, {"ppn", to_hex(entry.ppn)},
                      {"asid", str(proc.asid)}, {"global", r.global ? "1" : "0"}});
  t.pa = r.pa;
  t.global = r.global;
  t.serving_asid = proc.asid;
  return t;
}

std::optional<Translation> Kernel::peek(Pid pid, VirtAddr va, AccessKind kind) const {
  const auto& proc = process(pid);
  const TlbKind tkind = tlb_kind_for(kind);
  if (auto hit = tlb_.peek(tkind, vpn_of(va), proc.asid)) {
    return Translation{(hit->ppn << kPageShift) + page_offset(va), true, hit->global, hit->asid, false};
  }
  const auto w = walk(pid, va);
  if (w.page_fault()) return std::nullopt;
  return Translation{w.result->pa, false, w.result->global, proc.asid, false};
}

void Kernel::collect_tables(const Process& proc, PhysAddr table_pa, unsigned level, std::vector<Pfn>& out) const {
  const auto& desc = profile_.levels[level];
  const std::uint64_t frames = std::max<std::uint64_t>(1, desc.table_bytes() / kPageSize);
  for (std::uint64_t i = 0; i < frames; ++i) out.push_back((table_pa >> kPageShift) + i);
  for (std::uint64_t i = 0; i < desc.entries_per_table; ++i) {
    const RawPte raw{mem_.read_le(table_pa + i * desc.entry_bytes(), desc.entry_bytes())};
    const PteView v = decode_pte(profile_, level, raw);
    if (!v.present) continue;
    if (level == 0) {
      out.push_back(v.frame);
    } else {
      const PhysAddr next = (profile_.isa == Isa::ARMV7 && level == 1) ? (raw.raw & 0xFFFFFC00u) : v.frame << kPageShift;
      collect_tables(proc, next, level - 1, out);
    }
  }
}

std::vector<Pfn> Kernel::owned_frames() const {
  std::vector<Pfn> out;
  for (const auto& [_, proc] : procs_) collect_tables(proc, proc.root_pa, profile_.root_level(), out);
  return out;
}

}  // namespace gbh
