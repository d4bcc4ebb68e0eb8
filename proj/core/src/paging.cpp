#include "gbhammer/paging.hpp"

#include <stdexcept>

namespace gbh {

namespace {

constexpr std::uint64_t bit(unsigned n) { return std::uint64_t{1} << n; }

// x86_64 (4-level, 4 KiB pages only)
constexpr unsigned kX86Present = 0;
constexpr unsigned kX86Write = 1;
constexpr unsigned kX86User = 2;
constexpr unsigned kX86Global = 8;
constexpr unsigned kX86Nx = 63;
constexpr std::uint64_t kX86FrameMask = ((std::uint64_t{1} << 40) - 1) << 12;

// Sv39
constexpr unsigned kRvValid = 0;
constexpr unsigned kRvRead = 1;
constexpr unsigned kRvWrite = 2;
constexpr unsigned kRvExec = 3;
constexpr unsigned kRvUser = 4;
constexpr unsigned kRvGlobal = 5;
constexpr unsigned kRvPpnShift = 10;
constexpr std::uint64_t kRvPpnMask = (std::uint64_t{1} << 44) - 1;

// ARMv7 short-descriptor. L1 page-table descriptor: bits[1:0] = 01,
// bits[31:10] = L2 base. L2 small page: bit1 = 1, XN = bit0, AP[0] = bit4,
// AP[1] = bit5 (unprivileged access), AP[2] = bit9 (read-only), nG = bit11.
constexpr unsigned kArmXn = 0;
constexpr unsigned kArmSmallPage = 1;
constexpr unsigned kArmAp0 = 4;
constexpr unsigned kArmAp1 = 5;
constexpr unsigned kArmAp2 = 9;
constexpr unsigned kArmNotGlobal = 11;
constexpr std::uint64_t kArmL1TableBaseMask = 0xFFFFFC00u;
constexpr std::uint64_t kArmFrameLimit = std::uint64_t{1} << 20;

PagingProfile make_x86_64() {
  PagingProfile p;
  p.isa = Isa::X86_64;
  p.global_polarity = GlobalPolarity::SetMeansGlobal;
  p.nonleaf_global_propagates = false;
  p.va_bits = 48;
  for (unsigned lvl = 0; lvl < 4; ++lvl) {
    LevelDesc d;
    d.entry_width_bits = 64;
    d.entries_per_table = 512;
    d.va_shift = 12 + 9 * lvl;
    d.va_index_bits = 9;
    d.page_span_bytes = std::uint64_t{1} << d.va_shift;
    if (lvl == 0) d.global_bit = kX86Global;
    p.levels.push_back(d);
  }
  return p;
}

PagingProfile make_rv39() {
  PagingProfile p;
  p.isa = Isa::RV39;
  p.global_polarity = GlobalPolarity::SetMeansGlobal;
  p.nonleaf_global_propagates = true;
  p.va_bits = 39;
  for (unsigned lvl = 0; lvl < 3; ++lvl) {
    LevelDesc d;
    d.entry_width_bits = 64;
    d.entries_per_table = 512;
    d.va_shift = 12 + 9 * lvl;
    d.va_index_bits = 9;
    d.page_span_bytes = std::uint64_t{1} << d.va_shift;
    d.global_bit = kRvGlobal;
    p.levels.push_back(d);
  }
  return p;
}

PagingProfile make_armv7() {
  PagingProfile p;
  p.isa = Isa::ARMV7;
  p.global_polarity = GlobalPolarity::ClearMeansGlobal;
  p.nonleaf_global_propagates = false;
  p.va_bits = 32;
  LevelDesc l2;
  l2.entry_width_bits = 32;
  l2.entries_per_table = 256;
  l2.va_shift = 12;
  l2.va_index_bits = 8;
  l2.page_span_bytes = kPageSize;
  l2.global_bit = kArmNotGlobal;
  LevelDesc l1;
  l1.entry_width_bits = 32;
  l1.entries_per_table = 4096;
  l1.va_shift = 20;
  l1.va_index_bits = 12;
  l1.page_span_bytes = std::uint64_t{1} << 20;
  p.levels = {l2, l1};
  return p;
}

void require_level(const PagingProfile& profile, unsigned level) {
  if (level >= profile.level_count())
    throw Fault("level " + std::to_string(level) + " does not exist for " + std::string(isa_name(profile.isa)));
}

bool has(std::uint64_t raw, unsigned n) { return (raw & bit(n)) != 0; }

PhysAddr next_table_pa(const PagingProfile& profile, unsigned level, RawPte pte) {
  if (profile.isa == Isa::ARMV7 && level == 1) return pte.raw & kArmL1TableBaseMask;
  return decode_pte(profile, level, pte).frame << kPageShift;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::X86_64: return "x86_64";
    case Isa::ARMV7: return "armv7";
    case Isa::RV39: return "rv39";
  }
  return "?";
}

Isa parse_isa(std::string_view name) {
  if (name == "x86_64") return Isa::X86_64;
  if (name == "armv7") return Isa::ARMV7;
  if (name == "rv39") return Isa::RV39;
  throw std::invalid_argument("unknown isa '" + std::string(name) + "' (expected x86_64 | armv7 | rv39)");
}

const PagingProfile& PagingProfile::get(Isa isa) {
  static const PagingProfile x86 = make_x86_64();
  static const PagingProfile arm = make_armv7();
  static const PagingProfile rv = make_rv39();
  switch (isa) {
    case Isa::X86_64: return x86;
    case Isa::ARMV7: return arm;
    case Isa::RV39: return rv;
  }
  return x86;
}

const LevelDesc& PagingProfile::level(unsigned n) const {
  require_level(*this, n);
  return levels[n];
}

std::uint64_t PagingProfile::index(unsigned level_no, VirtAddr va) const {
  const auto& d = level(level_no);
  return (va >> d.va_shift) & (d.entries_per_table - 1);
}

RawPte encode_pte(const PagingProfile& profile, unsigned level, const PteView& v) {
  const auto& desc = profile.level(level);
  if (v.global && !desc.global_bit)
    throw Fault("level " + std::to_string(level) + " of " + std::string(isa_name(profile.isa)) + " has no global bit");
  const bool leaf = level == 0;
  std::uint64_t raw = 0;
  switch (profile.isa) {
    case Isa::X86_64: {
      if (v.frame > (kX86FrameMask >> 12)) throw Fault("frame " + to_hex(v.frame) + " overflows x86_64 PTE");
      if (v.present) raw |= bit(kX86Present);
      if (v.writable) raw |= bit(kX86Write);
      if (v.user) raw |= bit(kX86User);
      if (v.global) raw |= bit(kX86Global);
      if (!v.executable) raw |= bit(kX86Nx);
      raw |= v.frame << 12;
      break;
    }
    case Isa::RV39: {
      if (v.frame > kRvPpnMask) throw Fault("frame " + to_hex(v.frame) + " overflows Sv39 PPN");
      if (v.present) raw |= bit(kRvValid);
      if (leaf) {
        raw |= bit(kRvRead);
        if (v.writable) raw |= bit(kRvWrite);
        if (v.executable) raw |= bit(kRvExec);
        if (v.user) raw |= bit(kRvUser);
      }
      if (v.global) raw |= bit(kRvGlobal);
      raw |= v.frame << kRvPpnShift;
      break;
    }
    case Isa::ARMV7: {
      if (v.frame >= kArmFrameLimit) throw Fault("frame " + to_hex(v.frame) + " overflows ARMv7 descriptor");
      if (leaf) {
        if (v.present) raw |= bit(kArmSmallPage) | bit(kArmAp0);
        if (!v.executable) raw |= bit(kArmXn);
        if (v.user) raw |= bit(kArmAp1);
        if (!v.writable) raw |= bit(kArmAp2);
        if (!v.global) raw |= bit(kArmNotGlobal);
      } else if (v.present) {
        raw |= 0b01;
      }
      raw |= v.frame << 12;
      break;
    }
  }
  return RawPte{raw};
}

PteView decode_pte(const PagingProfile& profile, unsigned level, RawPte pte) {
  require_level(profile, level);
  const bool leaf = level == 0;
  const std::uint64_t raw = pte.raw;
  PteView v;
  switch (profile.isa) {
    case Isa::X86_64:
      v.present = has(raw, kX86Present);
      v.writable = has(raw, kX86Write);
      v.user = has(raw, kX86User);
      v.executable = !has(raw, kX86Nx);
      v.global = leaf && has(raw, kX86Global);
      v.frame = (raw & kX86FrameMask) >> 12;
      break;
    case Isa::RV39:
      v.present = has(raw, kRvValid);
      v.writable = leaf && has(raw, kRvWrite);
      v.executable = leaf && has(raw, kRvExec);
      v.user = leaf && has(raw, kRvUser);
      v.global = has(raw, kRvGlobal);
      v.frame = (raw >> kRvPpnShift) & kRvPpnMask;
      break;
    case Isa::ARMV7:
      if (leaf) {
        v.present = has(raw, kArmSmallPage);
        v.executable = !has(raw, kArmXn);
        v.user = has(raw, kArmAp1);
        v.writable = !has(raw, kArmAp2);
        v.global = !has(raw, kArmNotGlobal);
      } else {
        v.present = (raw & 0b11) == 0b01;
        v.writable = false;
        v.user = false;
        v.executable = false;
        v.global = false;
      }
      v.frame = (raw >> 12) & (kArmFrameLimit - 1);
      break;
  }
  return v;
}

PteView table_pointer_view(const PagingProfile& profile, unsigned level, Pfn table_frame) {
  PteView v;
  v.present = true;
  v.frame = table_frame;
  v.global = false;
  if (profile.isa == Isa::X86_64) {
    v.writable = true;
    v.user = true;
    v.executable = true;
  } else {
    v.writable = false;
    v.user = false;
    v.executable = false;
  }
  (void)level;
  return v;
}

WalkOutcome walk(const PagingProfile& profile, PhysAddr root_pa, VirtAddr va, const PhysMem& mem) {
  const auto& root = profile.level(profile.root_level());
  if (root_pa % root.table_bytes() != 0) throw Fault("misaligned root table " + to_hex(root_pa));

  WalkOutcome out;
  PhysAddr table = root_pa;
  bool global = false;
  for (unsigned lvl = profile.root_level() + 1; lvl-- > 0;) {
    const auto& desc = profile.levels[lvl];
    const std::uint64_t idx = profile.index(lvl, va);
    const PhysAddr entry_pa = table + idx * desc.entry_bytes();
    const RawPte raw{mem.read_le(entry_pa, desc.entry_bytes())};
    out.consulted.push_back(PteLocation{lvl, table, idx, entry_pa, raw});
    const PteView view = decode_pte(profile, lvl, raw);
    if (!view.present) {
      out.fault_level = lvl;
      return out;
    }
    if (lvl == 0) {
      global = profile.nonleaf_global_propagates ? (global || view.global) : view.global;
      WalkResult r;
      r.pa = (view.frame << kPageShift) + page_offset(va);
      r.global = global;
      r.level_hit = 0;
      r.leaf = view;
      r.pte_locations = out.consulted;
      out.result = std::move(r);
      return out;
    }
    if (profile.nonleaf_global_propagates) global = global || view.global;
    table = next_table_pa(profile, lvl, raw);
  }
  return out;
}

std::uint64_t global_bit_offset(const PagingProfile& profile, unsigned level, VirtAddr va) {
  const auto& desc = profile.level(level);
  if (!desc.global_bit)
    throw Fault("level " + std::to_string(level) + " of " + std::string(isa_name(profile.isa)) + " has no global bit");
  return std::uint64_t{desc.entry_width_bits} * profile.index(level, va) + *desc.global_bit;
}

std::optional<PhysAddr> find_target_page(const PagingProfile& profile, unsigned level, VirtAddr va,
                                         const VulnMap& vuln_map, const DramGeometry& geometry,
                                         std::span<const PhysAddr> region) {
  if (vuln_map.empty()) return std::nullopt;
  const std::uint64_t offset = global_bit_offset(profile, level, va);
  const std::uint8_t flip_to = profile.global_flip_to();
  for (PhysAddr page : region) {
    if (!page_aligned(page)) throw Fault("candidate page " + to_hex(page) + " is not page aligned");
    const std::uint64_t row = geometry.row_of(page);
    const std::uint64_t in_row = (page - geometry.row_base(row)) * 8 + offset;
    if (vuln_map.contains(VulnerableBit{row, in_row, flip_to})) return page;
  }
  return std::nullopt;
}

}  // namespace gbh
