#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbhammer/dram.hpp"
#include "gbhammer/types.hpp"

namespace gbh {

enum class Isa { X86_64, ARMV7, RV39 };
enum class GlobalPolarity { SetMeansGlobal, ClearMeansGlobal };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);  // throws std::invalid_argument

/// Geometry of one translation level. Level 0 is the leaf; higher indices
/// are closer to the root.
struct LevelDesc {
  unsigned entry_width_bits = 64;
  std::uint64_t entries_per_table = 512;
  unsigned va_shift = 12;       // lowest VA bit used as this level's index
  unsigned va_index_bits = 9;   // number of VA bits in the index
  std::uint64_t page_span_bytes = kPageSize;  // VA range covered by one entry
  std::optional<unsigned> global_bit;

  unsigned entry_bytes() const { return entry_width_bits / 8; }
  std::uint64_t table_bytes() const { return entries_per_table * entry_bytes(); }
};

struct PagingProfile {
  Isa isa = Isa::X86_64;
  std::vector<LevelDesc> levels;  // index = level number, 0 = leaf
  GlobalPolarity global_polarity = GlobalPolarity::SetMeansGlobal;
  bool nonleaf_global_propagates = false;
  unsigned va_bits = 48;

  static const PagingProfile& get(Isa isa);

  unsigned level_count() const { return static_cast<unsigned>(levels.size()); }
  unsigned root_level() const { return level_count() - 1; }
  const LevelDesc& level(unsigned n) const;
  std::uint64_t index(unsigned level_no, VirtAddr va) const;
  /// Flip direction a hammered cell needs in order to make an entry global.
  std::uint8_t global_flip_to() const { return global_polarity == GlobalPolarity::SetMeansGlobal ? 1 : 0; }
  VirtAddr va_mask() const { return va_bits >= 64 ? ~VirtAddr{0} : (VirtAddr{1} << va_bits) - 1; }
};

struct PteView {
  bool present = false;
  bool writable = false;
  bool user = false;
  bool executable = true;
  bool global = false;  // effective: already accounts for polarity
  Pfn frame = 0;

  bool operator==(const PteView&) const = default;
};

struct RawPte {
  std::uint64_t raw = 0;
  bool operator==(const RawPte&) const = default;
};

RawPte encode_pte(const PagingProfile& profile, unsigned level, const PteView& view);
PteView decode_pte(const PagingProfile& profile, unsigned level, RawPte pte);

/// View used by the OS for a pointer to a lower-level table.
PteView table_pointer_view(const PagingProfile& profile, unsigned level, Pfn table_frame);

struct PteLocation {
  unsigned level = 0;
  PhysAddr table_pa = 0;
  std::uint64_t index = 0;
  PhysAddr entry_pa = 0;
  RawPte raw;

  // Bit address of the entry's first bit in physical memory.
  std::uint64_t entry_bit() const { return entry_pa * 8; }
};

struct WalkResult {
  PhysAddr pa = 0;
  bool global = false;
  unsigned level_hit = 0;
  PteView leaf;
  std::vector<PteLocation> pte_locations;  // root first
};

/// Walk outcome: a translation, or the level whose entry was not present.
struct WalkOutcome {
  std::optional<WalkResult> result;
  unsigned fault_level = 0;
  std::vector<PteLocation> consulted;

  bool page_fault() const { return !result.has_value(); }
};

/// Root tables must be aligned to the root table size; misaligned roots and
/// out-of-range entries raise Fault.
WalkOutcome walk(const PagingProfile& profile, PhysAddr root_pa, VirtAddr va, const PhysMem& mem);

/// Bit (counted from the table page's least-significant bit) holding the
/// global flag of the entry that translates `va` at `level`.
std::uint64_t global_bit_offset(const PagingProfile& profile, unsigned level, VirtAddr va);

/// First candidate page holding a vulnerable cell at global_bit_offset with a
/// flip direction that makes the entry global.
std::optional<PhysAddr> find_target_page(const PagingProfile& profile, unsigned level, VirtAddr va,
                                         const VulnMap& vuln_map, const DramGeometry& geometry,
                                         std::span<const PhysAddr> region);

}  // namespace gbh
