#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gbhammer/types.hpp"

namespace gbh {

enum class TlbKind { Instruction, Data };
enum class Replacement { Lru, Fifo };

std::string_view tlb_kind_name(TlbKind kind);
std::string_view replacement_name(Replacement r);
Replacement parse_replacement(std::string_view name);  // throws std::invalid_argument

struct TlbEntry {
  Vpn vpn = 0;
  Pfn ppn = 0;
  Asid asid = 0;
  bool global = false;
  TlbKind kind = TlbKind::Data;

  bool operator==(const TlbEntry&) const = default;
};

struct TlbConfig {
  std::size_t entries_per_kind = 64;
  Replacement replacement = Replacement::Lru;
  bool honor_global = true;  // PGE analogue
};

struct TlbStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

/// Fully associative split iTLB/dTLB. Entries are tagged with the ASID that
/// created them; a lookup matches an entry of the current ASID first and
/// otherwise any global entry, the latter only while honor_global is set.
class Tlb {
 public:
  explicit Tlb(TlbConfig config = {});

  const TlbConfig& config() const { return config_; }

  std::optional<TlbEntry> lookup(TlbKind kind, Vpn vpn, Asid current_asid);
  /// Same match rule as lookup() without touching recency or statistics.
  std::optional<TlbEntry> peek(TlbKind kind, Vpn vpn, Asid current_asid) const;

  /// Returns the entry displaced by capacity pressure, if any. An entry with
  /// the same (kind, vpn, asid) is replaced in place.
  std::optional<TlbEntry> insert(const TlbEntry& entry);

  std::size_t flush_all(bool keep_global);
  std::size_t flush_asid(Asid asid);
  std::size_t flush_page(Vpn vpn);
  /// INVLPG-style invalidation: entries of `asid` for vpn plus global ones.
  std::size_t invalidate_page(Vpn vpn, Asid asid);

  std::size_t occupancy(TlbKind kind) const;
  std::vector<TlbEntry> entries(TlbKind kind) const;  // in slot order
  const TlbStats& stats(TlbKind kind) const { return stats_[slot(kind)]; }

 private:
  struct Slot {
    TlbEntry entry;
    std::uint64_t stamp = 0;  // insertion time (FIFO) or last use (LRU)
  };

  static std::size_t slot(TlbKind kind) { return kind == TlbKind::Instruction ? 0 : 1; }
  std::optional<std::size_t> find_match(TlbKind kind, Vpn vpn, Asid asid) const;
  template <typename Pred>
  std::size_t erase_if(Pred pred);

  TlbConfig config_;
  std::array<std::vector<Slot>, 2> sets_;
  std::array<TlbStats, 2> stats_{};
  std::uint64_t clock_ = 0;
};

/// Distinct vpns (never `target`) whose accesses, in order, are guaranteed to
/// evict `target` from a fully associative TLB under the configured policy.
/// Candidates are taken upward from `first_candidate`.
std::vector<Vpn> access_sequence_to_evict(Vpn target, const TlbConfig& config, Vpn first_candidate = 0);
/// Same guarantee, drawing the candidates from `pool` in order. Throws
/// std::invalid_argument when the pool holds too few distinct pages.
std::vector<Vpn> access_sequence_to_evict(Vpn target, const TlbConfig& config, std::span<const Vpn> pool);

}  // namespace gbh
