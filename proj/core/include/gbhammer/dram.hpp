#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "gbhammer/types.hpp"

namespace gbh {

struct DramGeometry {
  std::uint64_t row_size_bytes = 8192;
  std::uint64_t row_count = 2048;
  std::uint64_t refresh_window_ticks = 64;

  std::uint64_t capacity() const { return row_size_bytes * row_count; }
  std::uint64_t row_bits() const { return row_size_bytes * 8; }
  std::uint64_t row_of(PhysAddr pa) const { return pa / row_size_bytes; }
  PhysAddr row_base(std::uint64_t row) const { return row * row_size_bytes; }

  // Throws Fault when the invariants do not hold.
  void validate() const;
};

/// A cell that flips toward `flip_to` once a neighbouring row is hammered
/// past the threshold. Flips are directional: a cell already holding
/// `flip_to` is left alone.
struct VulnerableBit {
  std::uint64_t row = 0;
  std::uint64_t bit_offset_in_row = 0;
  std::uint8_t flip_to = 1;

  auto operator<=>(const VulnerableBit&) const = default;

  std::uint64_t physical_bit(const DramGeometry& g) const {
    return g.row_base(row) * 8 + bit_offset_in_row;
  }
};

using VulnMap = std::set<VulnerableBit>;

struct HammerConfig {
  std::uint64_t threshold = 50000;
  std::uint64_t blast_radius = 1;
};

struct FlipEvent {
  std::uint64_t aggressor_row = 0;
  VulnerableBit bit;
  std::uint64_t physical_bit = 0;  // pa * 8 + bit index within the byte

  PhysAddr byte_address() const { return physical_bit / 8; }
  bool operator==(const FlipEvent&) const = default;
};

/// Deterministic vulnerable-bit map: every row is vulnerable with
/// probability `density` and then gets one cell with a uniform bit offset
/// and flip direction.
VulnMap seed_vulnerable_bits(const DramGeometry& geometry, std::uint64_t seed, double density);

class PhysMem {
 public:
  explicit PhysMem(DramGeometry geometry, HammerConfig hammer = {}, VulnMap vuln_map = {});

  const DramGeometry& geometry() const { return geometry_; }
  const HammerConfig& hammer_config() const { return hammer_; }
  std::uint64_t capacity() const { return geometry_.capacity(); }

  std::vector<std::uint8_t> read(PhysAddr pa, std::size_t len) const;
  void read(PhysAddr pa, std::span<std::uint8_t> out) const;
  void write(PhysAddr pa, std::span<const std::uint8_t> bytes);
  void fill(PhysAddr pa, std::size_t len, std::uint8_t value);

  // Little-endian scalar access, as page-table entries are stored.
  std::uint64_t read_le(PhysAddr pa, unsigned width_bytes) const;
  void write_le(PhysAddr pa, unsigned width_bytes, std::uint64_t value);

  /// One row activation. Once the row's counter reaches the threshold every
  /// vulnerable cell within blast_radius rows (the row itself excluded) that
  /// does not already hold its flip_to value is flipped and reported.
  std::vector<FlipEvent> activate_row(std::uint64_t row);
  std::vector<FlipEvent> hammer_row(std::uint64_t row, std::uint64_t activations);

  void refresh();

  std::uint64_t activations(std::uint64_t row) const;
  std::uint64_t total_activations() const;

  const VulnMap& vuln_map() const { return vuln_map_; }
  void add_vulnerable_bit(const VulnerableBit& bit);

  const std::vector<FlipEvent>& flip_log() const { return flip_log_; }

  bool bit(std::uint64_t physical_bit) const;
  void flip_bit(std::uint64_t physical_bit);

 private:
  void check_range(PhysAddr pa, std::size_t len) const;
  void check_row(std::uint64_t row) const;

  DramGeometry geometry_;
  HammerConfig hammer_;
  std::vector<std::uint8_t> bytes_;
  std::vector<std::uint64_t> counters_;
  VulnMap vuln_map_;
  std::vector<std::vector<VulnerableBit>> vuln_by_row_;
  std::vector<FlipEvent> flip_log_;
};

}  // namespace gbh
