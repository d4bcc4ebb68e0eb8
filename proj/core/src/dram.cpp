#include "gbhammer/dram.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

namespace gbh {

std::string to_hex(std::uint64_t value) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(value));
  return buf;
}

void DramGeometry::validate() const {
  if (row_size_bytes == 0 || (row_size_bytes & (row_size_bytes - 1)) != 0)
    throw Fault("dram.row_size_bytes must be a power of two");
  if (row_size_bytes % kPageSize != 0)
    throw Fault("dram.row_size_bytes must be a multiple of the page size");
  if (row_count == 0) throw Fault("dram.row_count must be positive");
  if (refresh_window_ticks == 0) throw Fault("dram.refresh_window_ticks must be positive");
}

VulnMap seed_vulnerable_bits(const DramGeometry& geometry, std::uint64_t seed, double density) {
  if (!(density >= 0.0 && density <= 1.0)) throw Fault("density must lie in [0, 1]");
  VulnMap map;
  if (density == 0.0) return map;
  // mt19937_64 output is fixed by the standard; the derived draws below avoid
  // the implementation-defined distribution classes.
  std::mt19937_64 rng(seed);
  const std::uint64_t bits = geometry.row_bits();
  for (std::uint64_t row = 0; row < geometry.row_count; ++row) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const std::uint64_t offset = rng() % bits;
    const auto dir = static_cast<std::uint8_t>(rng() & 1);
    if (u < density) map.insert(VulnerableBit{row, offset, dir});
  }
  return map;
}

PhysMem::PhysMem(DramGeometry geometry, HammerConfig hammer, VulnMap vuln_map)
    : geometry_(geometry), hammer_(hammer) {
  geometry_.validate();
  if (hammer_.threshold == 0) throw Fault("dram.threshold must be positive");
  bytes_.assign(geometry_.capacity(), 0);
  counters_.assign(geometry_.row_count, 0);
  vuln_by_row_.resize(geometry_.row_count);
  for (const auto& b : vuln_map) add_vulnerable_bit(b);
}

void PhysMem::add_vulnerable_bit(const VulnerableBit& bit) {
  check_row(bit.row);
  if (bit.bit_offset_in_row >= geometry_.row_bits()) throw Fault("vulnerable bit offset outside its row");
  if (bit.flip_to > 1) throw Fault("flip_to must be 0 or 1");
  if (vuln_map_.insert(bit).second) vuln_by_row_[bit.row].push_back(bit);
}

void PhysMem::check_range(PhysAddr pa, std::size_t len) const {
  if (pa > capacity() || len > capacity() - pa)
    throw Fault("physical access out of range: " + to_hex(pa) + "+" + std::to_string(len));
}

void PhysMem::check_row(std::uint64_t row) const {
  if (row >= geometry_.row_count) throw Fault("row out of range: " + std::to_string(row));
}

std::vector<std::uint8_t> PhysMem::read(PhysAddr pa, std::size_t len) const {
  std::vector<std::uint8_t> out(len);
  read(pa, out);
  return out;
}

void PhysMem::read(PhysAddr pa, std::span<std::uint8_t> out) const {
  check_range(pa, out.size());
  std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pa), out.size(), out.begin());
}

void PhysMem::write(PhysAddr pa, std::span<const std::uint8_t> bytes) {
  check_range(pa, bytes.size());
  std::copy(bytes.begin(), bytes.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(pa));
}

void PhysMem::fill(PhysAddr pa, std::size_t len, std::uint8_t value) {
  check_range(pa, len);
  std::fill_n(bytes_.begin() + static_cast<std::ptrdiff_t>(pa), len, value);
}

std::uint64_t PhysMem::read_le(PhysAddr pa, unsigned width_bytes) const {
  check_range(pa, width_bytes);
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width_bytes; ++i) v |= std::uint64_t{bytes_[pa + i]} << (8 * i);
  return v;
}

void PhysMem::write_le(PhysAddr pa, unsigned width_bytes, std::uint64_t value) {
  check_range(pa, width_bytes);
  for (unsigned i = 0; i < width_bytes; ++i) bytes_[pa + i] = static_cast<std::uint8_t>(value >> (8 * i));
}

bool PhysMem::bit(std::uint64_t physical_bit) const {
  check_range(physical_bit / 8, 1);
  return (bytes_[physical_bit / 8] >> (physical_bit % 8)) & 1;
}

void PhysMem::flip_bit(std::uint64_t physical_bit) {
  check_range(physical_bit / 8, 1);
  bytes_[physical_bit / 8] ^= static_cast<std::uint8_t>(1u << (physical_bit % 8));
}

std::vector<FlipEvent> PhysMem::activate_row(std::uint64_t row) {
  check_row(row);
  std::vector<FlipEvent> events;
  auto& counter = counters_[row];
  if (counter < hammer_.threshold) ++counter;
  if (counter < hammer_.threshold) return events;

  const std::uint64_t radius = hammer_.blast_radius;
  const std::uint64_t lo = row >= radius ? row - radius : 0;
  const std::uint64_t hi = std::min(geometry_.row_count - 1, row + radius);
  for (std::uint64_t r = lo; r <= hi; ++r) {
    if (r == row) continue;
    for (const auto& vb : vuln_by_row_[r]) {
      const std::uint64_t pbit = vb.physical_bit(geometry_);
      if (bit(pbit) == (vb.flip_to != 0)) continue;
      flip_bit(pbit);
      FlipEvent ev{row, vb, pbit};
      flip_log_.push_back(ev);
      events.push_back(ev);
    }
  }
  return events;
}

std::vector<FlipEvent> PhysMem::hammer_row(std::uint64_t row, std::uint64_t activations) {
  check_row(row);
  if (activations == 0) return {};
  // Activations past the threshold are idempotent, so the run collapses to
  // bringing the counter up to one below it and a single final activation.
  auto& counter = counters_[row];
  const std::uint64_t room = hammer_.threshold > counter + 1 ? hammer_.threshold - 1 - counter : 0;
  counter += std::min(activations - 1, room);
  return activate_row(row);
}

void PhysMem::refresh() { std::fill(counters_.begin(), counters_.end(), 0); }

std::uint64_t PhysMem::activations(std::uint64_t row) const {
  check_row(row);
  return counters_[row];
}

std::uint64_t PhysMem::total_activations() const {
  std::uint64_t sum = 0;
  for (auto c : counters_) sum += c;
  return sum;
}

}  // namespace gbh
