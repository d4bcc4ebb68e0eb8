#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gbh {

using PhysAddr = std::uint64_t;
using VirtAddr = std::uint64_t;
using Pfn = std::uint64_t;
using Vpn = std::uint64_t;
using Asid = std::uint32_t;
using Pid = std::uint32_t;

inline constexpr std::uint64_t kPageShift = 12;
inline constexpr std::uint64_t kPageSize = std::uint64_t{1} << kPageShift;

constexpr Vpn vpn_of(VirtAddr va) { return va >> kPageShift; }
constexpr std::uint64_t page_offset(std::uint64_t addr) { return addr & (kPageSize - 1); }
constexpr bool page_aligned(std::uint64_t addr) { return page_offset(addr) == 0; }

/// Raised for out-of-range accesses and other hardware-level misuse
/// (the "fault signal" of the model).
class Fault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the OS model for failed system calls (collisions, exhausted
/// memory, unknown regions).
class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_hex(std::uint64_t value);

}  // namespace gbh
