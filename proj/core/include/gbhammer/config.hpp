#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gbhammer/dram.hpp"
#include "gbhammer/paging.hpp"
#include "gbhammer/tlb.hpp"

namespace gbh {

inline constexpr int kScenarioFormatVersion = 1;

/// Invalid scenario document; path() names the offending key, e.g.
/// `processes[1].script[3].tick`.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

enum class Action {
  Mmap,
  Munmap,
  TouchRead,
  TouchWrite,
  CallFunction,
  WriteBytes,
  WriteFunctionBlob,
  HammerSearch,
  HammerTarget,
  EvictTlbSet,
  Sleep,
  PrintRead,
  Print,
};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

enum class Role { Victim, Attacker, Bystander };
std::string_view role_name(Role r);

/// Address operand: a literal address, or `@label+offset` naming a region a
/// previous MMAP step labelled.
struct AddrExpr {
  std::optional<std::string> label;
  std::uint64_t offset = 0;

  static AddrExpr literal(VirtAddr va) { return AddrExpr{std::nullopt, va}; }
  std::string to_string() const;
  static AddrExpr parse(std::string_view text);  // throws std::invalid_argument
  bool operator==(const AddrExpr&) const = default;
};

struct Repeat {
  std::uint64_t count = 1;
  std::uint64_t tick_stride = 1;
  std::uint64_t va_stride = 0;
  bool operator==(const Repeat&) const = default;
};

struct Step {
  std::uint64_t tick = 0;
  Action action = Action::Sleep;
  std::optional<AddrExpr> va;
  std::optional<std::uint64_t> hint;
  std::optional<std::uint64_t> length;
  std::optional<bool> populate;
  std::optional<std::string> label;
  std::optional<std::int64_t> value;
  std::optional<std::string> text;
  std::optional<std::string> hex;
  std::optional<std::string> prefix;
  std::optional<std::string> print;
  std::optional<std::uint64_t> ticks;
  std::optional<std::uint64_t> target_va;
  std::optional<unsigned> level;
  std::optional<std::uint64_t> region_pages;
  std::optional<std::uint64_t> activations;
  std::optional<TlbKind> kind;
  std::optional<bool> retouch;
  std::optional<std::uint64_t> max_len;
  std::optional<Repeat> repeat;

  bool operator==(const Step&) const = default;
};

struct SegmentConfig {
  VirtAddr va = 0;
  std::uint64_t pages = 1;
  std::optional<std::int64_t> blob;  // function blob at the start of every page
  std::optional<std::string> text;
  std::optional<std::string> hex;
  bool operator==(const SegmentConfig&) const = default;
};

struct ProcessConfig {
  std::string name;
  Role role = Role::Bystander;
  std::vector<SegmentConfig> segments;
  std::vector<Step> script;
  bool operator==(const ProcessConfig&) const = default;
};

struct DramConfig {
  DramGeometry geometry;
  HammerConfig hammer;
  double density = 0.02;
  std::optional<std::uint64_t> seed;
  std::vector<VulnerableBit> vulnerable_bits;
  bool operator==(const DramConfig& o) const;
};

struct OsConfig {
  bool respect_mmap_hint = true;
  bool allow_fixed_static_load = true;
  bool pic_relocation = false;
  std::optional<std::uint64_t> aslr_seed;
  bool operator==(const OsConfig&) const = default;
};

struct VerdictRule {
  std::string actor;
  std::optional<std::string> equals;
  std::optional<std::string> contains;
  bool operator==(const VerdictRule&) const = default;
};

struct WatchConfig {
  std::string actor;
  VirtAddr va = 0;
  TlbKind kind = TlbKind::Instruction;
  bool operator==(const WatchConfig&) const = default;
};

struct ScenarioConfig {
  int format_version = kScenarioFormatVersion;
  std::string name = "custom";
  std::string description;
  Isa isa = Isa::X86_64;
  std::uint64_t seed = 1;
  DramConfig dram;
  TlbConfig tlb;
  OsConfig os;
  std::vector<ProcessConfig> processes;
  std::vector<VerdictRule> verdict;
  std::vector<WatchConfig> watch;

  std::uint64_t dram_seed() const { return dram.seed.value_or(seed); }
  std::uint64_t aslr_seed() const { return os.aslr_seed.value_or(seed ^ 0x5eeda5105eedull); }
  bool operator==(const ScenarioConfig& o) const;
};

ScenarioConfig parse_scenario(std::string_view json_text);
std::string serialize_scenario(const ScenarioConfig& config);

/// Applies `key=value` (dotted path, array indices as numbers). The value is
/// read as JSON when it parses, otherwise as a string.
void apply_override(ScenarioConfig& config, std::string_view assignment);
void apply_overrides(ScenarioConfig& config, std::span<const std::string> assignments);

/// Semantic checks beyond the schema: tick ordering, action operands,
/// process references. Throws ConfigError.
void validate_scenario(const ScenarioConfig& config);

/// Steps of one process with `repeat` expanded, in tick order.
std::vector<Step> expand_script(const std::vector<Step>& script);

}  // namespace gbh
