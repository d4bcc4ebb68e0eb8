#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gbhammer/config.hpp"
#include "gbhammer/dram.hpp"
#include "gbhammer/kernel.hpp"
#include "gbhammer/paging.hpp"
#include "gbhammer/tlb.hpp"
#include "gbhammer/trace.hpp"

namespace gbh {

/// Code is modelled as a 16-byte record: the tag "GBHFUNC\0" followed by the
/// little-endian int64 the function returns.
inline constexpr std::size_t kFunctionBlobSize = 16;
std::vector<std::uint8_t> encode_function_blob(std::int64_t return_value);
std::optional<std::int64_t> decode_function_blob(std::span<const std::uint8_t> bytes);

enum class AttackOutcome { NotAttempted, Success, NoTargetPage, HintRefused, FlipMissed };
std::string_view outcome_name(AttackOutcome o);

struct OutputLine {
  std::uint64_t tick = 0;
  std::string actor;
  std::string text;
  bool operator==(const OutputLine&) const = default;
};

struct Verdict {
  bool exploit_success = false;
  std::vector<std::string> victim_outputs;
  std::vector<std::string> attacker_outputs;
  std::uint64_t misdirection_count = 0;
  std::uint64_t misdirected_pages = 0;
  std::uint64_t shared_span_bytes = 0;
};

struct Metrics {
  TlbStats itlb;
  TlbStats dtlb;
  std::uint64_t flip_events = 0;
  std::uint64_t hammer_activations = 0;
  std::uint64_t global_span_bytes = 0;
  std::uint64_t steps_executed = 0;
  std::uint64_t final_tick = 0;
};

struct RunResult {
  ScenarioConfig config;  // effective configuration
  Verdict verdict;
  Metrics metrics;
  std::map<std::string, AttackOutcome> outcomes;  // per attacker process
  std::vector<OutputLine> outputs;
  std::vector<std::string> trace;
  std::vector<FlipEvent> flips;
};

/// State the attacker keeps between HAMMER_SEARCH and HAMMER_TARGET.
struct AttackState {
  VirtAddr region_start = 0;
  std::uint64_t region_pages = 0;
  VirtAddr target_va = 0;
  unsigned level = 0;
  VulnMap observed;
  std::map<VulnerableBit, std::uint64_t> aggressor_of;
  std::optional<VirtAddr> target_page_va;
  PhysAddr target_page_pa = 0;
  std::uint64_t aggressor_row = 0;
  AttackOutcome outcome = AttackOutcome::NotAttempted;
};

struct HammerSearchParams {
  VirtAddr target_va = 0x20000;
  unsigned level = 0;
  std::uint64_t region_pages = 128;
  std::uint64_t activations = 100000;
};

struct HammerTargetParams {
  std::uint64_t activations = 100000;
  std::uint64_t length = kPageSize;  // bytes mapped at the target address
};

/// One deterministic run of a scenario. The model pieces are exposed so tests
/// can drive the attack primitives directly.
class Simulator {
 public:
  explicit Simulator(ScenarioConfig config);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  RunResult run();

  const ScenarioConfig& config() const { return config_; }
  const PagingProfile& profile() const { return profile_; }
  PhysMem& mem() { return mem_; }
  Tlb& tlb() { return tlb_; }
  Kernel& kernel() { return kernel_; }
  Pid pid_of(std::string_view name) const;
  const AttackState* attack_state(Pid pid) const;

  /// Set by the builtin generator: stop as soon as an attacker has allocated
  /// its hammer region.
  void stop_after_region_allocation(bool on) { probe_ = on; }
  bool stopped_early() const { return stopped_; }

  AttackOutcome hammer_search(Pid attacker, const HammerSearchParams& params);
  AttackOutcome hammer_target(Pid attacker, const HammerTargetParams& params);
  AttackOutcome gbhammer_procedure(Pid attacker, const HammerSearchParams& search, const HammerTargetParams& target);

  /// Touch through the MMU with misdirection bookkeeping.
  Translation access(Pid pid, VirtAddr va, AccessKind kind);

 private:
  class Recorder;

  void spawn_all();
  void execute(Pid pid, const Step& step);
  void emit(std::string_view event, TraceFields fields);
  void output(Pid pid, std::string text);
  void watch();
  VirtAddr resolve(Pid pid, const AddrExpr& addr) const;
  void write_virtual(Pid pid, VirtAddr va, std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> read_virtual(Pid pid, VirtAddr va, std::size_t len, bool stop_at_nul);
  std::optional<VirtAddr> map_fixed(Pid pid, VirtAddr va, std::uint64_t length, bool use_static);
  void record_flips(std::span<const FlipEvent> flips);
  void evict_tlb_set(Pid pid, const Step& step);

  ScenarioConfig config_;
  const PagingProfile& profile_;
  PhysMem mem_;
  Tlb tlb_;
  std::unique_ptr<Recorder> recorder_;
  Kernel kernel_;

  std::map<std::string, Pid, std::less<>> pids_;
  std::map<Pid, std::size_t> proc_index_;
  std::map<Pid, std::map<std::string, VirtAddr>> labels_;
  std::map<Pid, AttackState> attacks_;
  std::vector<OutputLine> outputs_;
  std::vector<std::string> trace_;
  std::map<std::string, std::string> last_watch_;
  std::uint64_t tick_ = 0;
  Pid actor_ = 0;
  std::uint64_t misdirections_ = 0;
  std::set<Vpn> misdirected_vpns_;
  std::uint64_t global_span_ = 0;
  std::uint64_t hammer_activations_ = 0;
  bool probe_ = false;
  bool stopped_ = false;
};

RunResult run_scenario(const ScenarioConfig& config);

std::vector<std::string> builtin_names();
bool is_builtin(std::string_view name);
/// Complete builtin scenario for `seed` with overrides applied and one
/// usable vulnerable cell planted inside the attacker's hammer region.
ScenarioConfig builtin_scenario(std::string_view name, std::uint64_t seed,
                                std::span<const std::string> overrides = {});

}  // namespace gbh
