#include <algorithm>
#include <random>

#include "gbhammer/scenario.hpp"

namespace gbh {

namespace {

Step step(std::uint64_t tick, Action action) {
  Step s;
  s.tick = tick;
  s.action = action;
  return s;
}

Step sleep_for(std::uint64_t tick, std::uint64_t ticks) {
  Step s = step(tick, Action::Sleep);
  s.ticks = ticks;
  return s;
}

Step print(std::uint64_t tick, std::string text) {
  Step s = step(tick, Action::Print);
  s.text = std::move(text);
  return s;
}

Step call(std::uint64_t tick, VirtAddr va, std::optional<std::string> print_template = std::nullopt) {
  Step s = step(tick, Action::CallFunction);
  s.va = AddrExpr::literal(va);
  s.print = std::move(print_template);
  return s;
}

Step hammer_search(std::uint64_t tick, VirtAddr target, unsigned level) {
  Step s = step(tick, Action::HammerSearch);
  s.target_va = target;
  s.level = level;
  s.region_pages = 128;
  return s;
}

Step write_blob(std::uint64_t tick, VirtAddr va, std::int64_t value) {
  Step s = step(tick, Action::WriteFunctionBlob);
  s.va = AddrExpr::literal(va);
  s.value = value;
  return s;
}

Step print_read(std::uint64_t tick, VirtAddr va, std::string prefix, std::uint64_t count) {
  Step s = step(tick, Action::PrintRead);
  s.va = AddrExpr::literal(va);
  s.prefix = std::move(prefix);
  if (count > 1) s.repeat = Repeat{count, 1, 0};
  return s;
}

ScenarioConfig base(std::string name, std::string description, std::uint64_t seed) {
  ScenarioConfig c;
  c.name = std::move(name);
  c.description = std::move(description);
  c.seed = seed;
  return c;
}

ProcessConfig process(std::string name, Role role) {
  ProcessConfig p;
  p.name = std::move(name);
  p.role = role;
  return p;
}

ScenarioConfig binary_exec(std::uint64_t seed) {
  auto c = base("binary_exec", "Attacker shares a global instruction translation of 0x20000 and runs its own function.", seed);
  auto victim = process("victim", Role::Victim);
  victim.segments.push_back(SegmentConfig{0x20000, 1, 1, std::nullopt, std::nullopt});
  victim.script = {sleep_for(0, 5), print(5, "This is victim."), print(6, "Expected output: 1"),
                   call(7, 0x20000, "Actual output: {}")};
  auto attacker = process("attacker", Role::Attacker);
  attacker.script = {hammer_search(1, 0x20000, 0), step(2, Action::HammerTarget), write_blob(3, 0x20000, 2),
                     call(4, 0x20000)};
  c.processes = {victim, attacker};
  c.verdict = {VerdictRule{"victim", std::string("Actual output: 2"), std::nullopt}};
  c.watch = {WatchConfig{"victim", 0x20000, TlbKind::Instruction}, WatchConfig{"attacker", 0x20000, TlbKind::Instruction}};
  return c;
}

ScenarioConfig data_snoop(std::uint64_t seed) {
  auto c = base("data_snoop", "Attacker shares a global data translation of 0x20000 and reads what the victim writes there.", seed);
  auto victim = process("victim", Role::Victim);
  victim.segments.push_back(SegmentConfig{0x20000, 1, std::nullopt, std::nullopt, std::nullopt});
  Step write = step(5, Action::WriteBytes);
  write.va = AddrExpr::literal(0x20000);
  write.text = "This is victim's data";
  victim.script = {sleep_for(0, 5), write};
  auto attacker = process("attacker", Role::Attacker);
  attacker.script = {hammer_search(1, 0x20000, 0), step(2, Action::HammerTarget),
                     print_read(3, 0x20000, "This is attacker", 2), print_read(6, 0x20000, "This is attacker", 4)};
  c.processes = {victim, attacker};
  c.verdict = {VerdictRule{"attacker", std::string("This is attacker This is victim's data"), std::nullopt}};
  c.watch = {WatchConfig{"victim", 0x20000, TlbKind::Data}, WatchConfig{"attacker", 0x20000, TlbKind::Data}};
  return c;
}

ScenarioConfig victim_loop(std::uint64_t seed, bool evict) {
  auto c = base(evict ? "victim_loop" : "victim_loop_no_evict",
                evict ? "Victim calls 0x20000 in a loop; the attacker evicts the victim's own entry to take over."
                      : "Victim calls 0x20000 in a loop; without eviction its own entry keeps winning.",
                seed);
  auto victim = process("victim", Role::Victim);
  victim.segments.push_back(SegmentConfig{0x20000, 1, 1, std::nullopt, std::nullopt});
  Step loop = call(0, 0x20000, "Actual output: {}");
  loop.repeat = Repeat{12, 2, 0};
  victim.script = {loop};
  auto attacker = process("attacker", Role::Attacker);
  attacker.script = {hammer_search(1, 0x20000, 0), step(3, Action::HammerTarget), write_blob(5, 0x20000, 2),
                     call(7, 0x20000)};
  if (evict) {
    Step ev = step(9, Action::EvictTlbSet);
    ev.target_va = 0x20000;
    ev.kind = TlbKind::Instruction;
    ev.retouch = true;
    attacker.script.push_back(ev);
  }
  c.processes = {victim, attacker};
  c.verdict = {VerdictRule{"victim", std::string("Actual output: 2"), std::nullopt}};
  c.watch = {WatchConfig{"victim", 0x20000, TlbKind::Instruction}};
  return c;
}

ScenarioConfig riscv_span(std::uint64_t seed) {
  auto c = base("riscv_span", "Sv39: a flipped G bit in a level-1 entry shares a whole 2 MiB range with the victim.", seed);
  c.isa = Isa::RV39;
  constexpr VirtAddr kBase = 0x200000;
  constexpr std::uint64_t kPages = 512;
  auto victim = process("victim", Role::Victim);
  victim.segments.push_back(SegmentConfig{kBase, kPages, 1, std::nullopt, std::nullopt});
  Step vcall = call(1001, kBase, "Actual output: {}");
  vcall.repeat = Repeat{kPages, 2, kPageSize};
  victim.script = {sleep_for(0, 1000), vcall};
  auto attacker = process("attacker", Role::Attacker);
  Step target = step(2, Action::HammerTarget);
  target.length = kPages * kPageSize;
  Step blobs = write_blob(3, kBase, 2);
  blobs.repeat = Repeat{kPages, 1, kPageSize};
  Step acall = call(1000, kBase);
  acall.repeat = Repeat{kPages, 2, kPageSize};
  attacker.script = {hammer_search(1, kBase, 1), target, blobs, acall};
  c.processes = {victim, attacker};
  c.verdict = {VerdictRule{"victim", std::string("Actual output: 2"), std::nullopt}};
  c.watch = {WatchConfig{"victim", kBase, TlbKind::Instruction},
             WatchConfig{"victim", kBase + (kPages - 1) * kPageSize, TlbKind::Instruction}};
  return c;
}

/// Puts one cell into the attacker's hammer region whose position and
/// direction make it usable as a global bit for the scripted target, so
/// every seed has at least one exploitable page.
void plant_vulnerable_bit(ScenarioConfig& c) {
  std::optional<std::size_t> attacker;
  const Step* search = nullptr;
  for (std::size_t i = 0; i < c.processes.size() && !search; ++i) {
    for (const auto& s : c.processes[i].script) {
      if (s.action == Action::HammerSearch) {
        attacker = i;
        search = &s;
        break;
      }
    }
  }
  if (!search) return;

  Simulator probe(c);
  probe.stop_after_region_allocation(true);
  probe.run();
  const Pid pid = probe.pid_of(c.processes[*attacker].name);
  const AttackState* st = probe.attack_state(pid);
  if (!st || st->region_pages == 0) return;

  const auto& geo = c.dram.geometry;
  std::vector<PhysAddr> pages;
  std::map<std::uint64_t, std::uint64_t> frames_in_row;
  for (std::uint64_t i = 0; i < st->region_pages; ++i) {
    const auto w = probe.kernel().walk(pid, st->region_start + i * kPageSize);
    if (w.page_fault()) return;
    pages.push_back(w.result->pa);
    ++frames_in_row[geo.row_of(w.result->pa)];
  }
  const std::uint64_t full = geo.row_size_bytes / kPageSize;
  const auto span = static_cast<std::int64_t>(2 * c.dram.hammer.blast_radius);
  auto owned = [&](std::int64_t row) {
    auto it = frames_in_row.find(static_cast<std::uint64_t>(row));
    return row >= 0 && it != frames_in_row.end() && it->second == full;
  };
  std::vector<PhysAddr> candidates;
  for (PhysAddr pa : pages) {
    const auto row = static_cast<std::int64_t>(geo.row_of(pa));
    bool ok = true;
    for (std::int64_t d = -span; d <= span && ok; ++d) ok = owned(row + d);
    if (ok) candidates.push_back(pa);
  }
  if (candidates.empty()) return;

  std::mt19937_64 rng(c.seed ^ 0xC0FFEE5EED5ull);
  const PhysAddr pa = candidates[rng() % candidates.size()];
  const auto& profile = PagingProfile::get(c.isa);
  const std::uint64_t row = geo.row_of(pa);
  const VulnerableBit bit{row, (pa - geo.row_base(row)) * 8 + global_bit_offset(profile, search->level.value_or(0), *search->target_va),
                          profile.global_flip_to()};
  if (std::find(c.dram.vulnerable_bits.begin(), c.dram.vulnerable_bits.end(), bit) == c.dram.vulnerable_bits.end())
    c.dram.vulnerable_bits.push_back(bit);
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"binary_exec", "data_snoop", "victim_loop", "victim_loop_no_evict", "riscv_span"};
}

bool is_builtin(std::string_view name) {
  const auto names = builtin_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

ScenarioConfig builtin_scenario(std::string_view name, std::uint64_t seed, std::span<const std::string> overrides) {
  ScenarioConfig c;
  if (name == "binary_exec") c = binary_exec(seed);
  else if (name == "data_snoop") c = data_snoop(seed);
  else if (name == "victim_loop") c = victim_loop(seed, true);
  else if (name == "victim_loop_no_evict") c = victim_loop(seed, false);
  else if (name == "riscv_span") c = riscv_span(seed);
  else {
    std::string valid;
    for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("", "unknown builtin scenario '" + std::string(name) + "' (valid: " + valid + ")");
  }
  validate_scenario(c);
  apply_overrides(c, overrides);
  plant_vulnerable_bit(c);
  return c;
}

}  // namespace gbh
