#include "gbhammer/scenario.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <tuple>

namespace gbh {

namespace {

constexpr std::array<std::uint8_t, 8> kBlobTag{'G', 'B', 'H', 'F', 'U', 'N', 'C', 0};

std::string str(std::uint64_t v) { return std::to_string(v); }

std::string quote_if_needed(const std::string& v) {
  if (!v.empty() && v.find_first_of(" =\"\t\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

std::vector<std::uint8_t> hex_bytes(const std::string& hex) {
  std::vector<std::uint8_t> out;
  std::string digits;
  for (char c : hex) {
    if (c == ' ' || c == ':' || c == '_') continue;
    digits += c;
  }
  if (digits.size() % 2 != 0) throw KernelError("hex payload has an odd number of digits");
  for (std::size_t i = 0; i < digits.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoul(digits.substr(i, 2), nullptr, 16)));
  }
  return out;
}

std::vector<std::uint8_t> text_bytes(const std::string& text) {
  std::vector<std::uint8_t> out(text.begin(), text.end());
  out.push_back(0);
  return out;
}

AccessKind access_for(TlbKind kind) { return kind == TlbKind::Instruction ? AccessKind::Exec : AccessKind::Read; }

}  // namespace

std::vector<std::uint8_t> encode_function_blob(std::int64_t return_value) {
  std::vector<std::uint8_t> out(kBlobTag.begin(), kBlobTag.end());
  const auto v = static_cast<std::uint64_t>(return_value);
  for (unsigned i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return out;
}

std::optional<std::int64_t> decode_function_blob(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFunctionBlobSize) return std::nullopt;
  if (!std::equal(kBlobTag.begin(), kBlobTag.end(), bytes.begin())) return std::nullopt;
  std::uint64_t v = 0;
  for (unsigned i = 0; i < 8; ++i) v |= std::uint64_t{bytes[8 + i]} << (8 * i);
  return static_cast<std::int64_t>(v);
}

std::string_view outcome_name(AttackOutcome o) {
  switch (o) {
    case AttackOutcome::NotAttempted: return "NOT_ATTEMPTED";
    case AttackOutcome::Success: return "SUCCESS";
    case AttackOutcome::NoTargetPage: return "NO_TARGET_PAGE";
    case AttackOutcome::HintRefused: return "HINT_REFUSED";
    case AttackOutcome::FlipMissed: return "FLIP_MISSED";
  }
  return "?";
}

class Simulator::Recorder : public TraceSink {
 public:
  explicit Recorder(Simulator& sim) : sim_(sim) {}
  void emit(std::string_view event, TraceFields fields) override { sim_.emit(event, std::move(fields)); }

 private:
  Simulator& sim_;
};

namespace {

VulnMap initial_vuln_map(const ScenarioConfig& c) {
  VulnMap m = seed_vulnerable_bits(c.dram.geometry, c.dram_seed(), c.dram.density);
  m.insert(c.dram.vulnerable_bits.begin(), c.dram.vulnerable_bits.end());
  return m;
}

KernelPolicy policy_for(const ScenarioConfig& c) {
  return KernelPolicy{c.os.respect_mmap_hint, c.os.allow_fixed_static_load, c.os.pic_relocation, c.aslr_seed()};
}

ScenarioConfig validated(ScenarioConfig c) {
  validate_scenario(c);
  return c;
}

}  // namespace

Simulator::Simulator(ScenarioConfig config)
    : config_(validated(std::move(config))),
      profile_(PagingProfile::get(config_.isa)),
      mem_(config_.dram.geometry, config_.dram.hammer, initial_vuln_map(config_)),
      tlb_(config_.tlb),
      recorder_(std::make_unique<Recorder>(*this)),
      kernel_(mem_, tlb_, profile_, policy_for(config_), recorder_.get()) {}

Simulator::~Simulator() = default;

void Simulator::emit(std::string_view event, TraceFields fields) {
  std::string line = "tick=" + str(tick_) + " actor=" + str(actor_) + " event=" + std::string(event);
  for (const auto& [k, v] : fields) line += " " + k + "=" + quote_if_needed(v);
  trace_.push_back(std::move(line));
}

Pid Simulator::pid_of(std::string_view name) const {
  auto it = pids_.find(name);
  if (it == pids_.end()) throw KernelError("no process named '" + std::string(name) + "'");
  return it->second;
}

const AttackState* Simulator::attack_state(Pid pid) const {
  auto it = attacks_.find(pid);
  return it == attacks_.end() ? nullptr : &it->second;
}

void Simulator::output(Pid pid, std::string text) {
  const auto& name = kernel_.process(pid).name;
  emit("output", {{"process", name}, {"text", text}});
  outputs_.push_back(OutputLine{tick_, name, std::move(text)});
}

void Simulator::spawn_all() {
  for (std::size_t i = 0; i < config_.processes.size(); ++i) {
    const auto& pc = config_.processes[i];
    std::vector<Segment> segs;
    for (const auto& sc : pc.segments) {
      Segment seg;
      seg.va = sc.va;
      seg.bytes.assign(sc.pages * kPageSize, 0);
      if (sc.blob) {
        const auto blob = encode_function_blob(*sc.blob);
        for (std::uint64_t p = 0; p < sc.pages; ++p) std::copy(blob.begin(), blob.end(), seg.bytes.begin() + p * kPageSize);
      } else if (sc.text || sc.hex) {
        const auto payload = sc.text ? text_bytes(*sc.text) : hex_bytes(*sc.hex);
        if (payload.size() > seg.bytes.size())
          throw ConfigError("processes[" + str(i) + "].segments", "payload larger than the segment");
        std::copy(payload.begin(), payload.end(), seg.bytes.begin());
      }
      segs.push_back(std::move(seg));
    }
    actor_ = static_cast<Pid>(i + 1);
    const Process& p = kernel_.spawn(pc.name, segs);
    pids_[pc.name] = p.pid;
    proc_index_[p.pid] = i;
  }
}

VirtAddr Simulator::resolve(Pid pid, const AddrExpr& addr) const {
  if (!addr.label) return kernel_.process(pid).program_address(addr.offset);
  const auto& labels = labels_.at(pid);
  auto it = labels.find(*addr.label);
  if (it == labels.end()) throw KernelError("unknown region label '@" + *addr.label + "'");
  return it->second + addr.offset;
}

Translation Simulator::access(Pid pid, VirtAddr va, AccessKind kind) {
  const Translation t = kernel_.touch(pid, va, kind);
  const Process& proc = kernel_.process(pid);
  if (t.serving_asid != proc.asid) {
    const auto it = proc_index_.find(pid);
    const bool victim = it != proc_index_.end() && config_.processes[it->second].role == Role::Victim;
    if (victim) {
      ++misdirections_;
      misdirected_vpns_.insert(vpn_of(va));
    }
    emit("misdirection", {{"pid", str(pid)}, {"va", to_hex(va)}, {"kind", std::string(access_kind_name(kind))},
                          {"serving_asid", str(t.serving_asid)}, {"pa", to_hex(t.pa)}});
  }
  return t;
}

void Simulator::write_virtual(Pid pid, VirtAddr va, std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const VirtAddr cur = va + done;
    const std::size_t n = std::min<std::size_t>(bytes.size() - done, kPageSize - page_offset(cur));
    const Translation t = access(pid, cur, AccessKind::Write);
    mem_.write(t.pa, bytes.subspan(done, n));
    done += n;
  }
}

std::vector<std::uint8_t> Simulator::read_virtual(Pid pid, VirtAddr va, std::size_t len, bool stop_at_nul) {
  std::vector<std::uint8_t> out;
  while (out.size() < len) {
    const VirtAddr cur = va + out.size();
    const std::size_t n = std::min<std::size_t>(len - out.size(), kPageSize - page_offset(cur));
    const Translation t = access(pid, cur, AccessKind::Read);
    const auto chunk = mem_.read(t.pa, n);
    for (auto b : chunk) {
      if (stop_at_nul && b == 0) return out;
      out.push_back(b);
    }
  }
  return out;
}

void Simulator::record_flips(std::span<const FlipEvent> flips) {
  for (const auto& f : flips) {
    emit("flip", {{"aggressor_row", str(f.aggressor_row)}, {"row", str(f.bit.row)},
                  {"bit_in_row", str(f.bit.bit_offset_in_row)}, {"pa", to_hex(f.byte_address())},
                  {"bit", str(f.physical_bit % 8)}, {"to", str(f.bit.flip_to)}});
  }
}

std::optional<VirtAddr> Simulator::map_fixed(Pid pid, VirtAddr va, std::uint64_t length, bool use_static) {
  if (use_static) {
    const std::vector<std::uint8_t> zeros(length, 0);
    return kernel_.load_static(pid, va, zeros);
  }
  const VirtAddr got = kernel_.mmap(pid, va, length, true);
  if (got == va) return va;
  kernel_.munmap(pid, got);
  return std::nullopt;
}

AttackOutcome Simulator::hammer_search(Pid pid, const HammerSearchParams& params) {
  AttackState& st = attacks_[pid];
  st = AttackState{};
  st.target_va = params.target_va;
  st.level = params.level;
  st.region_pages = params.region_pages;
  const auto& geo = mem_.geometry();

  st.region_start = kernel_.mmap(pid, std::nullopt, params.region_pages * kPageSize, true);
  labels_[pid]["R"] = st.region_start;
  emit("hammer_region", {{"pid", str(pid)}, {"va", to_hex(st.region_start)}, {"pages", str(params.region_pages)}});
  if (probe_) {
    stopped_ = true;
    return AttackOutcome::NotAttempted;
  }

  const std::uint8_t pattern = profile_.global_flip_to() == 1 ? 0x00 : 0xFF;
  std::vector<PhysAddr> page_pa(params.region_pages);
  std::map<Pfn, std::size_t> page_of_frame;
  for (std::uint64_t i = 0; i < params.region_pages; ++i) {
    const Translation t = access(pid, st.region_start + i * kPageSize, AccessKind::Write);
    page_pa[i] = t.pa & ~(kPageSize - 1);
    mem_.fill(page_pa[i], kPageSize, pattern);
    page_of_frame[page_pa[i] >> kPageShift] = i;
  }

  const std::uint64_t frames_per_row = geo.row_size_bytes / kPageSize;
  auto row_pages = [&](std::uint64_t row) {
    std::vector<std::size_t> pages;
    for (std::uint64_t f = 0; f < frames_per_row; ++f) {
      auto it = page_of_frame.find((geo.row_base(row) >> kPageShift) + f);
      if (it == page_of_frame.end()) return std::vector<std::size_t>{};
      pages.push_back(it->second);
    }
    return pages;
  };
  auto owned = [&](std::int64_t row) {
    return row >= 0 && static_cast<std::uint64_t>(row) < geo.row_count && !row_pages(row).empty();
  };

  std::set<std::uint64_t> rows;
  for (PhysAddr pa : page_pa) rows.insert(geo.row_of(pa));
  const auto radius = static_cast<std::int64_t>(mem_.hammer_config().blast_radius);

  for (std::uint64_t row : rows) {
    const auto r = static_cast<std::int64_t>(row);
    bool hammerable = owned(r);
    for (std::int64_t d = 1; hammerable && d <= radius; ++d) hammerable = owned(r - d) && owned(r + d);
    if (!hammerable) continue;

    access(pid, st.region_start + row_pages(row).front() * kPageSize, AccessKind::Read);
    record_flips(mem_.hammer_row(row, params.activations));
    hammer_activations_ += params.activations;

    for (std::int64_t d = -radius; d <= radius; ++d) {
      if (d == 0) continue;
      const auto nrow = static_cast<std::uint64_t>(r + d);
      for (std::size_t idx : row_pages(nrow)) {
        const Translation t = access(pid, st.region_start + idx * kPageSize, AccessKind::Read);
        const PhysAddr base = t.pa & ~(kPageSize - 1);
        const auto bytes = mem_.read(base, kPageSize);
        for (std::size_t b = 0; b < bytes.size(); ++b) {
          const std::uint8_t diff = bytes[b] ^ pattern;
          if (diff == 0) continue;
          for (unsigned bit = 0; bit < 8; ++bit) {
            if (!((diff >> bit) & 1)) continue;
            const VulnerableBit vb{nrow, (base - geo.row_base(nrow) + b) * 8 + bit,
                                   static_cast<std::uint8_t>((bytes[b] >> bit) & 1)};
            st.observed.insert(vb);
            st.aggressor_of.emplace(vb, row);
          }
        }
        mem_.fill(base, kPageSize, pattern);
      }
    }
  }
  emit("template", {{"pid", str(pid)}, {"rows", str(rows.size())}, {"observed_bits", str(st.observed.size())}});

  const auto found = find_target_page(profile_, params.level, params.target_va, st.observed, geo, page_pa);
  if (!found) {
    st.outcome = AttackOutcome::NoTargetPage;
    emit("attack_outcome", {{"pid", str(pid)}, {"outcome", std::string(outcome_name(st.outcome))}});
    return st.outcome;
  }
  const std::size_t idx = static_cast<std::size_t>(std::find(page_pa.begin(), page_pa.end(), *found) - page_pa.begin());
  const std::uint64_t offset = global_bit_offset(profile_, params.level, params.target_va);
  const VulnerableBit want{geo.row_of(*found), (*found - geo.row_base(geo.row_of(*found))) * 8 + offset,
                           profile_.global_flip_to()};
  st.target_page_va = st.region_start + idx * kPageSize;
  st.target_page_pa = *found;
  st.aggressor_row = st.aggressor_of.at(want);
  emit("target_page", {{"pid", str(pid)}, {"va", to_hex(*st.target_page_va)}, {"pa", to_hex(*found)},
                       {"offset", str(offset)}, {"aggressor_row", str(st.aggressor_row)}});
  return AttackOutcome::NotAttempted;
}

AttackOutcome Simulator::hammer_target(Pid pid, const HammerTargetParams& params) {
  auto it = attacks_.find(pid);
  if (it == attacks_.end()) throw KernelError("HAMMER_TARGET without a preceding HAMMER_SEARCH");
  AttackState& st = it->second;
  auto finish = [&](AttackOutcome o) {
    st.outcome = o;
    emit("attack_outcome", {{"pid", str(pid)}, {"outcome", std::string(outcome_name(o))}});
    return o;
  };
  if (!st.target_page_va) {
    emit("skip", {{"pid", str(pid)}, {"reason", "no_target_page"}});
    return st.outcome;
  }
  const VirtAddr n = st.target_va;
  const std::uint64_t length = std::max<std::uint64_t>(params.length, kPageSize);

  // Learn whether the kernel honours placement hints before giving up the
  // target page, so a refusal leaves the free list untouched.
  bool use_static = false;
  const VirtAddr probe = kernel_.mmap(pid, n, length, false);
  kernel_.munmap(pid, probe);
  if (probe != n) {
    if (!kernel_.policy().static_placement_allowed()) return finish(AttackOutcome::HintRefused);
    use_static = true;
  }

  if (st.level + 1 < profile_.root_level()) {
    const VirtAddr primer = n ^ (VirtAddr{1} << profile_.level(st.level + 1).va_shift);
    if (!kernel_.process(pid).region_at(primer)) map_fixed(pid, primer, kPageSize, use_static);
  }

  const auto freed = kernel_.munmap(pid, *st.target_page_va, kPageSize);
  emit("target_released", {{"pid", str(pid)}, {"pa", to_hex(st.target_page_pa)},
                           {"top", freed.empty() ? "none" : to_hex(freed.back() << kPageShift)}});

  if (!map_fixed(pid, n, length, use_static)) return finish(AttackOutcome::HintRefused);

  const auto before = kernel_.walk(pid, n);
  bool reused = false;
  for (const auto& loc : before.consulted) {
    if (loc.level == st.level && loc.table_pa == st.target_page_pa) reused = true;
  }
  emit("target_table", {{"pid", str(pid)}, {"level", str(st.level)}, {"reused", reused ? "1" : "0"}});

  const auto& geo = mem_.geometry();
  for (std::uint64_t i = 0; i < st.region_pages; ++i) {
    const VirtAddr va = st.region_start + i * kPageSize;
    const auto w = kernel_.walk(pid, va);
    if (w.page_fault() || geo.row_of(w.result->pa) != st.aggressor_row) continue;
    access(pid, va, AccessKind::Read);
    break;
  }
  record_flips(mem_.hammer_row(st.aggressor_row, params.activations));
  hammer_activations_ += params.activations;

  const auto after = kernel_.walk(pid, n);
  const bool global = !after.page_fault() && after.result->global;
  if (global) global_span_ = std::max(global_span_, profile_.level(st.level).page_span_bytes);
  const AttackOutcome o = finish(global ? AttackOutcome::Success : AttackOutcome::FlipMissed);
  access(pid, n, AccessKind::Read);
  return o;
}

AttackOutcome Simulator::gbhammer_procedure(Pid pid, const HammerSearchParams& search,
                                            const HammerTargetParams& target) {
  hammer_search(pid, search);
  const auto& st = attacks_.at(pid);
  if (stopped_ || !st.target_page_va) return st.outcome;
  return hammer_target(pid, target);
}

void Simulator::evict_tlb_set(Pid pid, const Step& step) {
  const TlbKind kind = step.kind.value_or(TlbKind::Instruction);
  const Process& proc = kernel_.process(pid);
  const VirtAddr target = proc.program_address(*step.target_va);
  std::vector<Vpn> pool;
  for (const auto& [start, region] : proc.regions) {
    for (VirtAddr va = start; va < region.end(); va += kPageSize) pool.push_back(vpn_of(va));
  }
  const auto seq = access_sequence_to_evict(vpn_of(target), tlb_.config(), pool);
  for (Vpn v : seq) access(pid, v << kPageShift, access_for(kind));
  emit("evict_set", {{"pid", str(pid)}, {"kind", std::string(tlb_kind_name(kind))}, {"target", to_hex(target)},
                     {"accesses", str(seq.size())}});
  if (step.retouch.value_or(true)) access(pid, target, access_for(kind));
}

void Simulator::execute(Pid pid, const Step& s) {
  emit("step", {{"action", std::string(action_name(s.action))}});
  switch (s.action) {
    case Action::Mmap: {
      const VirtAddr va = kernel_.mmap(pid, s.hint, *s.length, s.populate.value_or(false));
      if (s.label) labels_[pid][*s.label] = va;
      break;
    }
    case Action::Munmap: kernel_.munmap(pid, resolve(pid, *s.va), s.length.value_or(0)); break;
    case Action::TouchRead: access(pid, resolve(pid, *s.va), AccessKind::Read); break;
    case Action::TouchWrite: access(pid, resolve(pid, *s.va), AccessKind::Write); break;
    case Action::CallFunction: {
      const Translation t = access(pid, resolve(pid, *s.va), AccessKind::Exec);
      const std::size_t n = std::min<std::size_t>(kFunctionBlobSize, kPageSize - page_offset(t.pa));
      const auto value = decode_function_blob(mem_.read(t.pa, n));
      const std::string result = value ? std::to_string(*value) : "CALL_FAULT";
      emit("call", {{"pid", str(pid)}, {"pa", to_hex(t.pa)}, {"result", result}});
      if (s.print) {
        std::string line = *s.print;
        if (auto pos = line.find("{}"); pos != std::string::npos) line.replace(pos, 2, result);
        output(pid, std::move(line));
      }
      break;
    }
    case Action::WriteBytes: {
      const auto bytes = s.text ? text_bytes(*s.text) : hex_bytes(*s.hex);
      write_virtual(pid, resolve(pid, *s.va), bytes);
      break;
    }
    case Action::WriteFunctionBlob: write_virtual(pid, resolve(pid, *s.va), encode_function_blob(*s.value)); break;
    case Action::HammerSearch:
      hammer_search(pid, HammerSearchParams{*s.target_va, s.level.value_or(0), s.region_pages.value_or(128),
                                            s.activations.value_or(100000)});
      break;
    case Action::HammerTarget:
      hammer_target(pid, HammerTargetParams{s.activations.value_or(100000), s.length.value_or(kPageSize)});
      break;
    case Action::EvictTlbSet: evict_tlb_set(pid, s); break;
    case Action::Sleep: emit("sleep", {{"ticks", str(s.ticks.value_or(0))}}); break;
    case Action::PrintRead: {
      const auto data = read_virtual(pid, resolve(pid, *s.va), s.max_len.value_or(64), true);
      const std::string text(data.begin(), data.end());
      const std::string prefix = s.prefix.value_or("");
      output(pid, text.empty() ? prefix : (prefix.empty() ? text : prefix + " " + text));
      break;
    }
    case Action::Print: output(pid, *s.text); break;
  }
}

void Simulator::watch() {
  for (const auto& w : config_.watch) {
    const Pid pid = pid_of(w.actor);
    const Process& proc = kernel_.process(pid);
    const VirtAddr va = proc.program_address(w.va);
    const auto t = kernel_.peek(pid, va, access_for(w.kind));
    std::string state = "unmapped";
    TraceFields fields{{"process", w.actor}, {"va", to_hex(va)}, {"kind", std::string(tlb_kind_name(w.kind))}};
    if (t) {
      const std::string source = !t->tlb_hit ? "walk" : (t->serving_asid == proc.asid ? "own" : "foreign");
      state = to_hex(t->pa) + "/" + source + "/" + str(t->serving_asid);
      fields.emplace_back("pa", to_hex(t->pa));
      fields.emplace_back("source", source);
      fields.emplace_back("serving_asid", str(t->serving_asid));
    } else {
      fields.emplace_back("pa", "unmapped");
    }
    const std::string key = w.actor + "/" + to_hex(w.va) + "/" + std::string(tlb_kind_name(w.kind));
    auto [it, fresh] = last_watch_.emplace(key, state);
    if (!fresh && it->second == state) continue;
    it->second = state;
    emit("watch", std::move(fields));
  }
}

RunResult Simulator::run() {
  tick_ = 0;
  spawn_all();
  actor_ = 0;
  watch();

  struct Scheduled {
    std::uint64_t tick;
    Pid pid;
    Step step;
  };
  std::vector<Scheduled> schedule;
  for (std::size_t i = 0; i < config_.processes.size(); ++i) {
    const Pid pid = pid_of(config_.processes[i].name);
    for (auto& s : expand_script(config_.processes[i].script)) schedule.push_back({s.tick, pid, std::move(s)});
  }
  std::stable_sort(schedule.begin(), schedule.end(),
                   [](const Scheduled& a, const Scheduled& b) { return a.tick < b.tick; });

  const std::uint64_t window = config_.dram.geometry.refresh_window_ticks;
  std::uint64_t epoch = 0;
  std::uint64_t steps = 0;
  Pid running = 0;
  for (const auto& item : schedule) {
    tick_ = item.tick;
    if (item.tick / window != epoch) {
      epoch = item.tick / window;
      actor_ = 0;
      mem_.refresh();
      emit("refresh", {{"window", str(epoch)}});
    }
    actor_ = item.pid;
    if (running != item.pid) {
      emit("context_switch", {{"from", str(running)}, {"to", str(item.pid)}, {"tlb_flush", "0"}});
      running = item.pid;
    }
    Process& proc = kernel_.process(item.pid);
    if (!proc.alive) {
      emit("skip", {{"action", std::string(action_name(item.step.action))}, {"reason", "process_dead"}});
      continue;
    }
    try {
      execute(item.pid, item.step);
    } catch (const PageFault& pf) {
      proc.alive = false;
      emit("segfault", {{"pid", str(item.pid)}, {"va", to_hex(pf.va())}});
      output(item.pid, "Segmentation fault");
    } catch (const KernelError& e) {
      emit("syscall_error", {{"pid", str(item.pid)}, {"message", e.what()}});
    }
    ++steps;
    watch();
    if (stopped_) break;
  }

  RunResult res;
  res.config = config_;
  res.outputs = outputs_;
  res.flips = mem_.flip_log();
  for (std::size_t i = 0; i < config_.processes.size(); ++i) {
    const auto& pc = config_.processes[i];
    if (pc.role != Role::Attacker) continue;
    const auto* st = attack_state(pid_of(pc.name));
    res.outcomes[pc.name] = st ? st->outcome : AttackOutcome::NotAttempted;
  }

  std::map<std::string, Role> roles;
  for (const auto& pc : config_.processes) roles[pc.name] = pc.role;
  for (const auto& line : outputs_) {
    const Role r = roles[line.actor];
    if (r == Role::Victim) res.verdict.victim_outputs.push_back(line.text);
    if (r == Role::Attacker) res.verdict.attacker_outputs.push_back(line.text);
  }
  bool success = !config_.verdict.empty();
  for (const auto& rule : config_.verdict) {
    bool matched = false;
    for (const auto& line : outputs_) {
      if (line.actor != rule.actor) continue;
      if (rule.equals && line.text == *rule.equals) matched = true;
      if (rule.contains && line.text.find(*rule.contains) != std::string::npos) matched = true;
    }
    success = success && matched;
  }
  res.verdict.exploit_success = success;
  res.verdict.misdirection_count = misdirections_;
  res.verdict.misdirected_pages = misdirected_vpns_.size();
  res.verdict.shared_span_bytes = misdirected_vpns_.size() * kPageSize;

  res.metrics.itlb = tlb_.stats(TlbKind::Instruction);
  res.metrics.dtlb = tlb_.stats(TlbKind::Data);
  res.metrics.flip_events = mem_.flip_log().size();
  res.metrics.hammer_activations = hammer_activations_;
  res.metrics.global_span_bytes = global_span_;
  res.metrics.steps_executed = steps;
  res.metrics.final_tick = tick_;

  tick_ = schedule.empty() ? 0 : schedule.back().tick;
  actor_ = 0;
  emit("verdict", {{"exploit_success", success ? "1" : "0"}, {"misdirection_count", str(misdirections_)},
                   {"shared_span_bytes", str(res.verdict.shared_span_bytes)}});
  res.trace = trace_;
  return res;
}

RunResult run_scenario(const ScenarioConfig& config) {
  Simulator sim(config);
  return sim.run();
}

}  // namespace gbh
