#include "gbhammer/tlb.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

namespace gbh {

std::string_view tlb_kind_name(TlbKind kind) { return kind == TlbKind::Instruction ? "itlb" : "dtlb"; }

std::string_view replacement_name(Replacement r) { return r == Replacement::Lru ? "lru" : "fifo"; }

Replacement parse_replacement(std::string_view name) {
  if (name == "lru" || name == "LRU") return Replacement::Lru;
  if (name == "fifo" || name == "FIFO") return Replacement::Fifo;
  throw std::invalid_argument("unknown replacement policy '" + std::string(name) + "' (expected lru | fifo)");
}

Tlb::Tlb(TlbConfig config) : config_(config) {
  if (config_.entries_per_kind == 0) throw Fault("tlb.entries must be at least 1");
  for (auto& s : sets_) s.reserve(config_.entries_per_kind);
}

std::optional<std::size_t> Tlb::find_match(TlbKind kind, Vpn vpn, Asid asid) const {
  const auto& set = sets_[slot(kind)];
  std::optional<std::size_t> global_hit;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& e = set[i].entry;
    if (e.vpn != vpn) continue;
    if (e.asid == asid) return i;
    if (e.global && config_.honor_global) {
      if (!global_hit || set[i].stamp > set[*global_hit].stamp) global_hit = i;
    }
  }
  return global_hit;
}

std::optional<TlbEntry> Tlb::lookup(TlbKind kind, Vpn vpn, Asid current_asid) {
  auto& stats = stats_[slot(kind)];
  const auto idx = find_match(kind, vpn, current_asid);
  if (!idx) {
    ++stats.misses;
    return std::nullopt;
  }
  ++stats.hits;
  auto& s = sets_[slot(kind)][*idx];
  if (config_.replacement == Replacement::Lru) s.stamp = ++clock_;
  return s.entry;
}

std::optional<TlbEntry> Tlb::peek(TlbKind kind, Vpn vpn, Asid current_asid) const {
  const auto idx = find_match(kind, vpn, current_asid);
  if (!idx) return std::nullopt;
  return sets_[slot(kind)][*idx].entry;
}

std::optional<TlbEntry> Tlb::insert(const TlbEntry& entry) {
  auto& set = sets_[slot(entry.kind)];
  const std::uint64_t now = ++clock_;
  for (auto& s : set) {
    if (s.entry.vpn == entry.vpn && s.entry.asid == entry.asid) {
      s.entry = entry;
      s.stamp = now;
      return std::nullopt;
    }
  }
  if (set.size() < config_.entries_per_kind) {
    set.push_back(Slot{entry, now});
    return std::nullopt;
  }
  auto victim = std::min_element(set.begin(), set.end(),
                                 [](const Slot& a, const Slot& b) { return a.stamp < b.stamp; });
  TlbEntry evicted = victim->entry;
  *victim = Slot{entry, now};
  return evicted;
}

template <typename Pred>
std::size_t Tlb::erase_if(Pred pred) {
  std::size_t removed = 0;
  for (auto& set : sets_) {
    const auto before = set.size();
    std::erase_if(set, [&](const Slot& s) { return pred(s.entry); });
    removed += before - set.size();
  }
  return removed;
}

std::size_t Tlb::flush_all(bool keep_global) {
  return erase_if([&](const TlbEntry& e) { return !(keep_global && e.global); });
}

std::size_t Tlb::flush_asid(Asid asid) {
  return erase_if([&](const TlbEntry& e) { return e.asid == asid; });
}

std::size_t Tlb::flush_page(Vpn vpn) {
  return erase_if([&](const TlbEntry& e) { return e.vpn == vpn; });
}

std::size_t Tlb::invalidate_page(Vpn vpn, Asid asid) {
  return erase_if([&](const TlbEntry& e) { return e.vpn == vpn && (e.asid == asid || e.global); });
}

std::size_t Tlb::occupancy(TlbKind kind) const { return sets_[slot(kind)].size(); }

std::vector<TlbEntry> Tlb::entries(TlbKind kind) const {
  std::vector<TlbEntry> out;
  for (const auto& s : sets_[slot(kind)]) out.push_back(s.entry);
  return out;
}

namespace {

std::size_t eviction_accesses(const TlbConfig& config) {
  return config.replacement == Replacement::Lru ? config.entries_per_kind : 2 * config.entries_per_kind;
}

}  // namespace

std::vector<Vpn> access_sequence_to_evict(Vpn target, const TlbConfig& config, Vpn first_candidate) {
  // LRU: after touching `capacity` distinct other pages they are exactly the
  // resident set. FIFO ignores hits, so up to `capacity` of the candidates may
  // already be resident; twice the capacity guarantees `capacity` insertions.
  const std::size_t want = eviction_accesses(config);
  std::vector<Vpn> seq;
  seq.reserve(want);
  for (Vpn v = first_candidate; seq.size() < want; ++v) {
    if (v != target) seq.push_back(v);
  }
  return seq;
}

std::vector<Vpn> access_sequence_to_evict(Vpn target, const TlbConfig& config, std::span<const Vpn> pool) {
  const std::size_t want = eviction_accesses(config);
  std::vector<Vpn> seq;
  std::set<Vpn> seen{target};
  for (Vpn v : pool) {
    if (seq.size() == want) break;
    if (seen.insert(v).second) seq.push_back(v);
  }
  if (seq.size() < want)
    throw std::invalid_argument("eviction needs " + std::to_string(want) + " distinct pages, pool has " +
                                std::to_string(seq.size()));
  return seq;
}

}  // namespace gbh
