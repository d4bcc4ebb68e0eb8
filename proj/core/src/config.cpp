#include "gbhammer/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <map>
#include <set>

#include "json.hpp"

namespace gbh {

using Json = nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Action, std::string_view>, 13> kActions{{
    {Action::Mmap, "MMAP"},
    {Action::Munmap, "MUNMAP"},
    {Action::TouchRead, "TOUCH_READ"},
    {Action::TouchWrite, "TOUCH_WRITE"},
    {Action::CallFunction, "CALL_FUNCTION"},
    {Action::WriteBytes, "WRITE_BYTES"},
    {Action::WriteFunctionBlob, "WRITE_FUNCTION_BLOB"},
    {Action::HammerSearch, "HAMMER_SEARCH"},
    {Action::HammerTarget, "HAMMER_TARGET"},
    {Action::EvictTlbSet, "EVICT_TLB_SET"},
    {Action::Sleep, "SLEEP"},
    {Action::PrintRead, "PRINT_READ"},
    {Action::Print, "PRINT"},
}};

std::string join_path(const std::string& base, std::string_view key) {
  return base.empty() ? std::string(key) : base + "." + std::string(key);
}

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

std::optional<std::uint64_t> parse_u64_text(std::string_view s) {
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Schema-checking view of one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(std::string_view key) const { return j_.contains(key); }

  const Json* get(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(std::string_view key) const { return join_path(path_, key); }

  std::uint64_t u64(std::string_view key, std::uint64_t fallback) { return opt_u64(key).value_or(fallback); }

  std::optional<std::uint64_t> opt_u64(std::string_view key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    if (v->is_number_integer()) {
      if (v->get<std::int64_t>() < 0) throw ConfigError(path(key), "must not be negative");
      return v->get<std::uint64_t>();
    }
    if (v->is_string()) {
      if (auto p = parse_u64_text(v->get<std::string>())) return p;
    }
    throw ConfigError(path(key), "expected a non-negative integer or hex string");
  }

  std::optional<std::int64_t> opt_i64(std::string_view key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (v->is_number_integer()) return v->get<std::int64_t>();
    throw ConfigError(path(key), "expected an integer");
  }

  std::optional<bool> opt_bool(std::string_view key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) throw ConfigError(path(key), "expected true or false");
    return v->get<bool>();
  }
  bool boolean(std::string_view key, bool fallback) { return opt_bool(key).value_or(fallback); }

  std::optional<std::string> opt_str(std::string_view key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) throw ConfigError(path(key), "expected a string");
    return v->get<std::string>();
  }
  std::string str(std::string_view key, std::string fallback) { return opt_str(key).value_or(std::move(fallback)); }

  std::optional<double> opt_double(std::string_view key) {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) throw ConfigError(path(key), "expected a number");
    return v->get<double>();
  }

  const Json* array(std::string_view key) {
    const Json* v = get(key);
    if (v && !v->is_array()) throw ConfigError(path(key), "expected an array");
    return v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(join_path(path_, it.key()), "unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename T, typename F>
T parse_enum(const std::optional<std::string>& text, T fallback, const std::string& path, F parse) {
  if (!text) return fallback;
  try {
    return parse(*text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
}

TlbKind parse_tlb_kind(std::string_view s) {
  if (s == "instruction" || s == "itlb") return TlbKind::Instruction;
  if (s == "data" || s == "dtlb") return TlbKind::Data;
  throw std::invalid_argument("unknown tlb kind '" + std::string(s) + "' (expected instruction | data)");
}

std::string_view tlb_kind_key(TlbKind k) { return k == TlbKind::Instruction ? "instruction" : "data"; }

Role parse_role(std::string_view s) {
  if (s == "victim") return Role::Victim;
  if (s == "attacker") return Role::Attacker;
  if (s == "bystander") return Role::Bystander;
  throw std::invalid_argument("unknown role '" + std::string(s) + "' (expected victim | attacker | bystander)");
}

Step parse_step(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  Step s;
  const auto action = r.opt_str("action");
  if (!action) throw ConfigError(r.path("action"), "missing");
  const auto a = parse_action(*action);
  if (!a) throw ConfigError(r.path("action"), "unknown action '" + *action + "'");
  s.action = *a;
  const auto tick = r.opt_u64("tick");
  if (!tick) throw ConfigError(r.path("tick"), "missing");
  s.tick = *tick;
  if (const Json* v = r.get("va")) {
    if (v->is_string()) {
      try {
        s.va = AddrExpr::parse(v->get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(r.path("va"), e.what());
      }
    } else if (v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      s.va = AddrExpr::literal(v->get<std::uint64_t>());
    } else {
      throw ConfigError(r.path("va"), "expected an address or \"@label+offset\"");
    }
  }
  s.hint = r.opt_u64("hint");
  s.length = r.opt_u64("length");
  s.populate = r.opt_bool("populate");
  s.label = r.opt_str("label");
  s.value = r.opt_i64("value");
  s.text = r.opt_str("text");
  s.hex = r.opt_str("hex");
  s.prefix = r.opt_str("prefix");
  s.print = r.opt_str("print");
  s.ticks = r.opt_u64("ticks");
  s.target_va = r.opt_u64("target_va");
  if (auto lvl = r.opt_u64("level")) s.level = static_cast<unsigned>(*lvl);
  s.region_pages = r.opt_u64("region_pages");
  s.activations = r.opt_u64("activations");
  if (auto k = r.opt_str("kind")) s.kind = parse_enum(k, TlbKind::Instruction, r.path("kind"), parse_tlb_kind);
  s.retouch = r.opt_bool("retouch");
  s.max_len = r.opt_u64("max_len");
  if (const Json* rep = r.get("repeat")) {
    ObjectReader rr(*rep, r.path("repeat"));
    Repeat rp;
    rp.count = rr.u64("count", 1);
    rp.tick_stride = rr.u64("tick_stride", 1);
    rp.va_stride = rr.u64("va_stride", 0);
    rr.finish();
    s.repeat = rp;
  }
  r.finish();
  return s;
}

SegmentConfig parse_segment(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  SegmentConfig s;
  const auto va = r.opt_u64("va");
  if (!va) throw ConfigError(r.path("va"), "missing");
  s.va = *va;
  s.pages = r.u64("pages", 1);
  s.blob = r.opt_i64("blob");
  s.text = r.opt_str("text");
  s.hex = r.opt_str("hex");
  r.finish();
  return s;
}

ProcessConfig parse_process(const Json& j, const std::string& path) {
  ObjectReader r(j, path);
  ProcessConfig p;
  const auto name = r.opt_str("name");
  if (!name || name->empty()) throw ConfigError(r.path("name"), "missing");
  p.name = *name;
  p.role = parse_enum(r.opt_str("role"), Role::Bystander, r.path("role"), parse_role);
  if (const Json* segs = r.array("segments")) {
    for (std::size_t i = 0; i < segs->size(); ++i)
      p.segments.push_back(parse_segment((*segs)[i], index_path(r.path("segments"), i)));
  }
  if (const Json* script = r.array("script")) {
    for (std::size_t i = 0; i < script->size(); ++i)
      p.script.push_back(parse_step((*script)[i], index_path(r.path("script"), i)));
  }
  r.finish();
  return p;
}

Json u64_json(std::uint64_t v) { return Json(v); }
Json addr_json(std::uint64_t v) { return Json(to_hex(v)); }

Json step_json(const Step& s) {
  Json j;
  j["tick"] = s.tick;
  j["action"] = std::string(action_name(s.action));
  if (s.va) {
    if (s.va->label) j["va"] = s.va->to_string();
    else j["va"] = to_hex(s.va->offset);
  }
  if (s.hint) j["hint"] = addr_json(*s.hint);
  if (s.length) j["length"] = *s.length;
  if (s.populate) j["populate"] = *s.populate;
  if (s.label) j["label"] = *s.label;
  if (s.value) j["value"] = *s.value;
  if (s.text) j["text"] = *s.text;
  if (s.hex) j["hex"] = *s.hex;
  if (s.prefix) j["prefix"] = *s.prefix;
  if (s.print) j["print"] = *s.print;
  if (s.ticks) j["ticks"] = *s.ticks;
  if (s.target_va) j["target_va"] = addr_json(*s.target_va);
  if (s.level) j["level"] = *s.level;
  if (s.region_pages) j["region_pages"] = *s.region_pages;
  if (s.activations) j["activations"] = *s.activations;
  if (s.kind) j["kind"] = std::string(tlb_kind_key(*s.kind));
  if (s.retouch) j["retouch"] = *s.retouch;
  if (s.max_len) j["max_len"] = *s.max_len;
  if (s.repeat) {
    Json r;
    r["count"] = s.repeat->count;
    r["tick_stride"] = s.repeat->tick_stride;
    r["va_stride"] = addr_json(s.repeat->va_stride);
    j["repeat"] = r;
  }
  return j;
}

Json to_json(const ScenarioConfig& c) {
  Json j;
  j["format_version"] = c.format_version;
  j["name"] = c.name;
  j["description"] = c.description;
  j["isa"] = std::string(isa_name(c.isa));
  j["seed"] = c.seed;

  Json d;
  d["row_size_bytes"] = c.dram.geometry.row_size_bytes;
  d["row_count"] = c.dram.geometry.row_count;
  d["refresh_window_ticks"] = c.dram.geometry.refresh_window_ticks;
  d["threshold"] = c.dram.hammer.threshold;
  d["blast_radius"] = c.dram.hammer.blast_radius;
  d["density"] = c.dram.density;
  if (c.dram.seed) d["seed"] = *c.dram.seed;
  Json bits = Json::array();
  for (const auto& b : c.dram.vulnerable_bits) {
    Json jb;
    jb["row"] = b.row;
    jb["bit"] = b.bit_offset_in_row;
    jb["flip_to"] = b.flip_to;
    bits.push_back(jb);
  }
  d["vulnerable_bits"] = bits;
  j["dram"] = d;

  Json t;
  t["entries"] = c.tlb.entries_per_kind;
  t["replacement"] = std::string(replacement_name(c.tlb.replacement));
  t["honor_global"] = c.tlb.honor_global;
  j["tlb"] = t;

  Json o;
  o["respect_mmap_hint"] = c.os.respect_mmap_hint;
  o["allow_fixed_static_load"] = c.os.allow_fixed_static_load;
  o["pic_relocation"] = c.os.pic_relocation;
  if (c.os.aslr_seed) o["aslr_seed"] = *c.os.aslr_seed;
  j["os"] = o;

  Json procs = Json::array();
  for (const auto& p : c.processes) {
    Json jp;
    jp["name"] = p.name;
    jp["role"] = std::string(role_name(p.role));
    Json segs = Json::array();
    for (const auto& s : p.segments) {
      Json js;
      js["va"] = addr_json(s.va);
      js["pages"] = s.pages;
      if (s.blob) js["blob"] = *s.blob;
      if (s.text) js["text"] = *s.text;
      if (s.hex) js["hex"] = *s.hex;
      segs.push_back(js);
    }
    jp["segments"] = segs;
    Json script = Json::array();
    for (const auto& s : p.script) script.push_back(step_json(s));
    jp["script"] = script;
    procs.push_back(jp);
  }
  j["processes"] = procs;

  Json rules = Json::array();
  for (const auto& r : c.verdict) {
    Json jr;
    jr["actor"] = r.actor;
    if (r.equals) jr["equals"] = *r.equals;
    if (r.contains) jr["contains"] = *r.contains;
    rules.push_back(jr);
  }
  j["verdict"] = Json{{"rules", rules}};

  Json watch = Json::array();
  for (const auto& w : c.watch) {
    watch.push_back(Json{{"actor", w.actor}, {"va", to_hex(w.va)}, {"kind", std::string(tlb_kind_key(w.kind))}});
  }
  j["trace"] = Json{{"watch", watch}};
  return j;
}

ScenarioConfig from_json(const Json& j) {
  ObjectReader r(j, "");
  ScenarioConfig c;
  c.format_version = static_cast<int>(r.u64("format_version", kScenarioFormatVersion));
  if (c.format_version != kScenarioFormatVersion)
    throw ConfigError("format_version", "unsupported version " + std::to_string(c.format_version) + " (expected " +
                                            std::to_string(kScenarioFormatVersion) + ")");
  c.name = r.str("name", c.name);
  c.description = r.str("description", "");
  c.isa = parse_enum(r.opt_str("isa"), Isa::X86_64, "isa", parse_isa);
  c.seed = r.u64("seed", c.seed);

  if (const Json* d = r.get("dram")) {
    ObjectReader dr(*d, "dram");
    c.dram.geometry.row_size_bytes = dr.u64("row_size_bytes", c.dram.geometry.row_size_bytes);
    c.dram.geometry.row_count = dr.u64("row_count", c.dram.geometry.row_count);
    c.dram.geometry.refresh_window_ticks = dr.u64("refresh_window_ticks", c.dram.geometry.refresh_window_ticks);
    c.dram.hammer.threshold = dr.u64("threshold", c.dram.hammer.threshold);
    c.dram.hammer.blast_radius = dr.u64("blast_radius", c.dram.hammer.blast_radius);
    c.dram.density = dr.opt_double("density").value_or(c.dram.density);
    if (c.dram.density < 0.0 || c.dram.density > 1.0) throw ConfigError("dram.density", "must lie in [0, 1]");
    c.dram.seed = dr.opt_u64("seed");
    if (const Json* bits = dr.array("vulnerable_bits")) {
      for (std::size_t i = 0; i < bits->size(); ++i) {
        ObjectReader br((*bits)[i], index_path("dram.vulnerable_bits", i));
        VulnerableBit b;
        const auto row = br.opt_u64("row");
        const auto bit = br.opt_u64("bit");
        if (!row) throw ConfigError(br.path("row"), "missing");
        if (!bit) throw ConfigError(br.path("bit"), "missing");
        b.row = *row;
        b.bit_offset_in_row = *bit;
        const auto to = br.u64("flip_to", 1);
        if (to > 1) throw ConfigError(br.path("flip_to"), "must be 0 or 1");
        b.flip_to = static_cast<std::uint8_t>(to);
        br.finish();
        c.dram.vulnerable_bits.push_back(b);
      }
    }
    dr.finish();
  }

  if (const Json* t = r.get("tlb")) {
    ObjectReader tr(*t, "tlb");
    c.tlb.entries_per_kind = tr.u64("entries", c.tlb.entries_per_kind);
    c.tlb.replacement = parse_enum(tr.opt_str("replacement"), c.tlb.replacement, "tlb.replacement", parse_replacement);
    c.tlb.honor_global = tr.boolean("honor_global", c.tlb.honor_global);
    tr.finish();
  }

  if (const Json* o = r.get("os")) {
    ObjectReader orr(*o, "os");
    c.os.respect_mmap_hint = orr.boolean("respect_mmap_hint", c.os.respect_mmap_hint);
    c.os.allow_fixed_static_load = orr.boolean("allow_fixed_static_load", c.os.allow_fixed_static_load);
    c.os.pic_relocation = orr.boolean("pic_relocation", c.os.pic_relocation);
    c.os.aslr_seed = orr.opt_u64("aslr_seed");
    orr.finish();
  }

  if (const Json* procs = r.array("processes")) {
    for (std::size_t i = 0; i < procs->size(); ++i)
      c.processes.push_back(parse_process((*procs)[i], index_path("processes", i)));
  }

  if (const Json* v = r.get("verdict")) {
    ObjectReader vr(*v, "verdict");
    if (const Json* rules = vr.array("rules")) {
      for (std::size_t i = 0; i < rules->size(); ++i) {
        ObjectReader rr((*rules)[i], index_path("verdict.rules", i));
        VerdictRule rule;
        rule.actor = rr.str("actor", "");
        rule.equals = rr.opt_str("equals");
        rule.contains = rr.opt_str("contains");
        rr.finish();
        c.verdict.push_back(std::move(rule));
      }
    }
    vr.finish();
  }

  if (const Json* t = r.get("trace")) {
    ObjectReader tr(*t, "trace");
    if (const Json* watch = tr.array("watch")) {
      for (std::size_t i = 0; i < watch->size(); ++i) {
        ObjectReader wr((*watch)[i], index_path("trace.watch", i));
        WatchConfig w;
        w.actor = wr.str("actor", "");
        const auto va = wr.opt_u64("va");
        if (!va) throw ConfigError(wr.path("va"), "missing");
        w.va = *va;
        w.kind = parse_enum(wr.opt_str("kind"), TlbKind::Instruction, wr.path("kind"), parse_tlb_kind);
        wr.finish();
        c.watch.push_back(std::move(w));
      }
    }
    tr.finish();
  }
  r.finish();
  return c;
}

}  // namespace

std::string_view action_name(Action a) {
  for (const auto& [act, name] : kActions) {
    if (act == a) return name;
  }
  return "?";
}

std::optional<Action> parse_action(std::string_view name) {
  for (const auto& [act, n] : kActions) {
    if (n == name) return act;
  }
  return std::nullopt;
}

std::string_view role_name(Role r) {
  switch (r) {
    case Role::Victim: return "victim";
    case Role::Attacker: return "attacker";
    case Role::Bystander: return "bystander";
  }
  return "?";
}

std::string AddrExpr::to_string() const {
  if (!label) return to_hex(offset);
  return offset == 0 ? "@" + *label : "@" + *label + "+" + to_hex(offset);
}

AddrExpr AddrExpr::parse(std::string_view text) {
  if (text.empty()) throw std::invalid_argument("empty address");
  if (text.front() != '@') {
    auto v = parse_u64_text(text);
    if (!v) throw std::invalid_argument("bad address '" + std::string(text) + "'");
    return literal(*v);
  }
  text.remove_prefix(1);
  const auto plus = text.find('+');
  AddrExpr e;
  e.label = std::string(text.substr(0, plus));
  if (e.label->empty()) throw std::invalid_argument("empty label in address");
  if (plus != std::string_view::npos) {
    auto v = parse_u64_text(text.substr(plus + 1));
    if (!v) throw std::invalid_argument("bad offset in '@" + std::string(text) + "'");
    e.offset = *v;
  }
  return e;
}

bool DramConfig::operator==(const DramConfig& o) const {
  return geometry.row_size_bytes == o.geometry.row_size_bytes && geometry.row_count == o.geometry.row_count &&
         geometry.refresh_window_ticks == o.geometry.refresh_window_ticks &&
         hammer.threshold == o.hammer.threshold && hammer.blast_radius == o.hammer.blast_radius &&
         density == o.density && seed == o.seed && vulnerable_bits == o.vulnerable_bits;
}

bool ScenarioConfig::operator==(const ScenarioConfig& o) const {
  return format_version == o.format_version && name == o.name && description == o.description && isa == o.isa &&
         seed == o.seed && dram == o.dram && tlb.entries_per_kind == o.tlb.entries_per_kind &&
         tlb.replacement == o.tlb.replacement && tlb.honor_global == o.tlb.honor_global && os == o.os &&
         processes == o.processes && verdict == o.verdict && watch == o.watch;
}

ScenarioConfig parse_scenario(std::string_view json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("malformed JSON: ") + e.what());
  }
  ScenarioConfig c = from_json(j);
  validate_scenario(c);
  return c;
}

std::string serialize_scenario(const ScenarioConfig& config) { return to_json(config).dump(2) + "\n"; }

void apply_override(ScenarioConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("", "override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));

  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }

  Json doc = to_json(config);
  Json* node = &doc;
  std::string path;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (part.empty()) throw ConfigError(key, "empty path component");
    const bool last = dot == std::string::npos;
    if (node->is_array()) {
      std::size_t idx = 0;
      auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
      if (ec != std::errc{} || p != part.data() + part.size() || idx >= node->size())
        throw ConfigError(path, "no element '" + part + "'");
      path = index_path(path, idx);
      node = &(*node)[idx];
    } else if (node->is_object()) {
      path = join_path(path, part);
      if (!last && !node->contains(part)) throw ConfigError(path, "unknown key");
      node = &(*node)[part];
    } else {
      throw ConfigError(path, "is not an object or array");
    }
    if (last) break;
    pos = dot + 1;
  }
  *node = value;
  ScenarioConfig updated = from_json(doc);
  validate_scenario(updated);
  config = std::move(updated);
}

void apply_overrides(ScenarioConfig& config, std::span<const std::string> assignments) {
  for (const auto& a : assignments) apply_override(config, a);
}

std::vector<Step> expand_script(const std::vector<Step>& script) {
  std::vector<Step> out;
  for (const auto& s : script) {
    const Repeat rep = s.repeat.value_or(Repeat{});
    for (std::uint64_t i = 0; i < rep.count; ++i) {
      Step e = s;
      e.repeat.reset();
      e.tick = s.tick + i * rep.tick_stride;
      if (e.va) e.va->offset += i * rep.va_stride;
      out.push_back(std::move(e));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Step& a, const Step& b) { return a.tick < b.tick; });
  return out;
}

void validate_scenario(const ScenarioConfig& c) {
  try {
    c.dram.geometry.validate();
  } catch (const Fault& e) {
    throw ConfigError("dram", e.what());
  }
  if (c.dram.geometry.row_size_bytes % kPageSize != 0)
    throw ConfigError("dram.row_size_bytes", "must be a multiple of the 4096-byte page");
  if (c.dram.geometry.refresh_window_ticks == 0) throw ConfigError("dram.refresh_window_ticks", "must be positive");
  if (c.dram.hammer.threshold == 0) throw ConfigError("dram.threshold", "must be positive");
  for (std::size_t i = 0; i < c.dram.vulnerable_bits.size(); ++i) {
    const auto& b = c.dram.vulnerable_bits[i];
    if (b.row >= c.dram.geometry.row_count)
      throw ConfigError(index_path("dram.vulnerable_bits", i) + ".row", "beyond dram.row_count");
    if (b.bit_offset_in_row >= c.dram.geometry.row_bits())
      throw ConfigError(index_path("dram.vulnerable_bits", i) + ".bit", "beyond the row size");
  }
  if (c.tlb.entries_per_kind == 0) throw ConfigError("tlb.entries", "must be at least 1");

  const auto& profile = PagingProfile::get(c.isa);
  std::set<std::string> names;
  std::map<std::uint64_t, std::string> tick_owner;
  for (std::size_t pi = 0; pi < c.processes.size(); ++pi) {
    const auto& p = c.processes[pi];
    const std::string ppath = index_path("processes", pi);
    if (!names.insert(p.name).second) throw ConfigError(ppath + ".name", "duplicate process name '" + p.name + "'");
    for (std::size_t si = 0; si < p.segments.size(); ++si) {
      const auto& s = p.segments[si];
      const std::string spath = index_path(ppath + ".segments", si);
      if (!page_aligned(s.va)) throw ConfigError(spath + ".va", "must be page aligned");
      if (s.pages == 0) throw ConfigError(spath + ".pages", "must be at least 1");
      if ((s.text ? 1 : 0) + (s.hex ? 1 : 0) + (s.blob ? 1 : 0) > 1)
        throw ConfigError(spath, "at most one of blob, text, hex");
    }
    for (std::size_t si = 0; si < p.script.size(); ++si) {
      const auto& s = p.script[si];
      const std::string spath = index_path(ppath + ".script", si);
      if (si > 0 && s.tick <= p.script[si - 1].tick)
        throw ConfigError(spath + ".tick", "ticks must be strictly increasing within a script");
      if (s.repeat && s.repeat->count == 0) throw ConfigError(spath + ".repeat.count", "must be at least 1");
      if (s.repeat && s.repeat->count > 1 && s.repeat->tick_stride == 0)
        throw ConfigError(spath + ".repeat.tick_stride", "must be positive");
      auto need = [&](bool present, std::string_view key) {
        if (!present) throw ConfigError(spath + "." + std::string(key), "required by " + std::string(action_name(s.action)));
      };
      switch (s.action) {
        case Action::Mmap: need(s.length.has_value(), "length"); break;
        case Action::Munmap:
        case Action::TouchRead:
        case Action::TouchWrite:
        case Action::CallFunction:
        case Action::PrintRead: need(s.va.has_value(), "va"); break;
        case Action::WriteBytes:
          need(s.va.has_value(), "va");
          need(s.text.has_value() != s.hex.has_value(), "text");
          break;
        case Action::WriteFunctionBlob:
          need(s.va.has_value(), "va");
          need(s.value.has_value(), "value");
          break;
        case Action::HammerSearch:
          need(s.target_va.has_value(), "target_va");
          if (!page_aligned(*s.target_va)) throw ConfigError(spath + ".target_va", "must be page aligned");
          if (s.level && *s.level >= profile.root_level())
            throw ConfigError(spath + ".level", "must name a non-root level of the " +
                                                    std::string(isa_name(c.isa)) + " profile");
          if (s.level && !profile.level(*s.level).global_bit)
            throw ConfigError(spath + ".level", "that level has no global bit");
          break;
        case Action::EvictTlbSet: need(s.target_va.has_value(), "target_va"); break;
        case Action::Print: need(s.text.has_value(), "text"); break;
        case Action::HammerTarget:
        case Action::Sleep: break;
      }
    }
    for (const auto& s : expand_script(p.script)) {
      auto [it, fresh] = tick_owner.emplace(s.tick, p.name);
      if (!fresh && it->second != p.name)
        throw ConfigError(ppath + ".script", "tick " + std::to_string(s.tick) + " is also used by '" + it->second +
                                                 "' (one step per tick on a single core)");
      if (!fresh) throw ConfigError(ppath + ".script", "tick " + std::to_string(s.tick) + " occurs twice");
    }
  }
  for (std::size_t i = 0; i < c.verdict.size(); ++i) {
    const auto& r = c.verdict[i];
    const std::string rpath = index_path("verdict.rules", i);
    if (!names.contains(r.actor)) throw ConfigError(rpath + ".actor", "no process named '" + r.actor + "'");
    if (r.equals.has_value() == r.contains.has_value())
      throw ConfigError(rpath, "exactly one of equals, contains");
  }
  for (std::size_t i = 0; i < c.watch.size(); ++i) {
    if (!names.contains(c.watch[i].actor))
      throw ConfigError(index_path("trace.watch", i) + ".actor", "no process named '" + c.watch[i].actor + "'");
  }
}

}  // namespace gbh
