#include "gbhammer/report.hpp"

#include "json.hpp"

namespace gbh {

namespace {

using Json = nlohmann::ordered_json;

Json tlb_stats(const TlbStats& s) { return Json{{"hits", s.hits}, {"misses", s.misses}}; }

Json build(const RunResult& r) {
  Json j;
  j["format_version"] = kScenarioFormatVersion;
  j["scenario"] = r.config.name;
  j["isa"] = std::string(isa_name(r.config.isa));
  j["seed"] = r.config.seed;

  Json verdict;
  verdict["exploit_success"] = r.verdict.exploit_success;
  Json outcomes = Json::object();
  for (const auto& [name, o] : r.outcomes) outcomes[name] = std::string(outcome_name(o));
  verdict["attack_outcome"] = outcomes;
  verdict["misdirection_count"] = r.verdict.misdirection_count;
  verdict["misdirected_pages"] = r.verdict.misdirected_pages;
  verdict["shared_span_bytes"] = r.verdict.shared_span_bytes;
  verdict["victim_outputs"] = r.verdict.victim_outputs;
  verdict["attacker_outputs"] = r.verdict.attacker_outputs;
  j["verdict"] = verdict;

  Json metrics;
  metrics["itlb"] = tlb_stats(r.metrics.itlb);
  metrics["dtlb"] = tlb_stats(r.metrics.dtlb);
  metrics["flip_events"] = r.metrics.flip_events;
  metrics["hammer_activations"] = r.metrics.hammer_activations;
  metrics["global_span_bytes"] = r.metrics.global_span_bytes;
  metrics["steps_executed"] = r.metrics.steps_executed;
  metrics["final_tick"] = r.metrics.final_tick;
  j["metrics"] = metrics;

  Json outputs = Json::array();
  for (const auto& o : r.outputs) outputs.push_back(Json{{"tick", o.tick}, {"actor", o.actor}, {"text", o.text}});
  j["outputs"] = outputs;

  Json flips = Json::array();
  for (const auto& f : r.flips) {
    flips.push_back(Json{{"aggressor_row", f.aggressor_row}, {"row", f.bit.row},
                         {"bit_in_row", f.bit.bit_offset_in_row}, {"physical_bit", f.physical_bit},
                         {"flip_to", f.bit.flip_to}});
  }
  j["flips"] = flips;
  j["effective_config"] = Json::parse(serialize_scenario(r.config));
  j["trace"] = r.trace;
  return j;
}

void flatten(const Json& j, const std::string& path, std::vector<Fact>& out) {
  if (j.is_object()) {
    if (j.empty()) out.emplace_back(path, "{}");
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), out);
  } else if (j.is_array()) {
    if (j.empty()) out.emplace_back(path, "[]");
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], path + "[" + std::to_string(i) + "]", out);
  } else if (j.is_string()) {
    out.emplace_back(path, j.get<std::string>());
  } else {
    out.emplace_back(path, j.dump());
  }
}

}  // namespace

std::string report_json(const RunResult& result) { return build(result).dump(2) + "\n"; }

std::vector<Fact> report_facts(const RunResult& result) {
  std::vector<Fact> out;
  flatten(build(result), "", out);
  return out;
}

std::string report_text(const RunResult& result) {
  std::string s;
  for (const auto& [k, v] : report_facts(result)) s += k + ": " + v + "\n";
  return s;
}

std::string report_summary(const RunResult& r) {
  std::string s = "scenario " + r.config.name + " (" + std::string(isa_name(r.config.isa)) + ", seed " +
                  std::to_string(r.config.seed) + ")\n";
  for (const auto& o : r.outputs) s += "  [" + o.actor + " @" + std::to_string(o.tick) + "] " + o.text + "\n";
  for (const auto& [name, o] : r.outcomes) s += "attack_outcome " + name + ": " + std::string(outcome_name(o)) + "\n";
  s += "exploit_success: " + std::string(r.verdict.exploit_success ? "true" : "false") + "\n";
  s += "misdirection_count: " + std::to_string(r.verdict.misdirection_count) + "\n";
  s += "shared_span_bytes: " + std::to_string(r.verdict.shared_span_bytes) + "\n";
  s += "flip_events: " + std::to_string(r.metrics.flip_events) + "\n";
  return s;
}

}  // namespace gbh
