#include <gtest/gtest.h>

#include "gbhammer/config.hpp"
#include "gbhammer/scenario.hpp"

using namespace gbh;

namespace {

const char* kMinimal = R"({
  "format_version": 1,
  "name": "tiny",
  "isa": "x86_64",
  "processes": [
    {"name": "a", "role": "attacker", "script": [
      {"tick": 1, "action": "MMAP", "length": 8192, "label": "buf", "populate": true},
      {"tick": 2, "action": "WRITE_BYTES", "va": "@buf+0x10", "text": "hi"},
      {"tick": 3, "action": "PRINT_READ", "va": "@buf+0x10", "prefix": "got"}
    ]}
  ],
  "verdict": {"rules": [{"actor": "a", "equals": "got hi"}]}
})";

std::string expect_error_path(const std::string& doc) {
  try {
    parse_scenario(doc);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

}  // namespace

TEST(Config, ParsesMinimalDocumentWithDefaults) {
  const auto c = parse_scenario(kMinimal);
  EXPECT_EQ(c.name, "tiny");
  EXPECT_EQ(c.tlb.entries_per_kind, 64u);
  EXPECT_EQ(c.dram.hammer.threshold, 50000u);
  EXPECT_EQ(c.dram.geometry.row_size_bytes, 8192u);
  ASSERT_EQ(c.processes.size(), 1u);
  ASSERT_EQ(c.processes[0].script.size(), 3u);
  EXPECT_EQ(c.processes[0].script[1].va->label, "buf");
  EXPECT_EQ(c.processes[0].script[1].va->offset, 0x10u);
}

TEST(Config, RoundTripsThroughSerialize) {
  const auto c = parse_scenario(kMinimal);
  EXPECT_EQ(parse_scenario(serialize_scenario(c)), c);
  for (const auto& name : builtin_names()) {
    const auto b = builtin_scenario(name, 3);
    const auto text = serialize_scenario(b);
    EXPECT_EQ(parse_scenario(text), b) << name;
    EXPECT_EQ(serialize_scenario(parse_scenario(text)), text) << name;
  }
}

TEST(Config, UnknownKeysAreRejectedWithPath) {
  std::string doc = kMinimal;
  doc.replace(doc.find("\"label\""), 7, "\"lable\"");
  EXPECT_EQ(expect_error_path(doc), "processes[0].script[0].lable");
  EXPECT_EQ(expect_error_path(R"({"tlb": {"entries": 4, "size": 2}})"), "tlb.size");
  EXPECT_EQ(expect_error_path(R"({"bogus": 1})"), "bogus");
}

TEST(Config, TypeAndValueErrors) {
  EXPECT_EQ(expect_error_path(R"({"tlb": {"entries": "many"}})"), "tlb.entries");
  EXPECT_EQ(expect_error_path(R"({"isa": "mips"})"), "isa");
  EXPECT_EQ(expect_error_path(R"({"format_version": 2})"), "format_version");
  EXPECT_EQ(expect_error_path(R"({"dram": {"density": 2.0}})"), "dram.density");
  EXPECT_EQ(expect_error_path(R"({"tlb": {"replacement": "random"}})"), "tlb.replacement");
  EXPECT_EQ(expect_error_path("{not json"), "");
}

TEST(Config, TickOrderingIsEnforced) {
  EXPECT_EQ(expect_error_path(R"({"processes": [{"name": "a", "script": [
      {"tick": 2, "action": "SLEEP"}, {"tick": 2, "action": "SLEEP"}]}]})"),
            "processes[0].script[1].tick");
  EXPECT_EQ(expect_error_path(R"({"processes": [
      {"name": "a", "script": [{"tick": 2, "action": "SLEEP"}]},
      {"name": "b", "script": [{"tick": 2, "action": "SLEEP"}]}]})"),
            "processes[1].script");
}

TEST(Config, ActionOperandsAreRequired) {
  EXPECT_EQ(expect_error_path(R"({"processes": [{"name": "a", "script": [{"tick": 1, "action": "CALL_FUNCTION"}]}]})"),
            "processes[0].script[0].va");
  EXPECT_EQ(expect_error_path(R"({"processes": [{"name": "a", "script": [
      {"tick": 1, "action": "HAMMER_SEARCH", "target_va": "0x20000", "level": 1}]}]})"),
            "processes[0].script[0].level");
  EXPECT_EQ(expect_error_path(R"({"processes": [{"name": "a", "script": [{"tick": 1, "action": "JUMP"}]}]})"),
            "processes[0].script[0].action");
  EXPECT_EQ(expect_error_path(R"({"processes": [{"name": "a"}], "verdict": {"rules": [{"actor": "z", "equals": "x"}]}})"),
            "verdict.rules[0].actor");
}

TEST(Config, HexAddressesAccepted) {
  const auto c = parse_scenario(R"({"processes": [{"name": "a", "segments": [{"va": "0x20000", "blob": 1}],
      "script": [{"tick": 1, "action": "CALL_FUNCTION", "va": 131072}]}]})");
  EXPECT_EQ(c.processes[0].segments[0].va, 0x20000u);
  EXPECT_EQ(c.processes[0].script[0].va->offset, 0x20000u);
}

TEST(Config, AddrExprParsing) {
  EXPECT_EQ(AddrExpr::parse("0x1000"), AddrExpr::literal(0x1000));
  const auto e = AddrExpr::parse("@R+0x2000");
  EXPECT_EQ(e.label, "R");
  EXPECT_EQ(e.offset, 0x2000u);
  EXPECT_EQ(e.to_string(), "@R+0x2000");
  EXPECT_EQ(AddrExpr::parse("@R").to_string(), "@R");
  EXPECT_THROW(AddrExpr::parse("@"), std::invalid_argument);
  EXPECT_THROW(AddrExpr::parse("zz"), std::invalid_argument);
}

TEST(Config, OverridesEditTheDocument) {
  auto c = parse_scenario(kMinimal);
  apply_override(c, "tlb.honor_global=false");
  EXPECT_FALSE(c.tlb.honor_global);
  apply_override(c, "tlb.replacement=fifo");
  EXPECT_EQ(c.tlb.replacement, Replacement::Fifo);
  apply_override(c, "processes.0.script.2.prefix=seen");
  EXPECT_EQ(c.processes[0].script[2].prefix, "seen");
  apply_override(c, "dram.seed=77");
  EXPECT_EQ(c.dram_seed(), 77u);
  EXPECT_THROW(apply_override(c, "tlb.bogus=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "nope.deeper=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "tlb.entries"), ConfigError);
  EXPECT_THROW(apply_override(c, "processes.5.name=x"), ConfigError);
  EXPECT_FALSE(c.tlb.honor_global);  // failed overrides leave the config alone
}

TEST(Config, ExpandScriptAppliesRepeat) {
  Step s;
  s.tick = 10;
  s.action = Action::CallFunction;
  s.va = AddrExpr::literal(0x1000);
  s.repeat = Repeat{3, 2, 0x1000};
  const auto steps = expand_script({s});
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(steps[2].tick, 14u);
  EXPECT_EQ(steps[2].va->offset, 0x3000u);
  EXPECT_FALSE(steps[0].repeat.has_value());
}
