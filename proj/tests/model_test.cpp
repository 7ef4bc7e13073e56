/*
    Copyright (C) 2026 the apmon project

    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/
#include "apm/model.hpp"

#include <gtest/gtest.h>

#include "apm/common.hpp"

namespace {

using namespace apm;
using namespace apm::model;

const std::string kFixture = std::string(APM_FIXTURE_DIR) + "/ehs.json";

TEST(ModelLoad, FixtureStructure) {
    const SystemModel m = load_model(kFixture);
    EXPECT_EQ(m.name, "EHS");
    EXPECT_EQ(m.components.size(), 6u);
    EXPECT_EQ(m.connectors.size(), 5u);
    EXPECT_EQ(m.scenarios.size(), 2u);
    EXPECT_EQ(m.nodes.size(), 3u);
    EXPECT_EQ(m.networks.size(), 2u);
    ASSERT_NE(m.find_component("AppServer"), nullptr);
    ASSERT_NE(m.find_component("Database"), nullptr);
    EXPECT_TRUE(m.find_component("Database")->is_data_store);
    EXPECT_FALSE(m.find_component("AppServer")->is_data_store);
    EXPECT_EQ(m.find_component("NoSuch"), nullptr);
}

TEST(ModelLoad, TimesConvertFromMilliseconds) {
    const SystemModel m = load_model(kFixture);
    const ProcessingNode* pda = m.find_node("PDA");
    ASSERT_NE(pda, nullptr);
    EXPECT_DOUBLE_EQ(pda->cpu_time_per_instruction_s, 0.00015 / 1000.0);
    EXPECT_DOUBLE_EQ(pda->disk_time_per_access_s, 5.7 / 1000.0);
    const Scenario* s = m.find_scenario("UpdateVitalParameters");
    ASSERT_NE(s, nullptr);
    EXPECT_EQ(s->workload.population, 10000);
    EXPECT_DOUBLE_EQ(s->workload.think_time_s, 86400.0);
}

TEST(ModelLoad, Thresholds) {
    const SystemModel m = load_model(kFixture);
    const ThresholdSet& t = m.thresholds;
    EXPECT_EQ(t.th_maxConnects, 4);
    EXPECT_EQ(t.th_maxMsgs, 5);
    EXPECT_DOUBLE_EQ(t.th_maxHwUtil, 0.8);
    EXPECT_DOUBLE_EQ(t.th_maxNetUtil, 0.7);
    EXPECT_DOUBLE_EQ(t.th_initSlot_s, 0.0);
    EXPECT_DOUBLE_EQ(t.th_sizeSlot_s, 50.0);
    EXPECT_DOUBLE_EQ(t.th_endSlot_s, 1500.0);
    EXPECT_DOUBLE_EQ(t.th_OpRtVar_s, 0.3);
    ASSERT_TRUE(t.th_minHwUtil.has_value());
    EXPECT_DOUBLE_EQ(*t.th_minHwUtil, 0.2);
    ASSERT_TRUE(t.th_maxParallelism.has_value());
    EXPECT_EQ(*t.th_maxParallelism, 50);
    // th_maxDbMsgs falls back to th_maxMsgs when absent
    EXPECT_EQ(t.effective_max_db_msgs(), 5);
}

TEST(ModelLoad, DeploymentAndLinks) {
    const SystemModel m = load_model(kFixture);
    EXPECT_EQ(m.node_of("ClientApp"), "PDA");
    EXPECT_EQ(m.node_of("AppServer"), "AppHost");
    EXPECT_EQ(m.node_of("Database"), "DbHost");
    EXPECT_EQ(m.node_of("Unmapped"), "");
    const NetworkLink* wan = m.link_between("PDA", "AppHost");
    ASSERT_NE(wan, nullptr);
    EXPECT_EQ(wan->name, "WAN");
    EXPECT_TRUE(wan->is_delay_center);
    EXPECT_DOUBLE_EQ(wan->bandwidth_mbit_per_s, 12.0);
    // symmetric lookup
    EXPECT_EQ(m.link_between("AppHost", "PDA"), wan);
    const NetworkLink* lan = m.find_link("LAN");
    ASSERT_NE(lan, nullptr);
    EXPECT_FALSE(lan->is_delay_center);
    EXPECT_DOUBLE_EQ(lan->bandwidth_mbit_per_s, 100.0);
    EXPECT_EQ(m.link_between("PDA", "DbHost"), nullptr);
}

TEST(ModelRoundTrip, SaveLoadIdentity) {
    const SystemModel m = load_model(kFixture);
    const std::string text = save_model(m);
    const SystemModel again = load_model_text(text);
    EXPECT_EQ(save_model(again), text);
    EXPECT_EQ(again.thresholds, m.thresholds);
    EXPECT_EQ(again.deployment, m.deployment);
    EXPECT_EQ(again.scenarios.size(), m.scenarios.size());
}

TEST(ModelParse, MalformedJsonThrows) {
    EXPECT_THROW(load_model_text("{ not json"), ParseError);
    EXPECT_THROW(load_model_text("[]"), ParseError);
}

// Minimal valid model builder used by the failure-path tests.
std::string tiny_model(const std::string& patch_key = "", const std::string& patch = "") {
    std::string base = R"({
      "name": "tiny",
      "components": [{"name": "A"}, {"name": "B", "is_data_store": true}],
      "connectors": [{"from": "A", "to": "B"}],
      "scenarios": [{
        "name": "S",
        "workload": {"population": 2, "think_time": 1000},
        "messages": [{"sender": "A", "receiver": "B", "cpu_instructions": 10}]
      }],
      "nodes": [{"name": "N1", "cpu_time_per_instruction_ms": 0.1, "disk_time_per_access_ms": 1}],
      "networks": [],
      "deployment": {"A": "N1", "B": "N1"},
      "thresholds": {
        "th_maxConnects": 4, "th_maxMsgs": 5, "th_maxHwUtil": 0.8, "th_maxNetUtil": 0.7,
        "th_initSlot": 0, "th_sizeSlot": 50000, "th_endSlot": 1500000, "th_OpRtVar": 300
      }
    })";
    if (!patch_key.empty()) {
        const auto pos = base.find(patch_key);
        base.replace(pos, patch_key.size(), patch);
    }
    return base;
}

TEST(ModelValidate, TinyModelLoads) {
    const SystemModel m = load_model_text(tiny_model());
    EXPECT_EQ(m.name, "tiny");
    EXPECT_TRUE(validate(m).empty());
}

TEST(ModelValidate, UnknownMessageSenderRejected) {
    EXPECT_THROW(load_model_text(tiny_model("\"sender\": \"A\"", "\"sender\": \"Ghost\"")),
                 ValidationError);
}

TEST(ModelValidate, DeploymentToUnknownNodeRejected) {
    EXPECT_THROW(load_model_text(tiny_model("\"A\": \"N1\"", "\"A\": \"N9\"")), ValidationError);
}

TEST(ModelValidate, DuplicateComponentRejected) {
    EXPECT_THROW(load_model_text(tiny_model("\"components\": [{\"name\": \"A\"}",
                                            "\"components\": [{\"name\": \"A\"}, {\"name\": \"A\"}")),
                 ValidationError);
}

TEST(ModelValidate, NonPositiveSlotSizeRejected) {
    EXPECT_THROW(load_model_text(tiny_model("\"th_sizeSlot\": 50000", "\"th_sizeSlot\": 0")),
                 ValidationError);
}

TEST(ModelValidate, NegativeServiceTimeRejected) {
    EXPECT_THROW(load_model_text(tiny_model("\"cpu_time_per_instruction_ms\": 0.1",
                                            "\"cpu_time_per_instruction_ms\": -0.1")),
                 ValidationError);
}

TEST(ModelMetrics, CountsOnChain) {
    // A -> B -> C chain; A sends twice in S, B relays to the store C.
    const std::string text = R"({
      "components": [{"name": "A"}, {"name": "B"}, {"name": "C", "is_data_store": true}],
      "connectors": [{"from": "A", "to": "B"}, {"from": "B", "to": "C"}],
      "scenarios": [{
        "name": "S",
        "workload": {"population": 1, "think_time": 0},
        "messages": [
          {"sender": "A", "receiver": "B", "cpu_instructions": 1},
          {"sender": "A", "receiver": "B", "cpu_instructions": 1},
          {"sender": "B", "receiver": "C", "cpu_instructions": 1}
        ]
      }],
      "nodes": [{"name": "N", "cpu_time_per_instruction_ms": 0.1, "disk_time_per_access_ms": 1}],
      "networks": [],
      "deployment": {"A": "N", "B": "N", "C": "N"},
      "thresholds": {
        "th_maxConnects": 4, "th_maxMsgs": 5, "th_maxHwUtil": 0.8, "th_maxNetUtil": 0.7,
        "th_initSlot": 0, "th_sizeSlot": 50000, "th_endSlot": 1500000, "th_OpRtVar": 300
      }
    })";
    const SystemModel m = load_model_text(text);
    const DerivedMetrics d = derived_metrics(m);
    EXPECT_EQ(d.connections_of("A"), 1);
    EXPECT_EQ(d.connections_of("B"), 2);
    EXPECT_EQ(d.connections_of("C"), 1);
    EXPECT_EQ(d.msgs("A", "S"), 2);
    EXPECT_EQ(d.msgs("B", "S"), 1);
    EXPECT_EQ(d.msgs("C", "S"), 0);
    EXPECT_EQ(d.db_msgs("B", "S"), 1);
    EXPECT_EQ(d.db_msgs("A", "S"), 0);
}

TEST(ModelThresholdsFile, BareAndWrappedForms) {
    const std::string bare = R"({
      "th_maxConnects": 3, "th_maxMsgs": 4, "th_maxHwUtil": 0.9, "th_maxNetUtil": 0.6,
      "th_initSlot": 1000, "th_sizeSlot": 2000, "th_endSlot": 9000, "th_OpRtVar": 500,
      "th_maxParallelism": 7
    })";
    const ThresholdSet a = load_thresholds_text(bare);
    EXPECT_EQ(a.th_maxConnects, 3);
    EXPECT_DOUBLE_EQ(a.th_initSlot_s, 1.0);
    EXPECT_DOUBLE_EQ(a.th_sizeSlot_s, 2.0);
    EXPECT_DOUBLE_EQ(a.th_OpRtVar_s, 0.5);
    ASSERT_TRUE(a.th_maxParallelism.has_value());
    EXPECT_EQ(*a.th_maxParallelism, 7);
    EXPECT_FALSE(a.th_minHwUtil.has_value());

    const ThresholdSet b = load_thresholds_text("{\"thresholds\": " + bare + "}");
    EXPECT_EQ(a, b);
    EXPECT_THROW(load_thresholds_text("[1,2]"), ParseError);
    EXPECT_THROW(load_thresholds_text("{\"th_maxConnects\": 3}"), ParseError);
}

TEST(FormatDouble, ShortestRoundTrip) {
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(format_double(0.057), "0.057");
    EXPECT_EQ(format_double(1500.0), "1500");
    EXPECT_EQ(format_double(0.3), "0.3");
    EXPECT_EQ(format_double(3.75e-06), "3.75e-06");
}

}  // namespace
