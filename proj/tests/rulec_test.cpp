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
#include "apm/rulec.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "apm/common.hpp"
#include "apm/model.hpp"
#include "apm/precalc.hpp"

namespace {

using namespace apm;
using namespace apm::rulec;
using precalc::AntipatternKind;
using precalc::ResidualForm;

const std::string kFixture = std::string(APM_FIXTURE_DIR) + "/ehs.json";

/// Every rule the case-study model compiles to, in library iteration order.
std::vector<MonitorRule> compile_case_study(const model::SystemModel& m) {
    std::vector<MonitorRule> rules;
    for (const auto& inst : precalc::precalculate(m)) {
        for (const auto& req : pmm::actualization_request(inst, m)) {
            const auto binding = pmm::resolve_thresholds(req, m.thresholds);
            for (auto r : compile(pmm::actualize(pmm::library().at(inst.kind), binding))) {
                r.instance = inst.id();
                rules.push_back(std::move(r));
            }
        }
    }
    return rules;
}

TEST(Compile, TrafficJamRule) {
    const auto m = model::load_model(kFixture);
    const auto pa = precalc::precalculate(m);
    const auto tj = std::find_if(pa.begin(), pa.end(), [](const auto& i) {
        return i.kind == AntipatternKind::TJ;
    });
    ASSERT_NE(tj, pa.end());
    const auto reqs = pmm::actualization_request(*tj, m);
    const auto rules = compile(
        pmm::actualize(pmm::library().at(AntipatternKind::TJ),
                       pmm::resolve_thresholds(reqs[0], m.thresholds)));
    ASSERT_EQ(rules.size(), 1u);
    const MonitorRule& r = rules[0];
    EXPECT_EQ(r.id, "TJ-UpdateVitalParameters");
    EXPECT_EQ(r.kind, AntipatternKind::TJ);
    EXPECT_EQ(r.subject, "UpdateVitalParameters");
    EXPECT_DOUBLE_EQ(r.window.init_s, 0.0);
    EXPECT_DOUBLE_EQ(r.window.size_s, 50.0);
    EXPECT_DOUBLE_EQ(r.window.end_s, 1500.0);
    EXPECT_EQ(r.primary.kind, AggregationKind::AvgResponseTime);
    EXPECT_EQ(r.primary.start_type, "UpdateVitalParameters.start");
    EXPECT_EQ(r.primary.end_type, "UpdateVitalParameters.end");
    EXPECT_FALSE(r.secondary.has_value());
    EXPECT_EQ(r.predicate.form, ResidualForm::ConsecutiveSlope);
    EXPECT_EQ(r.predicate.comparator, pmm::Comparator::LE);
    EXPECT_DOUBLE_EQ(r.predicate.threshold, 0.3);
    EXPECT_EQ(r.predicate.consecutive_required, 2);
    ASSERT_TRUE(r.workload.has_value());
    EXPECT_EQ(r.workload->population, 10000);
    EXPECT_DOUBLE_EQ(r.workload->think_time_s, 86400.0);
    EXPECT_EQ(r.subscriptions, (std::vector<std::string>{"UpdateVitalParameters.end",
                                                         "UpdateVitalParameters.start"}));
}

TEST(Compile, AllSixKindsCompile) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    std::vector<std::string> ids;
    for (const auto& r : rules) ids.push_back(r.id);
    EXPECT_EQ(ids, (std::vector<std::string>{
                       "Blob-AppServer-LAN", "TJ-UpdateVitalParameters", "TJ-PatientInfo",
                       "CPS-system", "Ramp-UpdateVitalParameters", "Ramp-PatientInfo",
                       "MoreIsLess-UpdateVitalParameters", "MoreIsLess-PatientInfo"}));

    // The case-study set exercises five kinds; CTH needs a remote store.
    pmm::ParameterBinding cth;
    cth["$OpI"] = std::string("Client-N1");
    pmm::EventGroup g;
    g.name = "N1";
    g.members.push_back({{"busy.cpu-N1_Set", "busy.cpu-N1", {}},
                         {"busy.cpu-N1", {{"duration", "number"}, {"resource", "string"}}}});
    cth["$res"] = std::vector<pmm::EventGroup>{g};
    cth["$Th_initSlot"] = 0.0;
    cth["$Th_sizeSlot"] = 50.0;
    cth["$Th_endSlot"] = 1500.0;
    cth["$Th_maxHwUtil"] = 0.8;
    const auto cth_rules = compile(pmm::actualize(pmm::library().at(AntipatternKind::CTH), cth));
    ASSERT_EQ(cth_rules.size(), 1u);
    EXPECT_EQ(cth_rules[0].id, "CTH-Client-N1");
    EXPECT_EQ(cth_rules[0].primary.kind, AggregationKind::Utilization);
}

TEST(Compile, NodeBalanceRule) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    const auto cps = std::find_if(rules.begin(), rules.end(), [](const MonitorRule& r) {
        return r.kind == AntipatternKind::CPS;
    });
    ASSERT_NE(cps, rules.end());
    EXPECT_EQ(cps->predicate.form, ResidualForm::Unbalance);
    EXPECT_DOUBLE_EQ(cps->predicate.threshold, 0.8);
    ASSERT_TRUE(cps->predicate.low_threshold.has_value());
    EXPECT_DOUBLE_EQ(*cps->predicate.low_threshold, 0.2);
    ASSERT_EQ(cps->primary.groups.size(), 3u);
    EXPECT_EQ(cps->primary.groups[0].name, "PDA");
    EXPECT_EQ(cps->primary.groups[0].event_types,
              (std::vector<std::string>{"busy.cpu-PDA", "busy.disk-PDA"}));
    EXPECT_EQ(cps->subscriptions.size(), 6u);  // cpu + disk on three nodes
}

TEST(Compile, ThroughputRuleCarriesConcurrencyGuard) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    const auto mil = std::find_if(rules.begin(), rules.end(), [](const MonitorRule& r) {
        return r.id == "MoreIsLess-PatientInfo";
    });
    ASSERT_NE(mil, rules.end());
    EXPECT_EQ(mil->primary.kind, AggregationKind::Throughput);
    EXPECT_EQ(mil->primary.end_type, "PatientInfo.end");
    ASSERT_TRUE(mil->secondary.has_value());
    EXPECT_EQ(mil->secondary->kind, AggregationKind::Concurrency);
    EXPECT_EQ(mil->secondary->start_type, "PatientInfo.start");
    EXPECT_DOUBLE_EQ(mil->predicate.threshold, 50.0);
    EXPECT_EQ(mil->subscriptions,
              (std::vector<std::string>{"PatientInfo.end", "PatientInfo.start"}));
}

TEST(Compile, RejectsGenericAndQualitative) {
    EXPECT_THROW(compile(pmm::library().at(AntipatternKind::TJ)), ValidationError);

    const auto m = model::load_model(kFixture);
    const auto pa = precalc::precalculate(m);
    const auto tj = std::find_if(pa.begin(), pa.end(), [](const auto& i) {
        return i.kind == AntipatternKind::TJ;
    });
    const auto reqs = pmm::actualization_request(*tj, m);
    pmm::PropertyModel actual = pmm::actualize(pmm::library().at(AntipatternKind::TJ),
                                               pmm::resolve_thresholds(reqs[0], m.thresholds));
    pmm::PropertyModel qualitative = actual;
    qualitative.properties[0].nature = pmm::PropertyNature::Qualitative;
    qualitative.properties[0].event_pattern = "some pattern";
    EXPECT_THROW(compile(qualitative), ValidationError);

    pmm::PropertyModel no_interval = actual;
    no_interval.properties[0].interval.reset();
    EXPECT_THROW(compile(no_interval), ValidationError);

    // Metric template shapes outside the operator set are named in the error.
    pmm::PropertyModel odd = actual;
    odd.templates[0].expression =
        pmm::Expr{pmm::Expr::Op::Sum, {}, {}, {pmm::Expr{pmm::Expr::Op::Count, "x", {}, {}}}};
    try {
        compile(odd);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("outside the compiler's set"), std::string::npos);
    }
}

TEST(WindowPlanMath, PartitionIsTotalAndDisjoint) {
    const WindowPlan w{0.0, 50.0, 1500.0};
    EXPECT_EQ(w.window_count(), 30);
    EXPECT_EQ(w.index_of(0.0), 0);
    EXPECT_EQ(w.index_of(49.999), 0);
    EXPECT_EQ(w.index_of(50.0), 1);
    EXPECT_EQ(w.index_of(1499.999), 29);
    EXPECT_EQ(w.index_of(1500.0), -1);   // end is exclusive
    EXPECT_EQ(w.index_of(-0.001), -1);
    EXPECT_DOUBLE_EQ(w.window_start(1), 50.0);
    EXPECT_DOUBLE_EQ(w.window_end(29), 1500.0);

    const WindowPlan off{10.0, 3.0, 19.0};  // count floors to whole windows
    EXPECT_EQ(off.window_count(), 3);
    EXPECT_EQ(off.index_of(18.9), 2);
    EXPECT_EQ(off.index_of(9.9), -1);
}

TEST(Render, ListingIsByteStable) {
    const auto m = model::load_model(kFixture);
    const auto once = compile_case_study(m);
    const auto twice = compile_case_study(m);
    ASSERT_EQ(once.size(), twice.size());
    for (std::size_t i = 0; i < once.size(); ++i)
        EXPECT_EQ(render_rule(once[i]), render_rule(twice[i]));
}

TEST(Render, TrafficJamListingCarriesIntervalAndBound) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    const auto tj = std::find_if(rules.begin(), rules.end(), [](const MonitorRule& r) {
        return r.id == "TJ-UpdateVitalParameters";
    });
    ASSERT_NE(tj, rules.end());
    const std::string listing = render_rule(*tj);
    EXPECT_NE(listing.find("0"), std::string::npos);
    EXPECT_NE(listing.find("50"), std::string::npos);
    EXPECT_NE(listing.find("1500"), std::string::npos);
    EXPECT_NE(listing.find("0.3"), std::string::npos);
    EXPECT_NE(listing.find("TJ-UpdateVitalParameters"), std::string::npos);
    EXPECT_NE(listing.find("instance: TJ"), std::string::npos);
}

TEST(Subscriptions, UnionAcrossRules) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    const std::set<std::string> u = subscription_union(rules);
    const std::set<std::string> expect = {
        "busy.LAN",          "busy.cpu-PDA",     "busy.disk-PDA",
        "busy.cpu-AppHost",  "busy.disk-AppHost", "busy.cpu-DbHost",
        "busy.disk-DbHost",  "UpdateVitalParameters.start", "UpdateVitalParameters.end",
        "PatientInfo.start", "PatientInfo.end"};
    EXPECT_EQ(u, expect);
}

TEST(RuleSerialization, RoundTripKeepsEverything) {
    const auto m = model::load_model(kFixture);
    const auto rules = compile_case_study(m);
    const std::string text = save_rules(rules);
    const auto back = load_rules_text(text);
    EXPECT_EQ(back, rules);
    EXPECT_EQ(save_rules(back), text);
    // The instance field survives the round trip.
    EXPECT_EQ(back[0].instance, "Blob(swC=AppServer)");
    EXPECT_THROW(load_rules_text("not json"), ParseError);
}

TEST(ConsecutiveDefaults, PerForm) {
    EXPECT_EQ(default_consecutive_required(ResidualForm::ThresholdExceeded), 1);
    EXPECT_EQ(default_consecutive_required(ResidualForm::Unbalance), 1);
    EXPECT_EQ(default_consecutive_required(ResidualForm::ConsecutiveSlope), 2);
    EXPECT_EQ(default_consecutive_required(ResidualForm::MonotonicRun), 2);
    EXPECT_EQ(default_consecutive_required(ResidualForm::DeclineUnderLoad), 2);
}

}  // namespace
