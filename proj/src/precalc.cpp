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
#include "apm/precalc.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "apm/common.hpp"

namespace apm::precalc {

using nlohmann::json;
using model::SystemModel;

std::string to_string(AntipatternKind k) {
    switch (k) {
        case AntipatternKind::Blob: return "Blob";
        case AntipatternKind::CTH: return "CTH";
        case AntipatternKind::TJ: return "TJ";
        case AntipatternKind::CPS: return "CPS";
        case AntipatternKind::Ramp: return "Ramp";
        case AntipatternKind::MoreIsLess: return "MoreIsLess";
    }
    return "?";
}

AntipatternKind kind_from_string(const std::string& s) {
    for (auto k : all_kinds())
        if (to_string(k) == s) return k;
    throw ParseError("unknown antipattern kind '" + s + "'");
}

bool is_performance_view_only(AntipatternKind k) {
    return k == AntipatternKind::TJ || k == AntipatternKind::CPS ||
           k == AntipatternKind::Ramp || k == AntipatternKind::MoreIsLess;
}

const std::vector<AntipatternKind>& all_kinds() {
    static const std::vector<AntipatternKind> kinds{
        AntipatternKind::Blob, AntipatternKind::CTH,  AntipatternKind::TJ,
        AntipatternKind::CPS,  AntipatternKind::Ramp, AntipatternKind::MoreIsLess};
    return kinds;
}

std::string to_string(ResidualForm f) {
    switch (f) {
        case ResidualForm::ThresholdExceeded: return "threshold_exceeded";
        case ResidualForm::ConsecutiveSlope: return "consecutive_slope";
        case ResidualForm::MonotonicRun: return "monotonic_run";
        case ResidualForm::Unbalance: return "unbalance";
        case ResidualForm::DeclineUnderLoad: return "decline_under_load";
    }
    return "?";
}

ResidualForm residual_form_from_string(const std::string& s) {
    for (auto f : {ResidualForm::ThresholdExceeded, ResidualForm::ConsecutiveSlope,
                   ResidualForm::MonotonicRun, ResidualForm::Unbalance,
                   ResidualForm::DeclineUnderLoad})
        if (to_string(f) == s) return f;
    throw ParseError("unknown residual form '" + s + "'");
}

namespace {

std::string metric_to_string(IndexMetric m) {
    switch (m) {
        case IndexMetric::Utilization: return "utilization";
        case IndexMetric::ResponseTime: return "response_time";
        case IndexMetric::Throughput: return "throughput";
        case IndexMetric::Concurrency: return "concurrency";
    }
    return "?";
}

IndexMetric metric_from_string(const std::string& s) {
    for (auto m : {IndexMetric::Utilization, IndexMetric::ResponseTime, IndexMetric::Throughput,
                   IndexMetric::Concurrency})
        if (metric_to_string(m) == s) return m;
    throw ParseError("unknown index metric '" + s + "'");
}

std::string target_to_string(IndexTarget t) {
    switch (t) {
        case IndexTarget::Node: return "node";
        case IndexTarget::Link: return "link";
        case IndexTarget::ScenarioTarget: return "scenario";
    }
    return "?";
}

IndexTarget target_from_string(const std::string& s) {
    for (auto t : {IndexTarget::Node, IndexTarget::Link, IndexTarget::ScenarioTarget})
        if (target_to_string(t) == s) return t;
    throw ParseError("unknown index target kind '" + s + "'");
}

}  // namespace

std::string AntipatternInstance::id() const {
    if (bindings.empty()) return to_string(kind);
    std::string s = to_string(kind) + "(";
    bool first = true;
    for (const auto& [role, element] : bindings) {
        if (!first) s += ",";
        s += role + "=" + element;
        first = false;
    }
    return s + ")";
}

std::optional<AntipatternInstance> blob_design_predicate(const SystemModel& m,
                                                         const model::Component& c) {
    auto d = model::derived_metrics(m);
    if (d.connections_of(c.name) <= m.thresholds.th_maxConnects) return std::nullopt;

    // Scenarios where the component exceeds the sent-message threshold, and
    // the receivers of its traffic there.
    std::set<std::string> peers;
    bool triggered = false;
    for (const auto& s : m.scenarios) {
        if (d.msgs(c.name, s.name) <= m.thresholds.th_maxMsgs) continue;
        triggered = true;
        for (const auto& msg : s.messages)
            if (msg.sender == c.name && msg.receiver != c.name) peers.insert(msg.receiver);
    }
    if (!triggered) return std::nullopt;

    AntipatternInstance inst;
    inst.kind = AntipatternKind::Blob;
    inst.bindings["swC"] = c.name;

    const std::string home = m.node_of(c.name);
    std::set<std::string> remote_links;
    for (const auto& p : peers) {
        const std::string pn = m.node_of(p);
        if (pn == home) continue;
        const model::NetworkLink* link = m.link_between(home, pn);
        if (link) remote_links.insert(link->name);
    }
    if (remote_links.empty()) {
        inst.residual.form = ResidualForm::ThresholdExceeded;
        inst.residual.indices = {{IndexMetric::Utilization, IndexTarget::Node, home}};
        inst.residual.threshold_refs = {"th_maxHwUtil"};
    } else {
        inst.residual.form = ResidualForm::ThresholdExceeded;
        for (const auto& l : remote_links)
            inst.residual.indices.push_back({IndexMetric::Utilization, IndexTarget::Link, l});
        inst.residual.threshold_refs = {"th_maxNetUtil"};
    }
    return inst;
}

std::optional<AntipatternInstance> cth_design_predicate(const SystemModel& m,
                                                        const model::Component& c) {
    auto d = model::derived_metrics(m);
    const long th = m.thresholds.effective_max_db_msgs();
    const std::string home = m.node_of(c.name);

    // Remote data stores the component floods with requests.
    std::set<std::string> store_nodes;
    for (const auto& s : m.scenarios) {
        if (d.db_msgs(c.name, s.name) <= th) continue;
        for (const auto& msg : s.messages) {
            if (msg.sender != c.name) continue;
            const model::Component* rc = m.find_component(msg.receiver);
            if (!rc || !rc->is_data_store) continue;
            const std::string sn = m.node_of(rc->name);
            if (sn != home) store_nodes.insert(sn);
        }
    }
    if (store_nodes.empty()) return std::nullopt;

    AntipatternInstance inst;
    inst.kind = AntipatternKind::CTH;
    inst.bindings["swC"] = c.name;
    inst.residual.form = ResidualForm::ThresholdExceeded;
    for (const auto& n : store_nodes)
        inst.residual.indices.push_back({IndexMetric::Utilization, IndexTarget::Node, n});
    inst.residual.threshold_refs = {"th_maxHwUtil"};
    return inst;
}

namespace {

AntipatternInstance performance_only_instance(AntipatternKind k, const SystemModel& m) {
    AntipatternInstance inst;
    inst.kind = k;
    switch (k) {
        case AntipatternKind::TJ:
            inst.residual.form = ResidualForm::ConsecutiveSlope;
            for (const auto& s : m.scenarios)
                inst.residual.indices.push_back(
                    {IndexMetric::ResponseTime, IndexTarget::ScenarioTarget, s.name});
            inst.residual.threshold_refs = {"th_OpRtVar"};
            break;
        case AntipatternKind::Ramp:
            inst.residual.form = ResidualForm::MonotonicRun;
            for (const auto& s : m.scenarios)
                inst.residual.indices.push_back(
                    {IndexMetric::ResponseTime, IndexTarget::ScenarioTarget, s.name});
            inst.residual.threshold_refs = {"th_OpRtVar"};
            break;
        case AntipatternKind::CPS:
            inst.residual.form = ResidualForm::Unbalance;
            for (const auto& n : m.nodes)
                inst.residual.indices.push_back({IndexMetric::Utilization, IndexTarget::Node, n.name});
            inst.residual.threshold_refs = {"th_maxHwUtil", "th_minHwUtil"};
            break;
        case AntipatternKind::MoreIsLess:
            inst.residual.form = ResidualForm::DeclineUnderLoad;
            for (const auto& s : m.scenarios) {
                inst.residual.indices.push_back(
                    {IndexMetric::Throughput, IndexTarget::ScenarioTarget, s.name});
                inst.residual.indices.push_back(
                    {IndexMetric::Concurrency, IndexTarget::ScenarioTarget, s.name});
            }
            inst.residual.threshold_refs = {"th_maxParallelism"};
            break;
        default:
            throw Error("not a performance-view-only kind");
    }
    return inst;
}

}  // namespace

std::vector<AntipatternInstance> precalculate(const SystemModel& m) {
    std::vector<AntipatternInstance> pa;
    for (const auto& c : m.components) {
        if (auto blob = blob_design_predicate(m, c)) pa.push_back(std::move(*blob));
    }
    for (const auto& c : m.components) {
        if (auto cth = cth_design_predicate(m, c)) pa.push_back(std::move(*cth));
    }
    for (auto k : {AntipatternKind::TJ, AntipatternKind::CPS, AntipatternKind::Ramp,
                   AntipatternKind::MoreIsLess})
        pa.push_back(performance_only_instance(k, m));
    return pa;
}

namespace {

json index_to_json(const PerformanceIndexRef& ix) {
    return {{"metric", metric_to_string(ix.metric)},
            {"target_kind", target_to_string(ix.target_kind)},
            {"target", ix.target}};
}

PerformanceIndexRef index_from_json(const json& j) {
    PerformanceIndexRef ix;
    ix.metric = metric_from_string(j.at("metric").get<std::string>());
    ix.target_kind = target_from_string(j.at("target_kind").get<std::string>());
    ix.target = j.at("target").get<std::string>();
    return ix;
}

}  // namespace

std::string save_instances(const std::vector<AntipatternInstance>& pa) {
    json out;
    out["instances"] = json::array();
    for (const auto& inst : pa) {
        json ij;
        ij["kind"] = to_string(inst.kind);
        ij["bindings"] = json::object();
        for (const auto& [role, el] : inst.bindings) ij["bindings"][role] = el;
        ij["residual"] = {{"form", to_string(inst.residual.form)},
                          {"indices", json::array()},
                          {"threshold_refs", inst.residual.threshold_refs}};
        for (const auto& ix : inst.residual.indices)
            ij["residual"]["indices"].push_back(index_to_json(ix));
        out["instances"].push_back(std::move(ij));
    }
    return out.dump(2) + "\n";
}

std::vector<AntipatternInstance> load_instances_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("PA file is not well-formed JSON: ") + e.what());
    }
    std::vector<AntipatternInstance> pa;
    for (const auto& ij : j.value("instances", json::array())) {
        AntipatternInstance inst;
        inst.kind = kind_from_string(ij.at("kind").get<std::string>());
        const json bindings = ij.value("bindings", json::object());
        for (const auto& [role, el] : bindings.items())
            inst.bindings[role] = el.get<std::string>();
        const auto& rj = ij.at("residual");
        inst.residual.form = residual_form_from_string(rj.at("form").get<std::string>());
        for (const auto& ixj : rj.at("indices")) inst.residual.indices.push_back(index_from_json(ixj));
        inst.residual.threshold_refs =
            rj.value("threshold_refs", std::vector<std::string>{});
        pa.push_back(std::move(inst));
    }
    return pa;
}

std::vector<AntipatternInstance> load_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open PA file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_instances_text(buf.str());
}

bool structurally_equal(const SystemModel& a, const SystemModel& b) {
    auto strip = [](const SystemModel& m) {
        SystemModel s = m;
        for (auto& n : s.nodes) {
            n.cpu_time_per_instruction_s = 0.0;
            n.disk_time_per_access_s = 0.0;
        }
        for (auto& l : s.networks) l.bandwidth_mbit_per_s = 0.0;
        return s;
    };
    return strip(a) == strip(b);
}

Refactoring hardware_rescale(const SystemModel& m, const std::string& node,
                             double service_time_factor, double applied_at_s) {
    if (service_time_factor <= 0.0) throw ValidationError("rescale factor must be > 0");
    Refactoring r;
    r.tag = RefactoringTag::Hardware;
    r.new_model = m;
    r.applied_at_s = applied_at_s;
    bool found = false;
    for (auto& n : r.new_model.nodes) {
        if (n.name != node) continue;
        n.cpu_time_per_instruction_s *= service_time_factor;
        n.disk_time_per_access_s *= service_time_factor;
        found = true;
    }
    if (!found) throw ValidationError("unknown node '" + node + "'");
    return r;
}

SystemConfiguration transition(const SystemConfiguration& sc, const Refactoring& r) {
    SystemConfiguration next;
    next.epoch_s = r.applied_at_s;
    next.model = r.new_model;
    if (r.tag == RefactoringTag::Hardware) {
        if (!structurally_equal(sc.model, r.new_model))
            throw ValidationError(
                "hardware refactoring must not edit static/dynamic/deployment structure");
        next.candidates = sc.candidates;
        next.monitor_ids = sc.monitor_ids;
    } else {
        next.candidates = precalculate(r.new_model);
        next.monitor_ids.clear();  // recompiled by the caller from the new PA set
    }
    return next;
}

}  // namespace apm::precalc
