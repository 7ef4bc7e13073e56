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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "apm/common.hpp"

namespace apm::model {

using nlohmann::json;

namespace {

constexpr double kMsPerS = 1000.0;

double require_number(const json& j, const std::string& ctx, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number())
        throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
    return j.at(key).get<double>();
}

long require_integer(const json& j, const std::string& ctx, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw ParseError(ctx + ": missing or non-integer field '" + key + "'");
    return j.at(key).get<long>();
}

std::string require_string(const json& j, const std::string& ctx, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw ParseError(ctx + ": missing or non-string field '" + key + "'");
    return j.at(key).get<std::string>();
}

ThresholdSet parse_thresholds(const json& tj) {
    ThresholdSet t;
    t.th_maxConnects = require_integer(tj, "thresholds", "th_maxConnects");
    t.th_maxMsgs = require_integer(tj, "thresholds", "th_maxMsgs");
    t.th_maxHwUtil = require_number(tj, "thresholds", "th_maxHwUtil");
    t.th_maxNetUtil = require_number(tj, "thresholds", "th_maxNetUtil");
    t.th_initSlot_s = require_number(tj, "thresholds", "th_initSlot") / kMsPerS;
    t.th_sizeSlot_s = require_number(tj, "thresholds", "th_sizeSlot") / kMsPerS;
    t.th_endSlot_s = require_number(tj, "thresholds", "th_endSlot") / kMsPerS;
    t.th_OpRtVar_s = require_number(tj, "thresholds", "th_OpRtVar") / kMsPerS;
    if (tj.contains("th_maxDbMsgs")) t.th_maxDbMsgs = tj.at("th_maxDbMsgs").get<long>();
    if (tj.contains("th_minHwUtil")) t.th_minHwUtil = tj.at("th_minHwUtil").get<double>();
    if (tj.contains("th_maxParallelism"))
        t.th_maxParallelism = tj.at("th_maxParallelism").get<long>();
    return t;
}

}  // namespace

const Component* SystemModel::find_component(const std::string& name) const {
    for (const auto& c : components)
        if (c.name == name) return &c;
    return nullptr;
}

const Scenario* SystemModel::find_scenario(const std::string& name) const {
    for (const auto& s : scenarios)
        if (s.name == name) return &s;
    return nullptr;
}

const ProcessingNode* SystemModel::find_node(const std::string& name) const {
    for (const auto& n : nodes)
        if (n.name == name) return &n;
    return nullptr;
}

const NetworkLink* SystemModel::find_link(const std::string& name) const {
    for (const auto& l : networks)
        if (l.name == name) return &l;
    return nullptr;
}

std::string SystemModel::node_of(const std::string& component) const {
    auto it = deployment.find(component);
    return it == deployment.end() ? std::string{} : it->second;
}

const NetworkLink* SystemModel::link_between(const std::string& a, const std::string& b) const {
    for (const auto& l : networks) {
        if ((l.endpoint_a == a && l.endpoint_b == b) || (l.endpoint_a == b && l.endpoint_b == a))
            return &l;
    }
    return nullptr;
}

long DerivedMetrics::connections_of(const std::string& c) const {
    auto it = connections.find(c);
    return it == connections.end() ? 0 : it->second;
}

long DerivedMetrics::msgs(const std::string& c, const std::string& scenario) const {
    auto it = messages_sent.find(c);
    if (it == messages_sent.end()) return 0;
    auto jt = it->second.find(scenario);
    return jt == it->second.end() ? 0 : jt->second;
}

long DerivedMetrics::db_msgs(const std::string& c, const std::string& scenario) const {
    auto it = db_messages_sent.find(c);
    if (it == db_messages_sent.end()) return 0;
    auto jt = it->second.find(scenario);
    return jt == it->second.end() ? 0 : jt->second;
}

SystemModel load_model_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file is not well-formed JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("model file root must be an object");

    SystemModel m;
    if (j.contains("name")) m.name = j.at("name").get<std::string>();
    if (j.contains("time_unit")) {
        m.source_time_unit = j.at("time_unit").get<std::string>();
        if (m.source_time_unit != "ms")
            throw ParseError("unsupported time_unit '" + m.source_time_unit + "' (expected \"ms\")");
    }

    for (const auto& cj : j.value("components", json::array())) {
        Component c;
        c.name = require_string(cj, "component", "name");
        c.kind = cj.value("kind", "component");
        c.is_data_store = cj.value("is_data_store", false);
        m.components.push_back(std::move(c));
    }
    for (const auto& cj : j.value("connectors", json::array())) {
        Connector c;
        c.from = require_string(cj, "connector", "from");
        c.to = require_string(cj, "connector", "to");
        m.connectors.push_back(std::move(c));
    }
    for (const auto& sj : j.value("scenarios", json::array())) {
        Scenario s;
        s.name = require_string(sj, "scenario", "name");
        for (const auto& mj : sj.value("messages", json::array())) {
            Message msg;
            msg.sender = require_string(mj, "message", "sender");
            msg.receiver = require_string(mj, "message", "receiver");
            msg.size_mbit = mj.value("size_mbit", 0.0);
            msg.cpu_instructions = mj.value("cpu_instructions", 0L);
            msg.disk_accesses = mj.value("disk_accesses", 0L);
            s.messages.push_back(std::move(msg));
        }
        if (sj.contains("workload")) {
            const auto& wj = sj.at("workload");
            s.workload.population = require_integer(wj, "workload of " + s.name, "population");
            s.workload.think_time_s =
                require_number(wj, "workload of " + s.name, "think_time") / kMsPerS;
        }
        m.scenarios.push_back(std::move(s));
    }
    for (const auto& nj : j.value("nodes", json::array())) {
        ProcessingNode n;
        n.name = require_string(nj, "node", "name");
        n.cpu_time_per_instruction_s =
            require_number(nj, "node " + n.name, "cpu_time_per_instruction_ms") / kMsPerS;
        n.disk_time_per_access_s =
            require_number(nj, "node " + n.name, "disk_time_per_access_ms") / kMsPerS;
        m.nodes.push_back(std::move(n));
    }
    for (const auto& lj : j.value("networks", json::array())) {
        NetworkLink l;
        l.name = require_string(lj, "network", "name");
        const auto& ep = lj.contains("endpoints") ? lj.at("endpoints") : json{};
        if (!ep.is_array() || ep.size() != 2)
            throw ParseError("network " + l.name + ": 'endpoints' must be a pair of node names");
        l.endpoint_a = ep.at(0).get<std::string>();
        l.endpoint_b = ep.at(1).get<std::string>();
        l.bandwidth_mbit_per_s = require_number(lj, "network " + l.name, "bandwidth_mbit_per_s");
        l.is_delay_center = lj.value("is_delay_center", false);
        m.networks.push_back(std::move(l));
    }
    if (j.contains("deployment")) {
        if (!j.at("deployment").is_object())
            throw ParseError("'deployment' must map component names to node names");
        for (const auto& [comp, node] : j.at("deployment").items())
            m.deployment[comp] = node.get<std::string>();
    }
    if (j.contains("thresholds")) m.thresholds = parse_thresholds(j.at("thresholds"));

    auto violations = validate(m);
    if (!violations.empty()) {
        const auto& v = violations.front();
        throw ValidationError(v.element + ": " + v.rule + " (" + v.detail + ")");
    }
    return m;
}

SystemModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_model_text(buf.str());
}

ThresholdSet load_thresholds_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid thresholds JSON: ") + e.what());
    }
    if (j.is_object() && j.contains("thresholds")) return parse_thresholds(j.at("thresholds"));
    if (j.is_object()) return parse_thresholds(j);
    throw ParseError("thresholds file must be a JSON object");
}

std::string save_model(const SystemModel& m) {
    SystemModel s = m;  // canonical ordering below
    std::sort(s.components.begin(), s.components.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    std::sort(s.connectors.begin(), s.connectors.end());
    std::sort(s.scenarios.begin(), s.scenarios.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    std::sort(s.nodes.begin(), s.nodes.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    std::sort(s.networks.begin(), s.networks.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });

    json j;
    j["name"] = s.name;
    j["time_unit"] = s.source_time_unit;
    j["components"] = json::array();
    for (const auto& c : s.components)
        j["components"].push_back({{"name", c.name}, {"kind", c.kind}, {"is_data_store", c.is_data_store}});
    j["connectors"] = json::array();
    for (const auto& c : s.connectors)
        j["connectors"].push_back({{"from", c.from}, {"to", c.to}});
    j["scenarios"] = json::array();
    for (const auto& sc : s.scenarios) {
        json sj{{"name", sc.name}};
        sj["workload"] = {{"population", sc.workload.population},
                          {"think_time", sc.workload.think_time_s * kMsPerS}};
        sj["messages"] = json::array();
        for (const auto& msg : sc.messages)
            sj["messages"].push_back({{"sender", msg.sender},
                                      {"receiver", msg.receiver},
                                      {"size_mbit", msg.size_mbit},
                                      {"cpu_instructions", msg.cpu_instructions},
                                      {"disk_accesses", msg.disk_accesses}});
        j["scenarios"].push_back(std::move(sj));
    }
    j["nodes"] = json::array();
    for (const auto& n : s.nodes)
        j["nodes"].push_back({{"name", n.name},
                              {"cpu_time_per_instruction_ms", n.cpu_time_per_instruction_s * kMsPerS},
                              {"disk_time_per_access_ms", n.disk_time_per_access_s * kMsPerS}});
    j["networks"] = json::array();
    for (const auto& l : s.networks)
        j["networks"].push_back({{"name", l.name},
                                 {"endpoints", {l.endpoint_a, l.endpoint_b}},
                                 {"bandwidth_mbit_per_s", l.bandwidth_mbit_per_s},
                                 {"is_delay_center", l.is_delay_center}});
    j["deployment"] = json::object();
    for (const auto& [c, n] : s.deployment) j["deployment"][c] = n;

    const ThresholdSet& t = s.thresholds;
    json tj{{"th_maxConnects", t.th_maxConnects},
            {"th_maxMsgs", t.th_maxMsgs},
            {"th_maxHwUtil", t.th_maxHwUtil},
            {"th_maxNetUtil", t.th_maxNetUtil},
            {"th_initSlot", t.th_initSlot_s * kMsPerS},
            {"th_sizeSlot", t.th_sizeSlot_s * kMsPerS},
            {"th_endSlot", t.th_endSlot_s * kMsPerS},
            {"th_OpRtVar", t.th_OpRtVar_s * kMsPerS}};
    if (t.th_maxDbMsgs) tj["th_maxDbMsgs"] = *t.th_maxDbMsgs;
    if (t.th_minHwUtil) tj["th_minHwUtil"] = *t.th_minHwUtil;
    if (t.th_maxParallelism) tj["th_maxParallelism"] = *t.th_maxParallelism;
    j["thresholds"] = std::move(tj);

    return j.dump(2) + "\n";
}

void save_model_file(const SystemModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model file '" + path + "'");
    out << save_model(m);
}

std::vector<Violation> validate(const SystemModel& m) {
    std::vector<Violation> v;
    std::set<std::string> comp_names;
    for (const auto& c : m.components) {
        if (c.name.empty()) v.push_back({"component", "nonempty-name", "component with empty name"});
        if (!comp_names.insert(c.name).second)
            v.push_back({c.name, "unique-component-name", "duplicate component '" + c.name + "'"});
    }
    std::set<std::string> node_names;
    for (const auto& n : m.nodes) {
        if (!node_names.insert(n.name).second)
            v.push_back({n.name, "unique-node-name", "duplicate node '" + n.name + "'"});
        if (n.cpu_time_per_instruction_s <= 0.0)
            v.push_back({n.name, "positive-cpu-rate", "cpu_time_per_instruction_ms must be > 0"});
        if (n.disk_time_per_access_s <= 0.0)
            v.push_back({n.name, "positive-disk-rate", "disk_time_per_access_ms must be > 0"});
    }
    for (const auto& c : m.connectors) {
        if (c.from == c.to)
            v.push_back({c.from, "self-connector", "connector endpoints must differ"});
        for (const auto& end : {c.from, c.to})
            if (!comp_names.count(end))
                v.push_back({end, "referential-integrity",
                             "connector endpoint '" + end + "' is not a component"});
    }
    for (const auto& s : m.scenarios) {
        if (s.workload.population < 1)
            v.push_back({s.name, "population-at-least-one", "workload population must be >= 1"});
        if (s.workload.think_time_s < 0.0)
            v.push_back({s.name, "nonnegative-think-time", "think_time must be >= 0"});
        for (const auto& msg : s.messages) {
            for (const auto& endp : {msg.sender, msg.receiver})
                if (!comp_names.count(endp))
                    v.push_back({endp, "referential-integrity",
                                 "message endpoint '" + endp + "' in scenario '" + s.name +
                                     "' is not a component"});
            if (msg.size_mbit < 0.0)
                v.push_back({s.name, "nonnegative-resources", "message size_mbit must be >= 0"});
            if (msg.cpu_instructions < 0 || msg.disk_accesses < 0)
                v.push_back({s.name, "nonnegative-resources",
                             "message resource figures must be >= 0"});
        }
    }
    for (const auto& l : m.networks) {
        if (l.endpoint_a == l.endpoint_b)
            v.push_back({l.name, "distinct-endpoints", "network endpoints must differ"});
        for (const auto& e : {l.endpoint_a, l.endpoint_b})
            if (!node_names.count(e))
                v.push_back({l.name, "referential-integrity",
                             "network endpoint '" + e + "' is not a node"});
        if (l.bandwidth_mbit_per_s <= 0.0)
            v.push_back({l.name, "positive-bandwidth", "bandwidth_mbit_per_s must be > 0"});
    }
    for (const auto& c : m.components) {
        auto it = m.deployment.find(c.name);
        if (it == m.deployment.end())
            v.push_back({c.name, "total-deployment", "component '" + c.name + "' is not deployed"});
        else if (!node_names.count(it->second))
            v.push_back({c.name, "referential-integrity",
                         "deployment target '" + it->second + "' is not a node"});
    }
    for (const auto& [comp, node] : m.deployment)
        if (!comp_names.count(comp))
            v.push_back({comp, "referential-integrity",
                         "deployment key '" + comp + "' is not a component"});

    const ThresholdSet& t = m.thresholds;
    if (t.th_sizeSlot_s <= 0.0)
        v.push_back({"thresholds", "positive-slot-size", "th_sizeSlot must be > 0"});
    if (t.th_initSlot_s >= t.th_endSlot_s)
        v.push_back({"thresholds", "slot-ordering", "th_initSlot must be < th_endSlot"});
    if (t.th_sizeSlot_s > 0.0) {
        double windows = (t.th_endSlot_s - t.th_initSlot_s) / t.th_sizeSlot_s;
        if (std::abs(windows - std::round(windows)) > 1e-9 * std::max(1.0, windows))
            v.push_back({"thresholds", "slot-divisibility",
                         "(th_endSlot - th_initSlot) must be divisible by th_sizeSlot"});
    }
    if (t.th_minHwUtil && *t.th_minHwUtil >= t.th_maxHwUtil)
        v.push_back({"thresholds", "utilization-band", "th_minHwUtil must be < th_maxHwUtil"});
    for (double u : {t.th_maxHwUtil, t.th_maxNetUtil})
        if (u < 0.0 || u > 1.0)
            v.push_back({"thresholds", "utilization-range", "utilization thresholds must be in [0,1]"});
    return v;
}

DerivedMetrics derived_metrics(const SystemModel& m) {
    DerivedMetrics d;
    for (const auto& c : m.components) {
        d.connections[c.name] = 0;
        d.messages_sent[c.name] = {};
        d.db_messages_sent[c.name] = {};
    }
    for (const auto& c : m.connectors) {
        d.connections[c.from] += 1;
        d.connections[c.to] += 1;
    }
    for (const auto& s : m.scenarios) {
        for (const auto& msg : s.messages) {
            d.messages_sent[msg.sender][s.name] += 1;
            const Component* rc = m.find_component(msg.receiver);
            if (rc && rc->is_data_store) d.db_messages_sent[msg.sender][s.name] += 1;
        }
    }
    return d;
}

}  // namespace apm::model
