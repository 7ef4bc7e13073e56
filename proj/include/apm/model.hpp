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
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace apm::model {

/// A software element (class, component, service). `is_data_store` marks
/// persistent stores so database-bound traffic can be told apart from
/// ordinary messaging.
struct Component {
    std::string name;
    std::string kind;          // free-form tag, e.g. "component", "service"
    bool is_data_store = false;

    friend bool operator==(const Component&, const Component&) = default;
};

/// Static relationship between two components. Stored directed as written
/// in the model file; connection counting treats it as undirected.
struct Connector {
    std::string from;
    std::string to;

    friend bool operator==(const Connector&, const Connector&) = default;
    friend auto operator<=>(const Connector&, const Connector&) = default;
};

/// One interaction step: `sender` transmits to `receiver`, consuming the
/// listed resources on the sender's node and `size_mbit` on the network
/// between the two nodes (nothing if co-deployed or a self-message).
struct Message {
    std::string sender;
    std::string receiver;
    double size_mbit = 0.0;
    long cpu_instructions = 0;
    long disk_accesses = 0;

    friend bool operator==(const Message&, const Message&) = default;
};

/// Closed workload: `population` users cycling with `think_time_s` between
/// successive requests.
struct ClosedWorkloadSpec {
    long population = 1;
    double think_time_s = 0.0;

    friend bool operator==(const ClosedWorkloadSpec&, const ClosedWorkloadSpec&) = default;
};

/// A service scenario: an ordered message sequence plus its closed workload.
struct Scenario {
    std::string name;
    std::vector<Message> messages;  // total order, as listed
    ClosedWorkloadSpec workload;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Hardware node. Service times are stored in seconds per unit of work;
/// the model file carries them in milliseconds.
struct ProcessingNode {
    std::string name;
    double cpu_time_per_instruction_s = 0.0;
    double disk_time_per_access_s = 0.0;

    friend bool operator==(const ProcessingNode&, const ProcessingNode&) = default;
};

/// Network link between two nodes. Delay centers model pure latency
/// (infinite servers); others queue like any single-server device.
struct NetworkLink {
    std::string name;
    std::string endpoint_a;
    std::string endpoint_b;
    double bandwidth_mbit_per_s = 0.0;
    bool is_delay_center = false;

    friend bool operator==(const NetworkLink&, const NetworkLink&) = default;
};

/// Detection thresholds. Counting thresholds gate design predicates with
/// strict comparisons (> th); utilization and slope thresholds bind runtime
/// rules. Slot fields are in seconds internally. The last three are only
/// needed by CTH, CPS and More-is-Less rules and may be absent.
struct ThresholdSet {
    long th_maxConnects = 0;
    long th_maxMsgs = 0;
    double th_maxHwUtil = 0.0;
    double th_maxNetUtil = 0.0;
    double th_initSlot_s = 0.0;
    double th_sizeSlot_s = 0.0;
    double th_endSlot_s = 0.0;
    double th_OpRtVar_s = 0.0;
    std::optional<long> th_maxDbMsgs;       // defaults to th_maxMsgs
    std::optional<double> th_minHwUtil;
    std::optional<long> th_maxParallelism;

    long effective_max_db_msgs() const { return th_maxDbMsgs.value_or(th_maxMsgs); }

    friend bool operator==(const ThresholdSet&, const ThresholdSet&) = default;
};

/// The four-view system description (static, dynamic, deployment views plus
/// threshold bindings). Immutable after load; shared read-only.
struct SystemModel {
    std::string name = "system";
    std::string source_time_unit = "ms";  // unit of the file this model came from
    std::vector<Component> components;
    std::vector<Connector> connectors;
    std::vector<Scenario> scenarios;
    std::vector<ProcessingNode> nodes;
    std::vector<NetworkLink> networks;
    std::map<std::string, std::string> deployment;  // component -> node
    ThresholdSet thresholds;

    const Component* find_component(const std::string& name) const;
    const Scenario* find_scenario(const std::string& name) const;
    const ProcessingNode* find_node(const std::string& name) const;
    const NetworkLink* find_link(const std::string& name) const;
    /// Node a component is deployed on; empty string if unmapped.
    std::string node_of(const std::string& component) const;
    /// Link whose endpoints are exactly {a, b}, or nullptr.
    const NetworkLink* link_between(const std::string& a, const std::string& b) const;

    friend bool operator==(const SystemModel&, const SystemModel&) = default;
};

/// One violated invariant: which element, which rule, human-readable detail.
struct Violation {
    std::string element;
    std::string rule;
    std::string detail;
};

/// Per-component counts consumed by the design predicates.
struct DerivedMetrics {
    /// Undirected incident connector count per component.
    std::map<std::string, long> connections;
    /// messages[component][scenario] = messages sent by component in scenario.
    std::map<std::string, std::map<std::string, long>> messages_sent;
    /// db_messages[component][scenario] = messages sent to a data store.
    std::map<std::string, std::map<std::string, long>> db_messages_sent;

    long connections_of(const std::string& c) const;
    long msgs(const std::string& c, const std::string& scenario) const;
    long db_msgs(const std::string& c, const std::string& scenario) const;
};

/// Load and validate a model file (JSON tree, times in milliseconds).
/// Throws ParseError on malformed text, ValidationError naming the first
/// violated invariant otherwise.
SystemModel load_model(const std::string& path);

/// Same, from an in-memory JSON string.
SystemModel load_model_text(const std::string& text);

/// Standalone threshold bindings (a bare thresholds object, or a model-style
/// object with a "thresholds" member). Times in milliseconds, as in models.
ThresholdSet load_thresholds_text(const std::string& text);

/// Canonical serialization: sorted elements, milliseconds for time fields.
/// load_model_text(save_model(m)) == m.
std::string save_model(const SystemModel& m);
void save_model_file(const SystemModel& m, const std::string& path);

/// All invariant violations; empty iff the model is valid.
std::vector<Violation> validate(const SystemModel& m);

/// Connection / message / db-message counts for every component.
DerivedMetrics derived_metrics(const SystemModel& m);

}  // namespace apm::model
