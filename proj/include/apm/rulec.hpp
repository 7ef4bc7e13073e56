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

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "apm/pmm.hpp"

namespace apm::rulec {

/// Aggregations the rule engine can evaluate per observation window.
enum class AggregationKind {
    AvgResponseTime,  // mean(end.ts - start.ts) over pairs completed in the window
    Utilization,      // busy-time ratio per group, max across group members
    Throughput,       // completions per second
    Concurrency,      // cumulative starts minus cumulative ends at window close
};

std::string to_string(AggregationKind k);
AggregationKind aggregation_kind_from_string(const std::string& s);

/// One observed resource: a name and the busy event types that feed it.
struct AggregationGroup {
    std::string name;
    std::vector<std::string> event_types;

    friend bool operator==(const AggregationGroup&, const AggregationGroup&) = default;
};

/// A compiled metric evaluation. Which fields are used depends on `kind`:
/// response time and concurrency use start/end types, throughput the end
/// type only, utilization the group list.
struct AggregationSpec {
    AggregationKind kind;
    std::string name;  // output column stem, e.g. "avg_rt", "utilization"
    std::string start_type;
    std::string end_type;
    std::vector<AggregationGroup> groups;

    std::vector<std::string> input_types() const;

    friend bool operator==(const AggregationSpec&, const AggregationSpec&) = default;
};

/// The fixed observation-window partition of a rule.
struct WindowPlan {
    double init_s = 0.0;
    double size_s = 0.0;
    double end_s = 0.0;

    /// Number of whole windows in [init, end).
    long window_count() const;
    /// Window index of a timestamp, or -1 when outside [init, end).
    long index_of(double t_s) const;
    double window_start(long index) const;
    double window_end(long index) const;

    friend bool operator==(const WindowPlan&, const WindowPlan&) = default;
};

/// Violation test applied to the windowed aggregate stream, plus how many
/// consecutive violations arm the detection.
struct RulePredicate {
    precalc::ResidualForm form;
    pmm::Comparator comparator = pmm::Comparator::LE;
    double threshold = 0.0;
    std::optional<double> low_threshold;
    int consecutive_required = 1;

    friend bool operator==(const RulePredicate&, const RulePredicate&) = default;
};

struct RuleWorkload {
    long population = 0;
    double think_time_s = 0.0;

    friend bool operator==(const RuleWorkload&, const RuleWorkload&) = default;
};

/// Internal rule representation consumed by the monitoring runtime. One
/// rule per property instance; subscriptions list every event type the
/// rule's aggregations read.
struct MonitorRule {
    std::string id;
    std::string instance;  // antipattern instance the rule monitors (may be empty)
    precalc::AntipatternKind kind;
    std::string property;
    std::string subject;
    WindowPlan window;
    AggregationSpec primary;
    std::optional<AggregationSpec> secondary;
    RulePredicate predicate;
    std::optional<RuleWorkload> workload;
    std::vector<std::string> subscriptions;  // sorted, unique

    friend bool operator==(const MonitorRule&, const MonitorRule&) = default;
};

/// Windows a detector must see in violation before it fires.
int default_consecutive_required(precalc::ResidualForm form);

/// Compiles a fully actualized property model into monitor rules, one per
/// property. Throws ValidationError on generic models, unknown metric or
/// template references, and template expressions outside the supported
/// operator set.
std::vector<MonitorRule> compile(const pmm::PropertyModel& actual);

/// Stable human-readable listing of one rule. Byte-identical for equal
/// rules; numbers use shortest round-trip formatting.
std::string render_rule(const MonitorRule& rule);

/// Event types needed to evaluate all given rules (probe enable set).
std::set<std::string> subscription_union(const std::vector<MonitorRule>& rules);

/// Machine-readable rule file (JSON), deterministic byte layout.
std::string save_rules(const std::vector<MonitorRule>& rules);
std::vector<MonitorRule> load_rules_text(const std::string& text);
std::vector<MonitorRule> load_rules(const std::string& path);
void save_rules_file(const std::vector<MonitorRule>& rules, const std::string& path);

}  // namespace apm::rulec
