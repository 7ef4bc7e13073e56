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

#include "apm/model.hpp"

namespace apm::precalc {

/// The six antipatterns this toolkit detects. Blob and CTH carry design
/// sub-predicates evaluated off-line; the other four live in the
/// performance view only and are always monitored.
enum class AntipatternKind { Blob, CTH, TJ, CPS, Ramp, MoreIsLess };

std::string to_string(AntipatternKind k);
AntipatternKind kind_from_string(const std::string& s);
bool is_performance_view_only(AntipatternKind k);
/// All kinds, in canonical output order.
const std::vector<AntipatternKind>& all_kinds();

/// What a performance index measures and on which model element.
enum class IndexMetric { Utilization, ResponseTime, Throughput, Concurrency };

enum class IndexTarget { Node, Link, ScenarioTarget };

struct PerformanceIndexRef {
    IndexMetric metric;
    IndexTarget target_kind;
    std::string target;  // node, link, or scenario name

    friend bool operator==(const PerformanceIndexRef&, const PerformanceIndexRef&) = default;
};

/// Shape of the runtime check left over after pre-calculus.
enum class ResidualForm {
    ThresholdExceeded,   // any index >= its threshold in some window
    ConsecutiveSlope,    // windowed-average slope > threshold, repeated
    MonotonicRun,        // strictly increasing run with total rise > threshold
    Unbalance,           // one node saturated while another idles
    DeclineUnderLoad,    // throughput falls while offered concurrency is high
};

std::string to_string(ResidualForm f);
ResidualForm residual_form_from_string(const std::string& s);

/// The runtime-checkable remainder of an antipattern formula: which indices
/// to watch, how to compare them, and which ThresholdSet fields bind the
/// comparison. For ThresholdExceeded with several indices the predicate is
/// the disjunction over indices.
struct ResidualPredicate {
    ResidualForm form;
    std::vector<PerformanceIndexRef> indices;
    std::vector<std::string> threshold_refs;  // ThresholdSet field names

    friend bool operator==(const ResidualPredicate&, const ResidualPredicate&) = default;
};

/// A candidate produced by pre-calculus: its design views already hold (or
/// are vacuous); only `residual` remains to be verified at runtime.
struct AntipatternInstance {
    AntipatternKind kind;
    std::map<std::string, std::string> bindings;  // role -> model element
    ResidualPredicate residual;

    /// Stable id, e.g. "Blob(swC=AppServer)" or "TJ".
    std::string id() const;

    friend bool operator==(const AntipatternInstance&, const AntipatternInstance&) = default;
};

/// Evaluate the Blob design sub-predicates for one component. An instance
/// is produced iff the component exceeds the connection threshold and, in
/// at least one scenario, the sent-message threshold. The residual watches
/// the component's node when all traffic peers are co-deployed, otherwise
/// the links toward remote peers.
std::optional<AntipatternInstance> blob_design_predicate(const model::SystemModel& m,
                                                         const model::Component& c);

/// Evaluate the CTH design sub-predicates for one component: many requests
/// to a data store deployed on a different node. The residual watches the
/// store's node.
std::optional<AntipatternInstance> cth_design_predicate(const model::SystemModel& m,
                                                        const model::Component& c);

/// Full off-line pre-calculus: all design-gated instances whose static,
/// dynamic and deployment sub-predicates hold, plus one instance per
/// performance-view-only kind. Deterministic for a given model.
std::vector<AntipatternInstance> precalculate(const model::SystemModel& m);

/// Structured-text (JSON) serialization of a PA set, consumed by the rule
/// compiler and the CLI.
std::string save_instances(const std::vector<AntipatternInstance>& pa);
std::vector<AntipatternInstance> load_instances_text(const std::string& text);
std::vector<AntipatternInstance> load_instances(const std::string& path);

/// {S_i, PA_i, M_i[PA_i]} at epoch t_i.
struct SystemConfiguration {
    model::SystemModel model;
    std::vector<AntipatternInstance> candidates;
    std::vector<std::string> monitor_ids;  // rule ids compiled from candidates
    double epoch_s = 0.0;
};

enum class RefactoringTag { Hardware, Software };

/// A system change. Hardware refactorings may only touch node service
/// rates and link bandwidths; anything structural must be tagged Software.
struct Refactoring {
    RefactoringTag tag;
    model::SystemModel new_model;
    double applied_at_s = 0.0;
};

/// Convenience constructor: scale the service times of one node (and
/// optionally link bandwidths) without touching structure.
Refactoring hardware_rescale(const model::SystemModel& m, const std::string& node,
                             double service_time_factor, double applied_at_s);

/// Apply a refactoring. Hardware: candidates and monitors carry over
/// unchanged, only rates differ, epoch advances. Software: pre-calculus is
/// re-run on the new model (monitor ids are cleared; the caller recompiles).
/// Throws ValidationError if a hardware-tagged refactoring edits structure.
SystemConfiguration transition(const SystemConfiguration& sc, const Refactoring& r);

/// True when the two models differ at most in node service rates and link
/// bandwidths.
bool structurally_equal(const model::SystemModel& a, const model::SystemModel& b);

}  // namespace apm::precalc
