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
#include <variant>
#include <vector>

#include "apm/precalc.hpp"

namespace apm::pmm {

/// A slot that is either a bound number or a `$`-prefixed parameter name.
struct NumberOrParam {
    std::string param;   // empty when bound
    double value = 0.0;

    static NumberOrParam parameter(std::string name) { return {std::move(name), 0.0}; }
    static NumberOrParam bound(double v) { return {{}, v}; }
    bool is_param() const { return !param.empty(); }

    friend bool operator==(const NumberOrParam&, const NumberOrParam&) = default;
};

/// Same, for string-valued slots (e.g. the operation instance `$OpI`).
struct StringOrParam {
    std::string param;
    std::string value;

    static StringOrParam parameter(std::string name) { return {std::move(name), {}}; }
    static StringOrParam bound(std::string v) { return {{}, std::move(v)}; }
    bool is_param() const { return !param.empty(); }

    friend bool operator==(const StringOrParam&, const StringOrParam&) = default;
};

/// Observable event kind with its attribute schema (name -> "number"/"string").
struct EventType {
    std::string name;
    std::map<std::string, std::string> attributes;

    friend bool operator==(const EventType&, const EventType&) = default;
};

/// A named set of event instances of one EventType, optionally filtered on
/// an attribute value.
struct EventSet {
    std::string name;
    std::string event_type;
    std::map<std::string, std::string> filter;

    friend bool operator==(const EventSet&, const EventSet&) = default;
};

/// EventSet together with its type definition; the unit event-set binding
/// values carry so actualization can extend the model's catalogs.
struct EventSetDef {
    EventSet set;
    EventType type;

    friend bool operator==(const EventSetDef&, const EventSetDef&) = default;
};

/// A named group of event sets observed as one resource (e.g. all devices
/// of a node). Utilization over a group is the max across members.
struct EventGroup {
    std::string name;
    std::vector<EventSetDef> members;

    friend bool operator==(const EventGroup&, const EventGroup&) = default;
};

/// Event-based expression tree for metrics templates. The operator set is
/// closed; the compiler rejects anything it cannot realize.
struct Expr {
    enum class Op {
        Timestamp,     // timestamp of an event instance of `formal`
        Attribute,     // numeric attribute of an event instance of `formal`
        Difference,    // children[0] - children[1]
        Average,       // mean of children[0] over the window
        Sum,           // sum of children[0] over the window
        Count,         // number of instances of `formal` seen so far
        Ratio,         // children[0] / children[1]
        WindowLength,  // the slot size
    };
    Op op;
    std::string formal;     // for Timestamp / Attribute / Count
    std::string attribute;  // for Attribute
    std::vector<Expr> children;

    friend bool operator==(const Expr&, const Expr&) = default;
};

std::string to_string(Expr::Op op);

/// Generic metric shape over formal event parameters.
struct MetricsTemplate {
    std::string name;
    std::string measure;  // TIME, RATIO, RATE, COUNT
    std::vector<std::string> formals;
    Expr expression;

    friend bool operator==(const MetricsTemplate&, const MetricsTemplate&) = default;
};

/// Actual parameter for one template formal: an event set, a group list, or
/// still a `$` parameter in a generic model.
struct MetricActual {
    std::string param;               // still unbound when nonempty
    std::optional<EventSet> set;     // single event set
    std::vector<EventGroup> groups;  // grouped event sets

    bool is_param() const { return !param.empty(); }

    friend bool operator==(const MetricActual&, const MetricActual&) = default;
};

/// Concretisation of a MetricsTemplate: actual parameters per formal plus a
/// correlation constraint between the bound event sets.
struct Metrics {
    std::string name;
    std::string template_name;
    std::map<std::string, MetricActual> actuals;
    std::string constraint;

    friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct ClosedWorkload {
    NumberOrParam population;
    NumberOrParam think_time_s;

    friend bool operator==(const ClosedWorkload&, const ClosedWorkload&) = default;
};

struct IntervalTime {
    NumberOrParam init_s;
    NumberOrParam size_s;
    NumberOrParam end_s;

    friend bool operator==(const IntervalTime&, const IntervalTime&) = default;
};

enum class Comparator { LT, LE, GT, GE };
std::string to_string(Comparator c);
Comparator comparator_from_string(const std::string& s);

/// How the metric is judged against its threshold(s) over the observation
/// windows. Forms are shared with the residual predicates of pre-calculus.
struct PredicateSpec {
    precalc::ResidualForm form;
    Comparator comparator = Comparator::LE;
    NumberOrParam threshold;
    std::optional<NumberOrParam> low_threshold;  // Unbalance lower bound

    friend bool operator==(const PredicateSpec&, const PredicateSpec&) = default;
};

enum class PropertyMode { Prescriptive, Descriptive };
enum class PropertyNature { Quantitative, Qualitative };

/// One property of a property model. Quantitative properties reference
/// metrics; qualitative ones an event pattern. `secondary_metrics` carries
/// the guard metric for compound predicates (decline-under-load).
struct Property {
    std::string name;
    PropertyMode mode = PropertyMode::Prescriptive;
    PropertyNature nature = PropertyNature::Quantitative;
    StringOrParam target;  // operation instance / resource the property is about
    std::string metrics;
    std::string secondary_metrics;
    std::string event_pattern;  // qualitative only
    std::optional<ClosedWorkload> workload;
    std::optional<IntervalTime> interval;
    PredicateSpec predicate;

    friend bool operator==(const Property&, const Property&) = default;
};

enum class ParamKind { Number, String, EventSetParam, EventSetGroups };
std::string to_string(ParamKind k);

/// Declared template parameter of a generic model. `threshold_sources`
/// names the ThresholdSet fields an unbound numeric parameter may be filled
/// from.
struct ParamDecl {
    std::string name;  // includes the leading '$'
    ParamKind kind;
    std::vector<std::string> threshold_sources;

    friend bool operator==(const ParamDecl&, const ParamDecl&) = default;
};

/// A property model: generic (library entry, `$` parameters everywhere) or
/// actual (fully bound, no parameters left).
struct PropertyModel {
    std::string name;
    precalc::AntipatternKind kind;
    bool generic = true;
    std::vector<ParamDecl> parameters;
    std::vector<EventType> event_types;
    std::vector<EventSet> event_sets;
    std::vector<MetricsTemplate> templates;
    std::vector<Metrics> metrics;
    std::vector<Property> properties;

    const MetricsTemplate* find_template(const std::string& n) const;
    const Metrics* find_metrics(const std::string& n) const;

    friend bool operator==(const PropertyModel&, const PropertyModel&) = default;
};

/// One binding value: number, string, event set, or group list.
using BindingValue = std::variant<double, std::string, EventSetDef, std::vector<EventGroup>>;

/// Map `$`-parameter name -> value.
using ParameterBinding = std::map<std::string, BindingValue>;

/// The pre-defined library of generic property models, one per kind.
const std::map<precalc::AntipatternKind, PropertyModel>& library();

/// Bind every parameter of a generic model. Throws Error naming the first
/// missing parameter ("unbound parameter $X") or the first kind mismatch.
PropertyModel actualize(const PropertyModel& generic, const ParameterBinding& binding);

/// A parameter actualization could not resolve, with the ThresholdSet field
/// it may be filled from (empty if operator input is required).
struct UnboundParam {
    std::string param;
    std::string threshold_ref;

    friend bool operator==(const UnboundParam&, const UnboundParam&) = default;
};

/// One rule-unit actualization request produced from a pre-calculated
/// instance: the generic model to instantiate, the event/workload bindings
/// derived from the system model, and the threshold parameters left for the
/// ThresholdSet or the operator.
struct ActualizationRequest {
    precalc::AntipatternKind kind;
    std::string subject;  // value for $OpI, e.g. scenario or resource name
    ParameterBinding binding;
    std::vector<UnboundParam> unbound;
};

/// Derive actualization requests for an instance: event sets and workloads
/// come from the model, thresholds stay unbound. One request per rule unit
/// (per scenario for TJ/Ramp/More-is-Less, per watched resource for
/// Blob/CTH, one for CPS).
std::vector<ActualizationRequest> actualization_request(const precalc::AntipatternInstance& inst,
                                                        const model::SystemModel& m);

/// Completes a request's binding by filling every unbound parameter from
/// its ThresholdSet source field. Throws ValidationError naming the
/// parameter when the field is absent or unknown.
ParameterBinding resolve_thresholds(const ActualizationRequest& req,
                                    const model::ThresholdSet& th);

/// Event naming scheme shared with the simulator and the rule compiler.
std::string scenario_start_event(const std::string& scenario);
std::string scenario_end_event(const std::string& scenario);
std::string busy_event(const std::string& resource);
std::string event_set_name(const std::string& event_type);

/// Deterministic structured-text serialization (generic models keep their
/// `$` parameter names verbatim).
std::string save_property_model(const PropertyModel& pm);
PropertyModel load_property_model_text(const std::string& text);

}  // namespace apm::pmm
