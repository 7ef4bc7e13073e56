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
#include "apm/pmm.hpp"

#include <algorithm>
#include <set>

#include "apm/common.hpp"
#include "json.hpp"

namespace apm::pmm {

using nlohmann::json;
using precalc::AntipatternKind;
using precalc::IndexMetric;
using precalc::IndexTarget;
using precalc::ResidualForm;

std::string to_string(Expr::Op op) {
    switch (op) {
        case Expr::Op::Timestamp: return "timestamp";
        case Expr::Op::Attribute: return "attribute";
        case Expr::Op::Difference: return "difference";
        case Expr::Op::Average: return "average";
        case Expr::Op::Sum: return "sum";
        case Expr::Op::Count: return "count";
        case Expr::Op::Ratio: return "ratio";
        case Expr::Op::WindowLength: return "window_length";
    }
    throw Error("unknown expression operator");
}

namespace {

Expr::Op op_from_string(const std::string& s) {
    if (s == "timestamp") return Expr::Op::Timestamp;
    if (s == "attribute") return Expr::Op::Attribute;
    if (s == "difference") return Expr::Op::Difference;
    if (s == "average") return Expr::Op::Average;
    if (s == "sum") return Expr::Op::Sum;
    if (s == "count") return Expr::Op::Count;
    if (s == "ratio") return Expr::Op::Ratio;
    if (s == "window_length") return Expr::Op::WindowLength;
    throw ParseError("unknown expression operator '" + s + "'");
}

}  // namespace

std::string to_string(Comparator c) {
    switch (c) {
        case Comparator::LT: return "lt";
        case Comparator::LE: return "le";
        case Comparator::GT: return "gt";
        case Comparator::GE: return "ge";
    }
    throw Error("unknown comparator");
}

Comparator comparator_from_string(const std::string& s) {
    if (s == "lt") return Comparator::LT;
    if (s == "le") return Comparator::LE;
    if (s == "gt") return Comparator::GT;
    if (s == "ge") return Comparator::GE;
    throw ParseError("unknown comparator '" + s + "'");
}

std::string to_string(ParamKind k) {
    switch (k) {
        case ParamKind::Number: return "number";
        case ParamKind::String: return "string";
        case ParamKind::EventSetParam: return "event_set";
        case ParamKind::EventSetGroups: return "event_set_groups";
    }
    throw Error("unknown parameter kind");
}

namespace {

ParamKind param_kind_from_string(const std::string& s) {
    if (s == "number") return ParamKind::Number;
    if (s == "string") return ParamKind::String;
    if (s == "event_set") return ParamKind::EventSetParam;
    if (s == "event_set_groups") return ParamKind::EventSetGroups;
    throw ParseError("unknown parameter kind '" + s + "'");
}

std::string binding_kind_name(const BindingValue& v) {
    switch (v.index()) {
        case 0: return "number";
        case 1: return "string";
        case 2: return "event_set";
        case 3: return "event_set_groups";
    }
    return "unknown";
}

// Expression constructors for the library models.
Expr e_ts(std::string formal) { return {Expr::Op::Timestamp, std::move(formal), {}, {}}; }
Expr e_attr(std::string formal, std::string attr) {
    return {Expr::Op::Attribute, std::move(formal), std::move(attr), {}};
}
Expr e_count(std::string formal) { return {Expr::Op::Count, std::move(formal), {}, {}}; }
Expr e_window() { return {Expr::Op::WindowLength, {}, {}, {}}; }
Expr e_diff(Expr a, Expr b) { return {Expr::Op::Difference, {}, {}, {std::move(a), std::move(b)}}; }
Expr e_avg(Expr a) { return {Expr::Op::Average, {}, {}, {std::move(a)}}; }
Expr e_sum(Expr a) { return {Expr::Op::Sum, {}, {}, {std::move(a)}}; }
Expr e_ratio(Expr a, Expr b) { return {Expr::Op::Ratio, {}, {}, {std::move(a), std::move(b)}}; }

IntervalTime generic_interval() {
    return {NumberOrParam::parameter("$Th_initSlot"), NumberOrParam::parameter("$Th_sizeSlot"),
            NumberOrParam::parameter("$Th_endSlot")};
}

std::vector<ParamDecl> interval_params() {
    return {{"$Th_initSlot", ParamKind::Number, {"th_initSlot"}},
            {"$Th_sizeSlot", ParamKind::Number, {"th_sizeSlot"}},
            {"$Th_endSlot", ParamKind::Number, {"th_endSlot"}}};
}

void append(std::vector<ParamDecl>& dst, std::vector<ParamDecl> src) {
    for (auto& p : src) dst.push_back(std::move(p));
}

PropertyModel make_tj_like(AntipatternKind kind, const std::string& model_name,
                           const std::string& property_name, ResidualForm form) {
    PropertyModel pm;
    pm.name = model_name;
    pm.kind = kind;
    pm.generic = true;
    pm.parameters = {{"$OpI", ParamKind::String, {}},
                     {"$e1", ParamKind::EventSetParam, {}},
                     {"$e2", ParamKind::EventSetParam, {}},
                     {"$p", ParamKind::Number, {}},
                     {"$Th", ParamKind::Number, {}}};
    append(pm.parameters, interval_params());
    pm.parameters.push_back({"$Th_OpRtVar", ParamKind::Number, {"th_OpRtVar"}});

    MetricsTemplate rt_avg;
    rt_avg.name = "RT_AVG";
    rt_avg.measure = "TIME";
    rt_avg.formals = {"x", "y"};
    rt_avg.expression = e_avg(e_diff(e_ts("x"), e_ts("y")));
    pm.templates = {rt_avg};

    Metrics rt;
    rt.name = "RT-AVG-OpI";
    rt.template_name = "RT_AVG";
    rt.actuals["x"] = MetricActual{"$e2", std::nullopt, {}};
    rt.actuals["y"] = MetricActual{"$e1", std::nullopt, {}};
    rt.constraint = "x.correlation_id == y.correlation_id";
    pm.metrics = {rt};

    Property p;
    p.name = property_name;
    p.mode = PropertyMode::Prescriptive;
    p.nature = PropertyNature::Quantitative;
    p.target = StringOrParam::parameter("$OpI");
    p.metrics = "RT-AVG-OpI";
    p.workload = ClosedWorkload{NumberOrParam::parameter("$p"), NumberOrParam::parameter("$Th")};
    p.interval = generic_interval();
    p.predicate = {form, Comparator::LE, NumberOrParam::parameter("$Th_OpRtVar"), std::nullopt};
    pm.properties = {p};
    return pm;
}

PropertyModel make_utilization_model(AntipatternKind kind, const std::string& model_name,
                                     const std::string& property_name,
                                     const std::string& threshold_param,
                                     std::vector<std::string> threshold_sources) {
    PropertyModel pm;
    pm.name = model_name;
    pm.kind = kind;
    pm.generic = true;
    pm.parameters = {{"$OpI", ParamKind::String, {}}, {"$res", ParamKind::EventSetGroups, {}}};
    append(pm.parameters, interval_params());
    pm.parameters.push_back({threshold_param, ParamKind::Number, std::move(threshold_sources)});

    MetricsTemplate util;
    util.name = "UTILIZATION";
    util.measure = "RATIO";
    util.formals = {"g"};
    util.expression = e_ratio(e_sum(e_attr("g", "duration")), e_window());
    pm.templates = {util};

    Metrics u;
    u.name = "UTIL-Res";
    u.template_name = "UTILIZATION";
    u.actuals["g"] = MetricActual{"$res", std::nullopt, {}};
    pm.metrics = {u};

    Property p;
    p.name = property_name;
    p.mode = PropertyMode::Prescriptive;
    p.nature = PropertyNature::Quantitative;
    p.target = StringOrParam::parameter("$OpI");
    p.metrics = "UTIL-Res";
    p.interval = generic_interval();
    p.predicate = {ResidualForm::ThresholdExceeded, Comparator::LT,
                   NumberOrParam::parameter(threshold_param), std::nullopt};
    pm.properties = {p};
    return pm;
}

PropertyModel make_cps_model() {
    PropertyModel pm;
    pm.name = "NodeBalancePropertyModel";
    pm.kind = AntipatternKind::CPS;
    pm.generic = true;
    pm.parameters = {{"$OpI", ParamKind::String, {}}, {"$nodes", ParamKind::EventSetGroups, {}}};
    append(pm.parameters, interval_params());
    pm.parameters.push_back({"$Th_maxHwUtil", ParamKind::Number, {"th_maxHwUtil"}});
    pm.parameters.push_back({"$Th_minHwUtil", ParamKind::Number, {"th_minHwUtil"}});

    MetricsTemplate util;
    util.name = "UTILIZATION";
    util.measure = "RATIO";
    util.formals = {"g"};
    util.expression = e_ratio(e_sum(e_attr("g", "duration")), e_window());
    pm.templates = {util};

    Metrics u;
    u.name = "UTIL-Nodes";
    u.template_name = "UTILIZATION";
    u.actuals["g"] = MetricActual{"$nodes", std::nullopt, {}};
    pm.metrics = {u};

    Property p;
    p.name = "NodeUtilizationBalance";
    p.mode = PropertyMode::Prescriptive;
    p.nature = PropertyNature::Quantitative;
    p.target = StringOrParam::parameter("$OpI");
    p.metrics = "UTIL-Nodes";
    p.interval = generic_interval();
    p.predicate = {ResidualForm::Unbalance, Comparator::GE,
                   NumberOrParam::parameter("$Th_maxHwUtil"),
                   NumberOrParam::parameter("$Th_minHwUtil")};
    pm.properties = {p};
    return pm;
}

PropertyModel make_more_is_less_model() {
    PropertyModel pm;
    pm.name = "ThroughputUnderLoadPropertyModel";
    pm.kind = AntipatternKind::MoreIsLess;
    pm.generic = true;
    pm.parameters = {{"$OpI", ParamKind::String, {}},
                     {"$e1", ParamKind::EventSetParam, {}},
                     {"$e2", ParamKind::EventSetParam, {}}};
    append(pm.parameters, interval_params());
    pm.parameters.push_back({"$Th_maxParallelism", ParamKind::Number, {"th_maxParallelism"}});

    MetricsTemplate thr;
    thr.name = "THROUGHPUT";
    thr.measure = "RATE";
    thr.formals = {"x"};
    thr.expression = e_ratio(e_count("x"), e_window());

    MetricsTemplate conc;
    conc.name = "CONCURRENCY";
    conc.measure = "COUNT";
    conc.formals = {"y", "x"};
    conc.expression = e_diff(e_count("y"), e_count("x"));
    pm.templates = {thr, conc};

    Metrics t;
    t.name = "THR-OpI";
    t.template_name = "THROUGHPUT";
    t.actuals["x"] = MetricActual{"$e2", std::nullopt, {}};

    Metrics c;
    c.name = "CONC-OpI";
    c.template_name = "CONCURRENCY";
    c.actuals["y"] = MetricActual{"$e1", std::nullopt, {}};
    c.actuals["x"] = MetricActual{"$e2", std::nullopt, {}};
    pm.metrics = {t, c};

    Property p;
    p.name = "ThroughputUnderLoad";
    p.mode = PropertyMode::Prescriptive;
    p.nature = PropertyNature::Quantitative;
    p.target = StringOrParam::parameter("$OpI");
    p.metrics = "THR-OpI";
    p.secondary_metrics = "CONC-OpI";
    p.interval = generic_interval();
    p.predicate = {ResidualForm::DeclineUnderLoad, Comparator::LE,
                   NumberOrParam::parameter("$Th_maxParallelism"), std::nullopt};
    pm.properties = {p};
    return pm;
}

std::map<AntipatternKind, PropertyModel> build_library() {
    std::map<AntipatternKind, PropertyModel> lib;
    lib[AntipatternKind::Blob] =
        make_utilization_model(AntipatternKind::Blob, "ResourceUtilizationPropertyModel",
                               "ResourceUtilizationBound", "$Th_maxUtil",
                               {"th_maxHwUtil", "th_maxNetUtil"});
    lib[AntipatternKind::CTH] =
        make_utilization_model(AntipatternKind::CTH, "StoreNodeUtilizationPropertyModel",
                               "StoreNodeUtilizationBound", "$Th_maxHwUtil", {"th_maxHwUtil"});
    lib[AntipatternKind::TJ] = make_tj_like(AntipatternKind::TJ, "ResponseTimeSlopePropertyModel",
                                            "OperationResponseTimeSlope",
                                            ResidualForm::ConsecutiveSlope);
    lib[AntipatternKind::CPS] = make_cps_model();
    lib[AntipatternKind::Ramp] =
        make_tj_like(AntipatternKind::Ramp, "ResponseTimeGrowthPropertyModel",
                     "OperationResponseTimeGrowth", ResidualForm::MonotonicRun);
    lib[AntipatternKind::MoreIsLess] = make_more_is_less_model();
    return lib;
}

}  // namespace

const MetricsTemplate* PropertyModel::find_template(const std::string& n) const {
    for (const auto& t : templates)
        if (t.name == n) return &t;
    return nullptr;
}

const Metrics* PropertyModel::find_metrics(const std::string& n) const {
    for (const auto& m : metrics)
        if (m.name == n) return &m;
    return nullptr;
}

const std::map<AntipatternKind, PropertyModel>& library() {
    static const std::map<AntipatternKind, PropertyModel> lib = build_library();
    return lib;
}

namespace {

// Adds an event type/set definition to the model catalogs, rejecting
// conflicting redefinitions.
void add_type(PropertyModel& pm, const EventType& t) {
    for (const auto& existing : pm.event_types) {
        if (existing.name == t.name) {
            if (existing == t) return;
            throw ValidationError("conflicting definitions of event type '" + t.name + "'");
        }
    }
    pm.event_types.push_back(t);
}

void add_set(PropertyModel& pm, const EventSetDef& def) {
    add_type(pm, def.type);
    for (const auto& existing : pm.event_sets) {
        if (existing.name == def.set.name) {
            if (existing == def.set) return;
            throw ValidationError("conflicting definitions of event set '" + def.set.name + "'");
        }
    }
    pm.event_sets.push_back(def.set);
}

}  // namespace

PropertyModel actualize(const PropertyModel& generic, const ParameterBinding& binding) {
    if (!generic.generic) throw ValidationError("model '" + generic.name + "' is already actual");

    std::map<std::string, ParamKind> declared;
    for (const auto& p : generic.parameters) declared[p.name] = p.kind;
    for (const auto& p : generic.parameters) {
        auto it = binding.find(p.name);
        if (it == binding.end())
            throw ValidationError("unbound parameter " + p.name + " for model '" + generic.name +
                                  "'");
        const std::string got = binding_kind_name(it->second);
        if (got != to_string(p.kind))
            throw ValidationError("parameter " + p.name + " expects " + to_string(p.kind) +
                                  ", got " + got);
    }
    for (const auto& [name, value] : binding) {
        (void)value;
        if (!declared.count(name))
            throw ValidationError("unknown parameter " + name + " for model '" + generic.name +
                                  "'");
    }

    PropertyModel actual = generic;

    auto bind_number = [&](NumberOrParam& slot) {
        if (!slot.is_param()) return;
        auto it = binding.find(slot.param);
        if (it == binding.end()) throw ValidationError("unbound parameter " + slot.param);
        slot = NumberOrParam::bound(std::get<double>(it->second));
    };
    auto bind_string = [&](StringOrParam& slot) {
        if (!slot.is_param()) return;
        auto it = binding.find(slot.param);
        if (it == binding.end()) throw ValidationError("unbound parameter " + slot.param);
        slot = StringOrParam::bound(std::get<std::string>(it->second));
    };

    for (auto& m : actual.metrics) {
        for (auto& [formal, act] : m.actuals) {
            (void)formal;
            if (!act.is_param()) continue;
            auto it = binding.find(act.param);
            if (it == binding.end()) throw ValidationError("unbound parameter " + act.param);
            if (std::holds_alternative<EventSetDef>(it->second)) {
                const auto& def = std::get<EventSetDef>(it->second);
                add_set(actual, def);
                act = MetricActual{{}, def.set, {}};
            } else {
                const auto& groups = std::get<std::vector<EventGroup>>(it->second);
                for (const auto& g : groups)
                    for (const auto& member : g.members) add_set(actual, member);
                act = MetricActual{{}, std::nullopt, groups};
            }
        }
    }

    for (auto& prop : actual.properties) {
        bind_string(prop.target);
        if (prop.workload) {
            bind_number(prop.workload->population);
            bind_number(prop.workload->think_time_s);
        }
        if (prop.interval) {
            bind_number(prop.interval->init_s);
            bind_number(prop.interval->size_s);
            bind_number(prop.interval->end_s);
        }
        bind_number(prop.predicate.threshold);
        if (prop.predicate.low_threshold) bind_number(*prop.predicate.low_threshold);
    }

    std::sort(actual.event_types.begin(), actual.event_types.end(),
              [](const EventType& a, const EventType& b) { return a.name < b.name; });
    std::sort(actual.event_sets.begin(), actual.event_sets.end(),
              [](const EventSet& a, const EventSet& b) { return a.name < b.name; });
    actual.generic = false;
    actual.parameters.clear();
    return actual;
}

std::string scenario_start_event(const std::string& scenario) { return scenario + ".start"; }
std::string scenario_end_event(const std::string& scenario) { return scenario + ".end"; }
std::string busy_event(const std::string& resource) { return "busy." + resource; }
std::string event_set_name(const std::string& event_type) { return event_type + "_Set"; }

namespace {

EventSetDef plain_set(const std::string& event_type) {
    return {{event_set_name(event_type), event_type, {}}, {event_type, {}}};
}

EventSetDef busy_set(const std::string& resource) {
    const std::string type = busy_event(resource);
    return {{event_set_name(type), type, {}},
            {type, {{"duration", "number"}, {"resource", "string"}}}};
}

// A hardware node is observed through one event set per device.
EventGroup node_group(const model::ProcessingNode& node) {
    EventGroup g;
    g.name = node.name;
    g.members.push_back(busy_set("cpu-" + node.name));
    if (node.disk_time_per_access_s > 0.0) g.members.push_back(busy_set("disk-" + node.name));
    return g;
}

EventGroup link_group(const std::string& link) { return {link, {busy_set(link)}}; }

// Threshold parameters the binding does not cover, in declaration order.
// Blob resolves its utilization bound from the instance's residual, so the
// per-instance source wins over the declaration default.
std::vector<UnboundParam> unbound_of(const PropertyModel& generic, const ParameterBinding& b,
                                     const std::map<std::string, std::string>& source_override) {
    std::vector<UnboundParam> out;
    for (const auto& p : generic.parameters) {
        if (b.count(p.name)) continue;
        auto it = source_override.find(p.name);
        std::string source = it != source_override.end()
                                 ? it->second
                                 : (p.threshold_sources.empty() ? "" : p.threshold_sources.front());
        out.push_back({p.name, source});
    }
    return out;
}

}  // namespace

std::vector<ActualizationRequest> actualization_request(const precalc::AntipatternInstance& inst,
                                                        const model::SystemModel& m) {
    const PropertyModel& generic = library().at(inst.kind);
    std::vector<ActualizationRequest> out;

    auto scenario_request = [&](const std::string& scenario_name, bool with_workload) {
        const model::Scenario* s = m.find_scenario(scenario_name);
        if (!s)
            throw ValidationError("scenario '" + scenario_name + "' not found in model '" +
                                  m.name + "'");
        ActualizationRequest req;
        req.kind = inst.kind;
        req.subject = s->name;
        req.binding["$OpI"] = s->name;
        req.binding["$e1"] = plain_set(scenario_start_event(s->name));
        req.binding["$e2"] = plain_set(scenario_end_event(s->name));
        if (with_workload) {
            req.binding["$p"] = static_cast<double>(s->workload.population);
            req.binding["$Th"] = s->workload.think_time_s;
        }
        req.unbound = unbound_of(generic, req.binding, {});
        return req;
    };

    switch (inst.kind) {
        case AntipatternKind::TJ:
        case AntipatternKind::Ramp: {
            if (inst.residual.indices.empty())
                throw ValidationError("model '" + m.name +
                                      "' declares no scenarios: no operation instance to bind " +
                                      to_string(inst.kind) + " response-time property to");
            for (const auto& idx : inst.residual.indices)
                out.push_back(scenario_request(idx.target, true));
            break;
        }
        case AntipatternKind::MoreIsLess: {
            bool any = false;
            for (const auto& idx : inst.residual.indices) {
                if (idx.metric != IndexMetric::Throughput) continue;
                any = true;
                out.push_back(scenario_request(idx.target, false));
            }
            if (!any)
                throw ValidationError("model '" + m.name +
                                      "' declares no scenarios: no operation instance to bind " +
                                      to_string(inst.kind) + " throughput property to");
            break;
        }
        case AntipatternKind::CPS: {
            if (m.nodes.empty())
                throw ValidationError("model '" + m.name +
                                      "' declares no processing nodes: nothing to balance");
            ActualizationRequest req;
            req.kind = inst.kind;
            req.subject = "system";
            std::vector<EventGroup> groups;
            for (const auto& n : m.nodes) groups.push_back(node_group(n));
            req.binding["$OpI"] = req.subject;
            req.binding["$nodes"] = groups;
            req.unbound = unbound_of(generic, req.binding, {});
            out.push_back(req);
            break;
        }
        case AntipatternKind::Blob:
        case AntipatternKind::CTH: {
            if (inst.residual.indices.empty())
                throw ValidationError(inst.id() + " carries no utilization index to monitor");
            const std::string component = inst.bindings.count("swC") ? inst.bindings.at("swC")
                                                                     : inst.id();
            std::map<std::string, std::string> override;
            if (!inst.residual.threshold_refs.empty()) {
                const std::string& source = inst.residual.threshold_refs.front();
                override[inst.kind == AntipatternKind::Blob ? "$Th_maxUtil" : "$Th_maxHwUtil"] =
                    source;
            }
            for (const auto& idx : inst.residual.indices) {
                ActualizationRequest req;
                req.kind = inst.kind;
                req.subject = component + "-" + idx.target;
                std::vector<EventGroup> groups;
                if (idx.target_kind == IndexTarget::Link) {
                    if (!m.find_link(idx.target))
                        throw ValidationError("network '" + idx.target + "' not found in model '" +
                                              m.name + "'");
                    groups.push_back(link_group(idx.target));
                } else {
                    const model::ProcessingNode* node = m.find_node(idx.target);
                    if (!node)
                        throw ValidationError("node '" + idx.target + "' not found in model '" +
                                              m.name + "'");
                    groups.push_back(node_group(*node));
                }
                req.binding["$OpI"] = req.subject;
                req.binding["$res"] = groups;
                req.unbound = unbound_of(generic, req.binding, override);
                out.push_back(req);
            }
            break;
        }
    }
    return out;
}

namespace {

std::optional<double> threshold_field(const model::ThresholdSet& th, const std::string& name) {
    if (name == "th_maxConnects") return static_cast<double>(th.th_maxConnects);
    if (name == "th_maxMsgs") return static_cast<double>(th.th_maxMsgs);
    if (name == "th_maxDbMsgs") return static_cast<double>(th.effective_max_db_msgs());
    if (name == "th_maxHwUtil") return th.th_maxHwUtil;
    if (name == "th_maxNetUtil") return th.th_maxNetUtil;
    if (name == "th_initSlot") return th.th_initSlot_s;
    if (name == "th_sizeSlot") return th.th_sizeSlot_s;
    if (name == "th_endSlot") return th.th_endSlot_s;
    if (name == "th_OpRtVar") return th.th_OpRtVar_s;
    if (name == "th_minHwUtil") return th.th_minHwUtil;
    if (name == "th_maxParallelism") {
        if (!th.th_maxParallelism) return std::nullopt;
        return static_cast<double>(*th.th_maxParallelism);
    }
    throw ValidationError("unknown threshold field '" + name + "'");
}

}  // namespace

ParameterBinding resolve_thresholds(const ActualizationRequest& req,
                                    const model::ThresholdSet& th) {
    ParameterBinding binding = req.binding;
    for (const auto& u : req.unbound) {
        if (u.threshold_ref.empty())
            throw ValidationError("parameter " + u.param +
                                  " requires an operator-provided value");
        std::optional<double> value = threshold_field(th, u.threshold_ref);
        if (!value)
            throw ValidationError("no threshold binds parameter " + u.param +
                                  ": threshold set field '" + u.threshold_ref + "' is absent");
        binding[u.param] = *value;
    }
    return binding;
}

namespace {

json number_or_param_to_json(const NumberOrParam& s) {
    json j = json::object();
    if (s.is_param())
        j["param"] = s.param;
    else
        j["value"] = s.value;
    return j;
}

NumberOrParam number_or_param_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    if (j.contains("param")) return NumberOrParam::parameter(j.at("param").get<std::string>());
    if (j.contains("value") && j.at("value").is_number())
        return NumberOrParam::bound(j.at("value").get<double>());
    throw ParseError(where + ": expected 'param' or numeric 'value'");
}

json string_or_param_to_json(const StringOrParam& s) {
    json j = json::object();
    if (s.is_param())
        j["param"] = s.param;
    else
        j["value"] = s.value;
    return j;
}

StringOrParam string_or_param_from_json(const json& j, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": expected an object");
    if (j.contains("param")) return StringOrParam::parameter(j.at("param").get<std::string>());
    if (j.contains("value") && j.at("value").is_string())
        return StringOrParam::bound(j.at("value").get<std::string>());
    throw ParseError(where + ": expected 'param' or string 'value'");
}

json expr_to_json(const Expr& e) {
    json j = json::object();
    j["op"] = to_string(e.op);
    if (!e.formal.empty()) j["formal"] = e.formal;
    if (!e.attribute.empty()) j["attribute"] = e.attribute;
    if (!e.children.empty()) {
        json kids = json::array();
        for (const auto& c : e.children) kids.push_back(expr_to_json(c));
        j["children"] = kids;
    }
    return j;
}

Expr expr_from_json(const json& j) {
    if (!j.is_object() || !j.contains("op")) throw ParseError("expression: expected an object with 'op'");
    Expr e;
    e.op = op_from_string(j.at("op").get<std::string>());
    if (j.contains("formal")) e.formal = j.at("formal").get<std::string>();
    if (j.contains("attribute")) e.attribute = j.at("attribute").get<std::string>();
    if (j.contains("children"))
        for (const auto& c : j.at("children")) e.children.push_back(expr_from_json(c));
    return e;
}

json actual_to_json(const MetricActual& a) {
    json j = json::object();
    if (a.is_param()) {
        j["param"] = a.param;
    } else if (a.set) {
        j["set"] = a.set->name;
    } else {
        json groups = json::array();
        for (const auto& g : a.groups) {
            json jg = json::object();
            jg["name"] = g.name;
            json sets = json::array();
            for (const auto& member : g.members) sets.push_back(member.set.name);
            jg["sets"] = sets;
            groups.push_back(jg);
        }
        j["groups"] = groups;
    }
    return j;
}

}  // namespace

std::string save_property_model(const PropertyModel& pm) {
    json j = json::object();
    j["name"] = pm.name;
    j["kind"] = precalc::to_string(pm.kind);
    j["generic"] = pm.generic;

    json params = json::array();
    for (const auto& p : pm.parameters) {
        json jp = json::object();
        jp["name"] = p.name;
        jp["kind"] = to_string(p.kind);
        if (!p.threshold_sources.empty()) jp["threshold_sources"] = p.threshold_sources;
        params.push_back(jp);
    }
    j["parameters"] = params;

    json types = json::array();
    for (const auto& t : pm.event_types) {
        json jt = json::object();
        jt["name"] = t.name;
        jt["attributes"] = t.attributes;
        types.push_back(jt);
    }
    j["event_types"] = types;

    json sets = json::array();
    for (const auto& s : pm.event_sets) {
        json js = json::object();
        js["name"] = s.name;
        js["event_type"] = s.event_type;
        if (!s.filter.empty()) js["filter"] = s.filter;
        sets.push_back(js);
    }
    j["event_sets"] = sets;

    json templates = json::array();
    for (const auto& t : pm.templates) {
        json jt = json::object();
        jt["name"] = t.name;
        jt["measure"] = t.measure;
        jt["formals"] = t.formals;
        jt["expression"] = expr_to_json(t.expression);
        templates.push_back(jt);
    }
    j["templates"] = templates;

    json metrics = json::array();
    for (const auto& m : pm.metrics) {
        json jm = json::object();
        jm["name"] = m.name;
        jm["template"] = m.template_name;
        json actuals = json::object();
        for (const auto& [formal, act] : m.actuals) actuals[formal] = actual_to_json(act);
        jm["actuals"] = actuals;
        if (!m.constraint.empty()) jm["constraint"] = m.constraint;
        metrics.push_back(jm);
    }
    j["metrics"] = metrics;

    json properties = json::array();
    for (const auto& p : pm.properties) {
        json jp = json::object();
        jp["name"] = p.name;
        jp["mode"] = p.mode == PropertyMode::Prescriptive ? "prescriptive" : "descriptive";
        jp["nature"] = p.nature == PropertyNature::Quantitative ? "quantitative" : "qualitative";
        jp["target"] = string_or_param_to_json(p.target);
        if (!p.metrics.empty()) jp["metrics"] = p.metrics;
        if (!p.secondary_metrics.empty()) jp["secondary_metrics"] = p.secondary_metrics;
        if (!p.event_pattern.empty()) jp["event_pattern"] = p.event_pattern;
        if (p.workload) {
            json jw = json::object();
            jw["population"] = number_or_param_to_json(p.workload->population);
            jw["think_time_s"] = number_or_param_to_json(p.workload->think_time_s);
            jp["workload"] = jw;
        }
        if (p.interval) {
            json ji = json::object();
            ji["init_s"] = number_or_param_to_json(p.interval->init_s);
            ji["size_s"] = number_or_param_to_json(p.interval->size_s);
            ji["end_s"] = number_or_param_to_json(p.interval->end_s);
            jp["interval"] = ji;
        }
        json jpr = json::object();
        jpr["form"] = precalc::to_string(p.predicate.form);
        jpr["comparator"] = to_string(p.predicate.comparator);
        jpr["threshold"] = number_or_param_to_json(p.predicate.threshold);
        if (p.predicate.low_threshold)
            jpr["low_threshold"] = number_or_param_to_json(*p.predicate.low_threshold);
        jp["predicate"] = jpr;
        properties.push_back(jp);
    }
    j["properties"] = properties;
    return j.dump(2) + "\n";
}

PropertyModel load_property_model_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid property model JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("property model: expected a JSON object");

    PropertyModel pm;
    pm.name = j.at("name").get<std::string>();
    pm.kind = precalc::kind_from_string(j.at("kind").get<std::string>());
    pm.generic = j.value("generic", true);

    for (const auto& jp : j.value("parameters", json::array())) {
        ParamDecl p;
        p.name = jp.at("name").get<std::string>();
        p.kind = param_kind_from_string(jp.at("kind").get<std::string>());
        for (const auto& s : jp.value("threshold_sources", json::array()))
            p.threshold_sources.push_back(s.get<std::string>());
        pm.parameters.push_back(p);
    }
    for (const auto& jt : j.value("event_types", json::array())) {
        EventType t;
        t.name = jt.at("name").get<std::string>();
        const json attrs = jt.value("attributes", json::object());
        for (const auto& [k, v] : attrs.items()) t.attributes[k] = v.get<std::string>();
        pm.event_types.push_back(t);
    }
    for (const auto& js : j.value("event_sets", json::array())) {
        EventSet s;
        s.name = js.at("name").get<std::string>();
        s.event_type = js.at("event_type").get<std::string>();
        const json filter = js.value("filter", json::object());
        for (const auto& [k, v] : filter.items()) s.filter[k] = v.get<std::string>();
        pm.event_sets.push_back(s);
    }
    for (const auto& jt : j.value("templates", json::array())) {
        MetricsTemplate t;
        t.name = jt.at("name").get<std::string>();
        t.measure = jt.at("measure").get<std::string>();
        for (const auto& f : jt.at("formals")) t.formals.push_back(f.get<std::string>());
        t.expression = expr_from_json(jt.at("expression"));
        pm.templates.push_back(t);
    }

    auto find_set = [&pm](const std::string& name) -> const EventSet* {
        for (const auto& s : pm.event_sets)
            if (s.name == name) return &s;
        return nullptr;
    };
    auto find_type = [&pm](const std::string& name) -> const EventType* {
        for (const auto& t : pm.event_types)
            if (t.name == name) return &t;
        return nullptr;
    };
    auto resolve_member = [&](const std::string& set_name, const std::string& where) {
        const EventSet* s = find_set(set_name);
        if (!s) throw ParseError(where + ": unknown event set '" + set_name + "'");
        const EventType* t = find_type(s->event_type);
        if (!t) throw ParseError(where + ": unknown event type '" + s->event_type + "'");
        return EventSetDef{*s, *t};
    };

    for (const auto& jm : j.value("metrics", json::array())) {
        Metrics m;
        m.name = jm.at("name").get<std::string>();
        m.template_name = jm.at("template").get<std::string>();
        for (const auto& [formal, ja] : jm.at("actuals").items()) {
            MetricActual a;
            if (ja.contains("param")) {
                a.param = ja.at("param").get<std::string>();
            } else if (ja.contains("set")) {
                a.set = resolve_member(ja.at("set").get<std::string>(), "metrics '" + m.name + "'")
                            .set;
            } else if (ja.contains("groups")) {
                for (const auto& jg : ja.at("groups")) {
                    EventGroup g;
                    g.name = jg.at("name").get<std::string>();
                    for (const auto& sn : jg.at("sets"))
                        g.members.push_back(resolve_member(sn.get<std::string>(),
                                                           "metrics '" + m.name + "'"));
                    a.groups.push_back(g);
                }
            } else {
                throw ParseError("metrics '" + m.name + "': actual '" + formal +
                                 "' needs 'param', 'set' or 'groups'");
            }
            m.actuals[formal] = a;
        }
        if (jm.contains("constraint")) m.constraint = jm.at("constraint").get<std::string>();
        pm.metrics.push_back(m);
    }

    for (const auto& jp : j.value("properties", json::array())) {
        Property p;
        p.name = jp.at("name").get<std::string>();
        const std::string mode = jp.at("mode").get<std::string>();
        if (mode == "prescriptive")
            p.mode = PropertyMode::Prescriptive;
        else if (mode == "descriptive")
            p.mode = PropertyMode::Descriptive;
        else
            throw ParseError("property '" + p.name + "': unknown mode '" + mode + "'");
        const std::string nature = jp.at("nature").get<std::string>();
        if (nature == "quantitative")
            p.nature = PropertyNature::Quantitative;
        else if (nature == "qualitative")
            p.nature = PropertyNature::Qualitative;
        else
            throw ParseError("property '" + p.name + "': unknown nature '" + nature + "'");
        p.target = string_or_param_from_json(jp.at("target"), "property '" + p.name + "' target");
        p.metrics = jp.value("metrics", "");
        p.secondary_metrics = jp.value("secondary_metrics", "");
        p.event_pattern = jp.value("event_pattern", "");
        if (jp.contains("workload")) {
            ClosedWorkload w;
            w.population = number_or_param_from_json(jp.at("workload").at("population"),
                                                     "workload population");
            w.think_time_s = number_or_param_from_json(jp.at("workload").at("think_time_s"),
                                                       "workload think time");
            p.workload = w;
        }
        if (jp.contains("interval")) {
            IntervalTime iv;
            iv.init_s = number_or_param_from_json(jp.at("interval").at("init_s"), "interval init");
            iv.size_s = number_or_param_from_json(jp.at("interval").at("size_s"), "interval size");
            iv.end_s = number_or_param_from_json(jp.at("interval").at("end_s"), "interval end");
            p.interval = iv;
        }
        const json& jpr = jp.at("predicate");
        p.predicate.form = precalc::residual_form_from_string(jpr.at("form").get<std::string>());
        p.predicate.comparator = comparator_from_string(jpr.at("comparator").get<std::string>());
        p.predicate.threshold = number_or_param_from_json(jpr.at("threshold"), "predicate threshold");
        if (jpr.contains("low_threshold"))
            p.predicate.low_threshold =
                number_or_param_from_json(jpr.at("low_threshold"), "predicate low threshold");
        pm.properties.push_back(p);
    }
    return pm;
}

}  // namespace apm::pmm
