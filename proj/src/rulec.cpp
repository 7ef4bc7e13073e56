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

#include <algorithm>
#include <cmath>

#include "apm/common.hpp"
#include "json.hpp"

namespace apm::rulec {

using nlohmann::json;
using pmm::Comparator;
using pmm::Expr;
using pmm::MetricActual;
using pmm::Metrics;
using pmm::MetricsTemplate;
using pmm::PropertyModel;
using precalc::ResidualForm;

std::string to_string(AggregationKind k) {
    switch (k) {
        case AggregationKind::AvgResponseTime: return "avg_response_time";
        case AggregationKind::Utilization: return "utilization";
        case AggregationKind::Throughput: return "throughput";
        case AggregationKind::Concurrency: return "concurrency";
    }
    throw Error("unknown aggregation kind");
}

AggregationKind aggregation_kind_from_string(const std::string& s) {
    if (s == "avg_response_time") return AggregationKind::AvgResponseTime;
    if (s == "utilization") return AggregationKind::Utilization;
    if (s == "throughput") return AggregationKind::Throughput;
    if (s == "concurrency") return AggregationKind::Concurrency;
    throw ParseError("unknown aggregation kind '" + s + "'");
}

std::vector<std::string> AggregationSpec::input_types() const {
    std::vector<std::string> out;
    if (!start_type.empty()) out.push_back(start_type);
    if (!end_type.empty()) out.push_back(end_type);
    for (const auto& g : groups)
        for (const auto& t : g.event_types) out.push_back(t);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

long WindowPlan::window_count() const {
    if (size_s <= 0.0 || end_s <= init_s) return 0;
    return static_cast<long>(std::floor((end_s - init_s) / size_s + 1e-9));
}

long WindowPlan::index_of(double t_s) const {
    if (t_s < init_s || t_s >= end_s) return -1;
    long idx = static_cast<long>(std::floor((t_s - init_s) / size_s));
    const long count = window_count();
    if (idx < 0 || idx >= count) return -1;
    return idx;
}

double WindowPlan::window_start(long index) const { return init_s + size_s * static_cast<double>(index); }

double WindowPlan::window_end(long index) const { return init_s + size_s * static_cast<double>(index + 1); }

int default_consecutive_required(ResidualForm form) {
    switch (form) {
        case ResidualForm::ThresholdExceeded: return 1;
        case ResidualForm::Unbalance: return 1;
        case ResidualForm::ConsecutiveSlope: return 2;
        case ResidualForm::MonotonicRun: return 2;
        case ResidualForm::DeclineUnderLoad: return 2;
    }
    return 1;
}

namespace {

// Resolves one bound metric actual; generic leftovers are compile errors.
const MetricActual& actual_of(const Metrics& m, const std::string& formal) {
    auto it = m.actuals.find(formal);
    if (it == m.actuals.end())
        throw ValidationError("metrics '" + m.name + "' leaves formal '" + formal + "' unbound");
    if (it->second.is_param())
        throw ValidationError("metrics '" + m.name + "' actual '" + formal +
                              "' is still the parameter " + it->second.param);
    return it->second;
}

std::string set_type_of(const Metrics& m, const std::string& formal) {
    const MetricActual& a = actual_of(m, formal);
    if (!a.set)
        throw ValidationError("metrics '" + m.name + "' actual '" + formal +
                              "' must be a single event set");
    return a.set->event_type;
}

bool is_ts(const Expr& e) { return e.op == Expr::Op::Timestamp; }
bool is_count(const Expr& e) { return e.op == Expr::Op::Count; }

AggregationSpec build_aggregation(const PropertyModel& model, const std::string& metrics_name,
                                  const std::string& property_name) {
    const Metrics* m = model.find_metrics(metrics_name);
    if (!m)
        throw ValidationError("property '" + property_name + "' references unknown metrics '" +
                              metrics_name + "'");
    const MetricsTemplate* t = model.find_template(m->template_name);
    if (!t)
        throw ValidationError("metrics '" + m->name + "' references unknown template '" +
                              m->template_name + "'");

    const Expr& e = t->expression;
    AggregationSpec spec;

    // average(timestamp(x) - timestamp(y)): response time of matched pairs
    if (e.op == Expr::Op::Average && e.children.size() == 1 &&
        e.children[0].op == Expr::Op::Difference && e.children[0].children.size() == 2 &&
        is_ts(e.children[0].children[0]) && is_ts(e.children[0].children[1])) {
        if (!m->constraint.empty() && m->constraint.find("correlation_id") == std::string::npos)
            throw ValidationError("metrics '" + m->name + "' constraint '" + m->constraint +
                                  "' is unsupported: only correlation_id matching is available");
        spec.kind = AggregationKind::AvgResponseTime;
        spec.name = "avg_rt";
        spec.end_type = set_type_of(*m, e.children[0].children[0].formal);
        spec.start_type = set_type_of(*m, e.children[0].children[1].formal);
        return spec;
    }

    // ratio(sum(attribute(g, duration)), window_length): busy-time ratio
    if (e.op == Expr::Op::Ratio && e.children.size() == 2 && e.children[0].op == Expr::Op::Sum &&
        e.children[0].children.size() == 1 &&
        e.children[0].children[0].op == Expr::Op::Attribute &&
        e.children[1].op == Expr::Op::WindowLength) {
        const Expr& attr = e.children[0].children[0];
        if (attr.attribute != "duration")
            throw ValidationError("metrics '" + m->name + "' sums unsupported attribute '" +
                                  attr.attribute + "' (only 'duration' is available)");
        const MetricActual& a = actual_of(*m, attr.formal);
        spec.kind = AggregationKind::Utilization;
        spec.name = "utilization";
        if (a.set) {
            spec.groups.push_back({a.set->name, {a.set->event_type}});
        } else {
            for (const auto& g : a.groups) {
                AggregationGroup out{g.name, {}};
                for (const auto& member : g.members) out.event_types.push_back(member.set.event_type);
                spec.groups.push_back(std::move(out));
            }
        }
        if (spec.groups.empty())
            throw ValidationError("metrics '" + m->name + "' has no event-set group to observe");
        return spec;
    }

    // ratio(count(x), window_length): completion rate
    if (e.op == Expr::Op::Ratio && e.children.size() == 2 && is_count(e.children[0]) &&
        e.children[1].op == Expr::Op::WindowLength) {
        spec.kind = AggregationKind::Throughput;
        spec.name = "throughput";
        spec.end_type = set_type_of(*m, e.children[0].formal);
        return spec;
    }

    // count(y) - count(x): jobs in flight at window close
    if (e.op == Expr::Op::Difference && e.children.size() == 2 && is_count(e.children[0]) &&
        is_count(e.children[1])) {
        spec.kind = AggregationKind::Concurrency;
        spec.name = "concurrency";
        spec.start_type = set_type_of(*m, e.children[0].formal);
        spec.end_type = set_type_of(*m, e.children[1].formal);
        return spec;
    }

    throw ValidationError("metrics template '" + t->name + "' uses operator '" + to_string(e.op) +
                          "' in a shape outside the compiler's set");
}

double bound_value(const pmm::NumberOrParam& slot, const std::string& what) {
    if (slot.is_param())
        throw ValidationError(what + " is still the parameter " + slot.param);
    return slot.value;
}

}  // namespace

std::vector<MonitorRule> compile(const PropertyModel& actual) {
    if (actual.generic)
        throw ValidationError("cannot compile generic property model '" + actual.name +
                              "': parameters are unbound");
    if (actual.properties.empty())
        throw ValidationError("property model '" + actual.name + "' declares no properties");

    std::vector<MonitorRule> rules;
    for (const auto& p : actual.properties) {
        if (p.nature == pmm::PropertyNature::Qualitative)
            throw ValidationError("property '" + p.name +
                                  "' is qualitative: no event-pattern compiler is available");
        if (p.target.is_param())
            throw ValidationError("property '" + p.name + "' target is still the parameter " +
                                  p.target.param);
        if (p.metrics.empty())
            throw ValidationError("property '" + p.name + "' names no metrics");
        if (!p.interval)
            throw ValidationError("property '" + p.name + "' has no observation interval");

        MonitorRule r;
        r.kind = actual.kind;
        r.property = p.name;
        r.subject = p.target.value;
        r.id = precalc::to_string(actual.kind) + "-" + r.subject;
        r.window.init_s = bound_value(p.interval->init_s, "interval init of '" + p.name + "'");
        r.window.size_s = bound_value(p.interval->size_s, "interval size of '" + p.name + "'");
        r.window.end_s = bound_value(p.interval->end_s, "interval end of '" + p.name + "'");
        if (r.window.size_s <= 0.0)
            throw ValidationError("property '" + p.name + "' has a non-positive window size");
        if (r.window.end_s <= r.window.init_s)
            throw ValidationError("property '" + p.name + "' has an empty observation interval");

        r.primary = build_aggregation(actual, p.metrics, p.name);
        if (!p.secondary_metrics.empty())
            r.secondary = build_aggregation(actual, p.secondary_metrics, p.name);

        r.predicate.form = p.predicate.form;
        r.predicate.comparator = p.predicate.comparator;
        r.predicate.threshold =
            bound_value(p.predicate.threshold, "threshold of '" + p.name + "'");
        if (p.predicate.low_threshold)
            r.predicate.low_threshold =
                bound_value(*p.predicate.low_threshold, "low threshold of '" + p.name + "'");
        r.predicate.consecutive_required = default_consecutive_required(p.predicate.form);

        if (p.workload) {
            RuleWorkload w;
            w.population = static_cast<long>(
                bound_value(p.workload->population, "workload population of '" + p.name + "'"));
            w.think_time_s =
                bound_value(p.workload->think_time_s, "workload think time of '" + p.name + "'");
            r.workload = w;
        }

        std::vector<std::string> subs = r.primary.input_types();
        if (r.secondary) {
            for (const auto& t : r.secondary->input_types()) subs.push_back(t);
            std::sort(subs.begin(), subs.end());
            subs.erase(std::unique(subs.begin(), subs.end()), subs.end());
        }
        r.subscriptions = std::move(subs);

        for (const auto& existing : rules)
            if (existing.id == r.id)
                throw ValidationError("duplicate rule id '" + r.id +
                                      "': two properties share kind and subject");
        rules.push_back(std::move(r));
    }
    return rules;
}

namespace {

std::string comparator_symbol(Comparator c) {
    switch (c) {
        case Comparator::LT: return "<";
        case Comparator::LE: return "<=";
        case Comparator::GT: return ">";
        case Comparator::GE: return ">=";
    }
    return "?";
}

void render_aggregation(std::string& out, const AggregationSpec& a) {
    switch (a.kind) {
        case AggregationKind::AvgResponseTime:
            out += "  metric " + a.name + ": average(timestamp(" + a.end_type + ") - timestamp(" +
                   a.start_type + ")) matched by correlation_id\n";
            break;
        case AggregationKind::Utilization:
            for (const auto& g : a.groups) {
                out += "  metric " + a.name + "[" + g.name + "]: busy_ratio of {";
                for (size_t i = 0; i < g.event_types.size(); ++i) {
                    if (i) out += ", ";
                    out += g.event_types[i];
                }
                out += "}\n";
            }
            break;
        case AggregationKind::Throughput:
            out += "  metric " + a.name + ": count(" + a.end_type + ") / window_size\n";
            break;
        case AggregationKind::Concurrency:
            out += "  metric " + a.name + ": count(" + a.start_type + ") - count(" + a.end_type +
                   ") at window close\n";
            break;
    }
}

std::string render_requirement(const MonitorRule& r) {
    const std::string th = format_double(r.predicate.threshold);
    const std::string cmp = comparator_symbol(r.predicate.comparator);
    const std::string metric = r.primary.name;
    switch (r.predicate.form) {
        case ResidualForm::ThresholdExceeded:
            return "  require: " + metric + " " + cmp + " " + th + " in every window\n";
        case ResidualForm::ConsecutiveSlope:
            return "  require: slope(" + metric + ") " + cmp + " " + th +
                   " between consecutive non-empty windows\n";
        case ResidualForm::MonotonicRun:
            return "  require: no run of strictly increasing " + metric + " with total growth > " +
                   th + "\n";
        case ResidualForm::Unbalance: {
            const std::string low =
                r.predicate.low_threshold ? format_double(*r.predicate.low_threshold) : "0";
            return "  require: not (max " + metric + " " + cmp + " " + th + " while min " + metric +
                   " <= " + low + ") across groups\n";
        }
        case ResidualForm::DeclineUnderLoad: {
            const std::string guard = r.secondary ? r.secondary->name : "load";
            return "  require: " + metric + " does not decline while " + guard + " > " + th + "\n";
        }
    }
    return "  require: (unknown form)\n";
}

}  // namespace

std::string render_rule(const MonitorRule& rule) {
    std::string out;
    out.reserve(512);
    out += "rule " + rule.id + " {\n";
    out += "  kind: " + precalc::to_string(rule.kind) + "\n";
    if (!rule.instance.empty()) out += "  instance: " + rule.instance + "\n";
    out += "  property: " + rule.property + "\n";
    out += "  subject: " + rule.subject + "\n";
    out += "  window: init " + format_double(rule.window.init_s) + " s, size " +
           format_double(rule.window.size_s) + " s, end " + format_double(rule.window.end_s) +
           " s\n";
    if (rule.workload) {
        out += "  workload: population " + std::to_string(rule.workload->population) +
               ", think_time " + format_double(rule.workload->think_time_s) + " s\n";
    }
    render_aggregation(out, rule.primary);
    if (rule.secondary) render_aggregation(out, *rule.secondary);
    out += render_requirement(rule);
    out += "  fire: after " + std::to_string(rule.predicate.consecutive_required) +
           " consecutive violating window(s)\n";
    out += "  subscribe: ";
    for (size_t i = 0; i < rule.subscriptions.size(); ++i) {
        if (i) out += ", ";
        out += rule.subscriptions[i];
    }
    out += "\n}\n";
    return out;
}

std::set<std::string> subscription_union(const std::vector<MonitorRule>& rules) {
    std::set<std::string> types;
    for (const auto& r : rules)
        for (const auto& t : r.subscriptions) types.insert(t);
    return types;
}

namespace {

json aggregation_to_json(const AggregationSpec& a) {
    json j = json::object();
    j["kind"] = to_string(a.kind);
    j["name"] = a.name;
    if (!a.start_type.empty()) j["start_type"] = a.start_type;
    if (!a.end_type.empty()) j["end_type"] = a.end_type;
    if (!a.groups.empty()) {
        json groups = json::array();
        for (const auto& g : a.groups) {
            json jg = json::object();
            jg["name"] = g.name;
            jg["event_types"] = g.event_types;
            groups.push_back(jg);
        }
        j["groups"] = groups;
    }
    return j;
}

AggregationSpec aggregation_from_json(const json& j) {
    AggregationSpec a;
    a.kind = aggregation_kind_from_string(j.at("kind").get<std::string>());
    a.name = j.at("name").get<std::string>();
    a.start_type = j.value("start_type", "");
    a.end_type = j.value("end_type", "");
    for (const auto& jg : j.value("groups", json::array())) {
        AggregationGroup g;
        g.name = jg.at("name").get<std::string>();
        for (const auto& t : jg.at("event_types")) g.event_types.push_back(t.get<std::string>());
        a.groups.push_back(std::move(g));
    }
    return a;
}

}  // namespace

std::string save_rules(const std::vector<MonitorRule>& rules) {
    json j = json::object();
    json arr = json::array();
    for (const auto& r : rules) {
        json jr = json::object();
        jr["id"] = r.id;
        if (!r.instance.empty()) jr["instance"] = r.instance;
        jr["kind"] = precalc::to_string(r.kind);
        jr["property"] = r.property;
        jr["subject"] = r.subject;
        jr["window"] = {{"init_s", r.window.init_s},
                        {"size_s", r.window.size_s},
                        {"end_s", r.window.end_s}};
        jr["primary"] = aggregation_to_json(r.primary);
        if (r.secondary) jr["secondary"] = aggregation_to_json(*r.secondary);
        json jp = json::object();
        jp["form"] = precalc::to_string(r.predicate.form);
        jp["comparator"] = pmm::to_string(r.predicate.comparator);
        jp["threshold"] = r.predicate.threshold;
        if (r.predicate.low_threshold) jp["low_threshold"] = *r.predicate.low_threshold;
        jp["consecutive_required"] = r.predicate.consecutive_required;
        jr["predicate"] = jp;
        if (r.workload)
            jr["workload"] = {{"population", r.workload->population},
                              {"think_time_s", r.workload->think_time_s}};
        jr["subscriptions"] = r.subscriptions;
        arr.push_back(std::move(jr));
    }
    j["rules"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::vector<MonitorRule> load_rules_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("invalid rule file JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rules"))
        throw ParseError("rule file: expected an object with a 'rules' array");

    std::vector<MonitorRule> rules;
    for (const auto& jr : j.at("rules")) {
        MonitorRule r;
        r.id = jr.at("id").get<std::string>();
        r.instance = jr.value("instance", "");
        r.kind = precalc::kind_from_string(jr.at("kind").get<std::string>());
        r.property = jr.at("property").get<std::string>();
        r.subject = jr.at("subject").get<std::string>();
        const json& jw = jr.at("window");
        r.window.init_s = jw.at("init_s").get<double>();
        r.window.size_s = jw.at("size_s").get<double>();
        r.window.end_s = jw.at("end_s").get<double>();
        r.primary = aggregation_from_json(jr.at("primary"));
        if (jr.contains("secondary")) r.secondary = aggregation_from_json(jr.at("secondary"));
        const json& jp = jr.at("predicate");
        r.predicate.form = precalc::residual_form_from_string(jp.at("form").get<std::string>());
        r.predicate.comparator = pmm::comparator_from_string(jp.at("comparator").get<std::string>());
        r.predicate.threshold = jp.at("threshold").get<double>();
        if (jp.contains("low_threshold"))
            r.predicate.low_threshold = jp.at("low_threshold").get<double>();
        r.predicate.consecutive_required = jp.value("consecutive_required", 1);
        if (jr.contains("workload")) {
            RuleWorkload w;
            w.population = jr.at("workload").at("population").get<long>();
            w.think_time_s = jr.at("workload").at("think_time_s").get<double>();
            r.workload = w;
        }
        for (const auto& s : jr.at("subscriptions")) r.subscriptions.push_back(s.get<std::string>());
        rules.push_back(std::move(r));
    }
    return rules;
}

std::vector<MonitorRule> load_rules(const std::string& path) {
    return load_rules_text(read_file(path));
}

void save_rules_file(const std::vector<MonitorRule>& rules, const std::string& path) {
    write_file(path, save_rules(rules));
}

}  // namespace apm::rulec
