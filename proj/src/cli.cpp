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
#include "apm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "apm/common.hpp"
#include "apm/events.hpp"
#include "apm/model.hpp"
#include "apm/pmm.hpp"
#include "apm/precalc.hpp"
#include "apm/qnsim.hpp"
#include "apm/rulec.hpp"
#include "json.hpp"

namespace apm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<WindowRow> window_table(const monitor::VerdictLog& log) {
    std::map<std::pair<double, double>, WindowRow> rows;
    auto ensure = [&rows](double start_s, double end_s) -> WindowRow& {
        auto [it, inserted] = rows.try_emplace({start_s, end_s});
        if (inserted) {
            it->second.window_start_s = start_s;
            it->second.window_end_s = end_s;
        }
        return it->second;
    };

    for (const auto& [id, plan] : log.plans)
        for (long j = 0; j < plan.window_count(); ++j)
            ensure(plan.window_start(j), plan.window_end(j));

    for (const auto& v : log.verdicts) {
        WindowRow& row = ensure(v.window_start_s, v.window_end_s);
        WindowRow* prev =
            v.has_prev ? &ensure(v.prev_window_start_s, v.prev_window_end_s) : nullptr;
        for (const auto& [name, value] : v.values) {
            if (name == "avg_rt") {
                row.avg_rt_s = value;
            } else if (name == "avg_rt_prev") {
                if (prev && !prev->avg_rt_s) prev->avg_rt_s = value;
            } else if (name == "throughput") {
                row.throughput_per_s = value;
            } else if (name == "throughput_prev") {
                if (prev && !prev->throughput_per_s) prev->throughput_per_s = value;
            } else if (name.rfind("utilization_", 0) == 0) {
                row.utilization[name.substr(12)] = value;
            }
            // slope, increase and concurrency are rule internals, not series
        }
    }

    std::vector<WindowRow> out;
    out.reserve(rows.size());
    for (auto& [key, row] : rows) out.push_back(std::move(row));
    return out;
}

std::string report_csv(const monitor::VerdictLog& log) {
    const std::vector<WindowRow> rows = window_table(log);
    std::set<std::string> resources;
    for (const auto& r : rows)
        for (const auto& [res, u] : r.utilization) resources.insert(res);

    std::string out = "window_start_s,window_end_s,avg_rt_s";
    for (const auto& res : resources) out += ",utilization_" + res;
    out += ",throughput_per_s\n";

    for (const auto& r : rows) {
        out += format_double(r.window_start_s) + "," + format_double(r.window_end_s) + ",";
        if (r.avg_rt_s) out += format_double(*r.avg_rt_s);
        for (const auto& res : resources) {
            out += ",";
            auto it = r.utilization.find(res);
            if (it != r.utilization.end()) out += format_double(it->second);
        }
        out += ",";
        if (r.throughput_per_s) out += format_double(*r.throughput_per_s);
        out += "\n";
    }
    return out;
}

namespace {

json verdict_to_json(const monitor::DetectionVerdict& v) {
    json j = json::object();
    j["rule"] = v.rule_id;
    j["instance"] = v.instance_id;
    j["window_index"] = v.window_index;
    j["window_start_s"] = v.window_start_s;
    j["window_end_s"] = v.window_end_s;
    if (v.has_prev) {
        j["prev_window_index"] = v.prev_window_index;
        j["prev_window_start_s"] = v.prev_window_start_s;
        j["prev_window_end_s"] = v.prev_window_end_s;
    }
    json values = json::object();
    for (const auto& [name, value] : v.values) values[name] = value;
    j["values"] = values;
    j["threshold"] = v.threshold;
    if (v.low_threshold) j["low_threshold"] = *v.low_threshold;
    j["violated"] = v.violated;
    j["fired"] = v.fired;
    return j;
}

}  // namespace

std::string save_report(const RunReport& report) {
    json j = json::object();
    j["epoch_s"] = report.epoch_s;
    j["counters"] = {{"dropped", report.dropped},
                     {"rejected", report.rejected},
                     {"unmatched_starts", report.unmatched_starts},
                     {"unmatched_ends", report.unmatched_ends}};
    json fired = json::array();
    for (const auto& f : report.fired) {
        json jf = json::object();
        jf["instance"] = f.instance_id;
        json ev = json::array();
        for (const auto& v : f.evidence) ev.push_back(verdict_to_json(v));
        jf["evidence"] = ev;
        fired.push_back(std::move(jf));
    }
    j["fired"] = std::move(fired);
    json windows = json::array();
    for (const auto& w : report.windows) {
        json jw = json::object();
        jw["window_start_s"] = w.window_start_s;
        jw["window_end_s"] = w.window_end_s;
        if (w.avg_rt_s) jw["avg_rt_s"] = *w.avg_rt_s;
        if (!w.utilization.empty()) {
            json ju = json::object();
            for (const auto& [res, u] : w.utilization) ju[res] = u;
            jw["utilization"] = ju;
        }
        if (w.throughput_per_s) jw["throughput_per_s"] = *w.throughput_per_s;
        windows.push_back(std::move(jw));
    }
    j["windows"] = std::move(windows);
    return j.dump(2) + "\n";
}

namespace {

struct PrecalcArgs {
    std::string model;
    std::string out;
};

struct CompileArgs {
    std::string pa;
    std::string model;
    std::string thresholds;
    std::string out;
};

struct MonitorArgs {
    std::string rules;
    std::string pa;
    std::string replay;
    std::string out;
    bool absolute_slope = false;
    double reorder_horizon = -1.0;
};

struct SimulateArgs {
    std::string model;
    std::string scenario;
    std::string mode = "burst";
    long jobs = 0;
    double t0 = 0.0;
    double inter_release = 0.0;
    double horizon = 0.0;
    unsigned long long seed = 1;
    std::string service = "exponential";
    double measure_from = 0.0;
    std::string refactor;
    double factor = 1.0;
    bool solve = false;
    std::string out;
};

struct ReportArgs {
    std::string verdicts;
    std::string out;
};

int do_precalc(const PrecalcArgs& a, std::ostream& out) {
    const model::SystemModel m = model::load_model(a.model);
    const std::vector<precalc::AntipatternInstance> pa = precalc::precalculate(m);
    write_file(a.out, precalc::save_instances(pa));
    out << "precalc: " << pa.size() << " candidate(s) -> " << a.out << "\n";
    for (const auto& inst : pa)
        out << "  " << inst.id() << " residual " << precalc::to_string(inst.residual.form)
            << "\n";
    return 0;
}

int do_compile(const CompileArgs& a, std::ostream& out) {
    const model::SystemModel m = model::load_model(a.model);
    model::ThresholdSet thresholds = m.thresholds;
    if (!a.thresholds.empty())
        thresholds = model::load_thresholds_text(read_file(a.thresholds));

    const auto instances = precalc::load_instances(a.pa);
    std::vector<rulec::MonitorRule> all;
    for (const auto& inst : instances) {
        for (const auto& req : pmm::actualization_request(inst, m)) {
            const pmm::ParameterBinding binding = pmm::resolve_thresholds(req, thresholds);
            const pmm::PropertyModel actual =
                pmm::actualize(pmm::library().at(req.kind), binding);
            for (auto& rule : rulec::compile(actual)) {
                rule.instance = inst.id();
                for (const auto& existing : all)
                    if (existing.id == rule.id)
                        throw ValidationError("duplicate rule id '" + rule.id +
                                              "' across instances");
                all.push_back(std::move(rule));
            }
        }
    }
    fs::create_directories(a.out);
    for (const auto& rule : all)
        write_file((fs::path(a.out) / (rule.id + ".rule")).string(), rulec::render_rule(rule));
    rulec::save_rules_file(all, (fs::path(a.out) / "rules.json").string());
    out << "compile: " << all.size() << " rule(s) -> " << a.out << "\n";
    for (const auto& rule : all) out << "  " << rule.id << "\n";
    return 0;
}

int do_monitor(const MonitorArgs& a, std::ostream& out) {
    const std::vector<rulec::MonitorRule> rules = rulec::load_rules(a.rules);
    if (rules.empty()) throw ValidationError("rule file '" + a.rules + "' contains no rules");

    std::vector<monitor::ConsumerSpec> consumers;
    if (!a.pa.empty()) {
        const auto instances = precalc::load_instances(a.pa);
        std::map<std::string, std::vector<rulec::MonitorRule>> grouped;
        for (const auto& rule : rules) {
            if (rule.instance.empty())
                throw ValidationError("rule '" + rule.id +
                                      "' carries no instance id; recompile, or omit --pa");
            grouped[rule.instance].push_back(rule);
        }
        std::set<std::string> known;
        for (const auto& inst : instances) {
            known.insert(inst.id());
            auto it = grouped.find(inst.id());
            if (it != grouped.end()) consumers.push_back({inst, it->second});
        }
        for (const auto& [id, group] : grouped)
            if (!known.count(id))
                throw ValidationError("rule '" + group.front().id +
                                      "' references unknown instance '" + id + "'");
    } else {
        // no candidate file: each rule becomes its own consumer
        for (const auto& rule : rules) {
            precalc::AntipatternInstance inst;
            inst.kind = rule.kind;
            inst.bindings["rule"] = rule.id;
            inst.residual.form = rule.predicate.form;
            consumers.push_back({inst, {rule}});
        }
    }
    if (consumers.empty())
        throw ValidationError("no rule matches any pre-calculated instance");

    const std::vector<events::EventRecord> log = events::load_event_log(a.replay);
    monitor::RuleEngine::Options opts;
    opts.absolute_slope = a.absolute_slope;
    opts.reorder_horizon_s = a.reorder_horizon;
    const monitor::ReplayResult result = monitor::replay(consumers, log, opts);

    fs::create_directories(a.out);
    write_file((fs::path(a.out) / "verdicts.log").string(), result.verdict_log);

    RunReport report;
    report.dropped = result.dropped;
    report.rejected = result.rejected;
    report.unmatched_starts = result.unmatched_starts;
    report.unmatched_ends = result.unmatched_ends;
    monitor::VerdictLog vl;
    vl.verdicts = result.verdicts;
    for (const auto& rule : rules) vl.plans[rule.id] = rule.window;
    report.windows = window_table(vl);
    for (const auto& [id, detection] : result.detections)
        if (detection.fired) report.fired.push_back({id, detection.evidence});
    write_file((fs::path(a.out) / "report.json").string(), save_report(report));

    out << "monitor: " << result.verdicts.size() << " verdict(s), " << report.fired.size()
        << " fired -> " << a.out << "\n";
    for (const auto& [id, detection] : result.detections)
        out << "  " << id << ": " << (detection.fired ? "FIRED" : "quiet") << "\n";
    return 0;
}

int do_simulate(const SimulateArgs& a, std::ostream& out) {
    const model::SystemModel m = model::load_model(a.model);
    qnsim::QnNetwork net = qnsim::derive_qn(m, a.scenario);
    if (!a.refactor.empty()) net = qnsim::apply_refactoring(net, a.refactor, a.factor);
    if (a.solve) out << qnsim::format_solution(net, qnsim::mva_solve(net));

    qnsim::SimOptions opts;
    opts.horizon_s = a.horizon;
    opts.seed = a.seed;
    opts.sampling = a.service == "deterministic" ? qnsim::ServiceSampling::Deterministic
                                                 : qnsim::ServiceSampling::Exponential;
    opts.measure_from_s = a.measure_from;

    qnsim::SimResult result;
    if (a.mode == "burst") {
        qnsim::BurstSpec burst;
        burst.n_jobs = a.jobs > 0 ? a.jobs : net.population;
        burst.t0_s = a.t0;
        burst.inter_release_s = a.inter_release;
        result = qnsim::simulate_burst(net, burst, opts);
    } else {
        result = qnsim::simulate_steady(net, opts);
    }
    events::save_event_log(result.log, a.out);
    out << "simulate: " << result.log.size() << " event(s), " << result.completions
        << " completion(s), mean_rt " << format_double(result.response_time_s)
        << " s, throughput " << format_double(result.throughput_per_s) << " /s -> " << a.out
        << "\n";
    return 0;
}

int do_report(const ReportArgs& a, std::ostream& out) {
    const monitor::VerdictLog vl = monitor::parse_verdict_log(read_file(a.verdicts));
    const std::string csv = report_csv(vl);
    write_file(a.out, csv);
    out << "report: " << window_table(vl).size() << " window row(s) -> " << a.out << "\n";
    return 0;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\t', ' ');
    return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"antipattern detection toolkit: pre-calculus, rule compilation, "
                 "monitoring, queueing analysis"};
    app.require_subcommand(1);

    PrecalcArgs pre;
    auto* cmd_precalc = app.add_subcommand("precalc", "evaluate design sub-predicates off-line");
    cmd_precalc->add_option("--model", pre.model, "system model file")->required();
    cmd_precalc->add_option("--out", pre.out, "candidate set output file")->required();

    CompileArgs comp;
    auto* cmd_compile = app.add_subcommand("compile", "compile candidates into monitor rules");
    cmd_compile->add_option("--pa", comp.pa, "candidate set file")->required();
    cmd_compile->add_option("--model", comp.model, "system model file")->required();
    cmd_compile->add_option("--thresholds", comp.thresholds,
                            "threshold bindings file (defaults to the model's)");
    cmd_compile->add_option("--out", comp.out, "output directory")->required();

    MonitorArgs mon;
    auto* cmd_monitor = app.add_subcommand("monitor", "replay an event log through the rules");
    cmd_monitor->add_option("--rules", mon.rules, "compiled rule file")->required();
    cmd_monitor->add_option("--pa", mon.pa, "candidate set file (groups rules per instance)");
    cmd_monitor->add_option("--replay", mon.replay, "event log to replay")->required();
    cmd_monitor->add_option("--out", mon.out, "output directory")->required();
    cmd_monitor->add_flag("--absolute-slope", mon.absolute_slope,
                          "judge |slope| instead of signed slope");
    cmd_monitor->add_option("--reorder-horizon", mon.reorder_horizon,
                            "out-of-order tolerance in seconds (default: one window)");

    SimulateArgs sim;
    auto* cmd_simulate = app.add_subcommand("simulate", "run the queueing-network simulator");
    cmd_simulate->add_option("--model", sim.model, "system model file")->required();
    cmd_simulate->add_option("--scenario", sim.scenario, "scenario name")->required();
    cmd_simulate->add_option("--mode", sim.mode, "burst or steady")
        ->check(CLI::IsMember({"burst", "steady"}));
    cmd_simulate->add_option("--jobs", sim.jobs, "burst size (default: scenario population)");
    cmd_simulate->add_option("--t0", sim.t0, "burst release time in seconds");
    cmd_simulate->add_option("--inter-release", sim.inter_release,
                             "burst release spacing in seconds (0 = simultaneous)");
    cmd_simulate->add_option("--horizon", sim.horizon, "simulated seconds")->required();
    cmd_simulate->add_option("--seed", sim.seed, "random seed");
    cmd_simulate->add_option("--service", sim.service, "exponential or deterministic")
        ->check(CLI::IsMember({"exponential", "deterministic"}));
    cmd_simulate->add_option("--measure-from", sim.measure_from,
                             "start of the measurement window in seconds");
    cmd_simulate->add_option("--refactor", sim.refactor, "station or node to rescale");
    cmd_simulate->add_option("--factor", sim.factor, "demand scale factor for --refactor");
    cmd_simulate->add_flag("--solve", sim.solve, "print the analytic solution first");
    cmd_simulate->add_option("--out", sim.out, "event log output file")->required();

    ReportArgs rep;
    auto* cmd_report = app.add_subcommand("report", "turn a verdict log into a CSV series");
    cmd_report->add_option("--verdicts", rep.verdicts, "verdict log file")->required();
    cmd_report->add_option("--out", rep.out, "CSV output file")->required();

    std::vector<const char*> argv;
    argv.push_back("apmon");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    }

    try {
        if (cmd_precalc->parsed()) return do_precalc(pre, out);
        if (cmd_compile->parsed()) return do_compile(comp, out);
        if (cmd_monitor->parsed()) return do_monitor(mon, out);
        if (cmd_simulate->parsed()) return do_simulate(sim, out);
        if (cmd_report->parsed()) return do_report(rep, out);
        err << "error: no subcommand given\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << one_line(e.what()) << "\n";
        return 1;
    }
}

}  // namespace apm::cli
