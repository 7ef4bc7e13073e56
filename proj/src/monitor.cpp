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
#include "apm/monitor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "apm/common.hpp"

namespace apm::monitor {

using precalc::ResidualForm;
using rulec::AggregationKind;

namespace {

double parse_number(const std::string& text, const std::string& what, std::size_t line_no) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        std::string prefix = line_no ? "verdict log line " + std::to_string(line_no) + ": " : "";
        throw ParseError(prefix + what + " '" + text + "' is not a number");
    }
    return value;
}

bool cmp_holds(double value, pmm::Comparator cmp, double threshold) {
    switch (cmp) {
        case pmm::Comparator::LT: return value < threshold;
        case pmm::Comparator::LE: return value <= threshold;
        case pmm::Comparator::GT: return value > threshold;
        case pmm::Comparator::GE: return value >= threshold;
    }
    return false;
}

std::string bounds(double start_s, double end_s) {
    return "[" + format_double(start_s) + "," + format_double(end_s) + ")";
}

}  // namespace

std::string format_verdict(const DetectionVerdict& v) {
    std::string out = "rule=" + v.rule_id;
    out += "\tinstance=" + v.instance_id;
    out += "\twindow=" + std::to_string(v.window_index) + ":" +
           bounds(v.window_start_s, v.window_end_s);
    if (v.has_prev)
        out += "\tprev=" + std::to_string(v.prev_window_index) + ":" +
               bounds(v.prev_window_start_s, v.prev_window_end_s);
    for (const auto& [name, value] : v.values) out += "\t" + name + "=" + format_double(value);
    out += "\tthreshold=" + format_double(v.threshold);
    if (v.low_threshold) out += "\tlow_threshold=" + format_double(*v.low_threshold);
    out += std::string("\tviolated=") + (v.violated ? "true" : "false");
    out += std::string("\tfired=") + (v.fired ? "true" : "false");
    return out;
}

namespace {

// Parses "<index>:[<start>,<end>)" window references from verdict lines.
void parse_window_ref(const std::string& text, long& index, double& start_s, double& end_s,
                      std::size_t line_no) {
    const std::string prefix =
        line_no ? "verdict log line " + std::to_string(line_no) + ": " : "";
    std::size_t colon = text.find(':');
    std::size_t lb = text.find('[');
    std::size_t comma = text.find(',', lb);
    std::size_t rb = text.find(')', comma);
    if (colon == std::string::npos || lb == std::string::npos || comma == std::string::npos ||
        rb == std::string::npos)
        throw ParseError(prefix + "malformed window reference '" + text + "'");
    index = static_cast<long>(parse_number(text.substr(0, colon), "window index", line_no));
    start_s = parse_number(text.substr(lb + 1, comma - lb - 1), "window start", line_no);
    end_s = parse_number(text.substr(comma + 1, rb - comma - 1), "window end", line_no);
}

bool parse_bool(const std::string& text, const std::string& what, std::size_t line_no) {
    if (text == "true") return true;
    if (text == "false") return false;
    const std::string prefix =
        line_no ? "verdict log line " + std::to_string(line_no) + ": " : "";
    throw ParseError(prefix + what + " must be true or false, got '" + text + "'");
}

}  // namespace

DetectionVerdict parse_verdict_line(const std::string& line, std::size_t line_no) {
    const std::string prefix =
        line_no ? "verdict log line " + std::to_string(line_no) + ": " : "";
    DetectionVerdict v;
    bool saw_rule = false, saw_window = false, saw_threshold = false;
    bool saw_violated = false, saw_fired = false;

    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t tab = line.find('\t', start);
        std::string token =
            tab == std::string::npos ? line.substr(start) : line.substr(start, tab - start);
        std::size_t eq = token.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ParseError(prefix + "field '" + token + "' is not key=value");
        std::string key = token.substr(0, eq);
        std::string value = token.substr(eq + 1);

        if (key == "rule") {
            v.rule_id = value;
            saw_rule = true;
        } else if (key == "instance") {
            v.instance_id = value;
        } else if (key == "window") {
            parse_window_ref(value, v.window_index, v.window_start_s, v.window_end_s, line_no);
            saw_window = true;
        } else if (key == "prev") {
            v.has_prev = true;
            parse_window_ref(value, v.prev_window_index, v.prev_window_start_s,
                             v.prev_window_end_s, line_no);
        } else if (key == "threshold") {
            v.threshold = parse_number(value, "threshold", line_no);
            saw_threshold = true;
        } else if (key == "low_threshold") {
            v.low_threshold = parse_number(value, "low threshold", line_no);
        } else if (key == "violated") {
            v.violated = parse_bool(value, "violated", line_no);
            saw_violated = true;
        } else if (key == "fired") {
            v.fired = parse_bool(value, "fired", line_no);
            saw_fired = true;
        } else {
            v.values.emplace_back(key, parse_number(value, "value '" + key + "'", line_no));
        }
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (!saw_rule || !saw_window || !saw_threshold || !saw_violated || !saw_fired)
        throw ParseError(prefix + "verdict line is missing a required field");
    return v;
}

std::string format_verdict_log(const std::map<std::string, rulec::WindowPlan>& plans,
                               const std::vector<DetectionVerdict>& verdicts) {
    std::string out;
    for (const auto& [id, plan] : plans) {
        out += "# plan\trule=" + id + "\tinit=" + format_double(plan.init_s) + "\tsize=" +
               format_double(plan.size_s) + "\tend=" + format_double(plan.end_s) + "\n";
    }
    for (const auto& v : verdicts) {
        out += format_verdict(v);
        out += '\n';
    }
    return out;
}

VerdictLog parse_verdict_log(const std::string& text) {
    VerdictLog log;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line =
            nl == std::string::npos ? text.substr(start) : text.substr(start, nl - start);
        ++line_no;
        if (line.rfind("# plan\t", 0) == 0) {
            std::string rest = line.substr(7);
            std::string rule;
            rulec::WindowPlan plan;
            std::size_t pos = 0;
            while (pos <= rest.size()) {
                std::size_t tab = rest.find('\t', pos);
                std::string token =
                    tab == std::string::npos ? rest.substr(pos) : rest.substr(pos, tab - pos);
                std::size_t eq = token.find('=');
                if (eq != std::string::npos) {
                    std::string key = token.substr(0, eq);
                    std::string value = token.substr(eq + 1);
                    if (key == "rule") rule = value;
                    if (key == "init") plan.init_s = parse_number(value, "plan init", line_no);
                    if (key == "size") plan.size_s = parse_number(value, "plan size", line_no);
                    if (key == "end") plan.end_s = parse_number(value, "plan end", line_no);
                }
                if (tab == std::string::npos) break;
                pos = tab + 1;
            }
            if (rule.empty())
                throw ParseError("verdict log line " + std::to_string(line_no) +
                                 ": plan header without a rule id");
            log.plans[rule] = plan;
        } else if (!line.empty() && line[0] != '#') {
            log.verdicts.push_back(parse_verdict_line(line, line_no));
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return log;
}

RuleEngine::RuleEngine(rulec::MonitorRule rule, std::string instance_id)
    : RuleEngine(std::move(rule), std::move(instance_id), Options{}) {}

RuleEngine::RuleEngine(rulec::MonitorRule rule, std::string instance_id, const Options& opts)
    : rule_(std::move(rule)),
      instance_(std::move(instance_id)),
      horizon_(opts.reorder_horizon_s),
      absolute_slope_(opts.absolute_slope) {
    if (rule_.window.size_s <= 0.0)
        throw ValidationError("rule '" + rule_.id + "' has a non-positive window size");
    if (rule_.window.end_s <= rule_.window.init_s)
        throw ValidationError("rule '" + rule_.id + "' has an empty observation interval");
    if (horizon_ < 0.0) horizon_ = rule_.window.size_s;

    auto wire = [this](const rulec::AggregationSpec& a) {
        switch (a.kind) {
            case AggregationKind::AvgResponseTime:
                start_types_.insert(a.start_type);
                end_types_.insert(a.end_type);
                match_pairs_ = true;
                break;
            case AggregationKind::Throughput:
                end_types_.insert(a.end_type);
                break;
            case AggregationKind::Concurrency:
                start_types_.insert(a.start_type);
                end_types_.insert(a.end_type);
                break;
            case AggregationKind::Utilization:
                for (const auto& g : a.groups)
                    for (const auto& t : g.event_types) busy_groups_[t].push_back(g.name);
                break;
        }
    };
    wire(rule_.primary);
    if (rule_.secondary) wire(*rule_.secondary);

    const AggregationKind primary = rule_.primary.kind;
    const ResidualForm form = rule_.predicate.form;
    const bool ok =
        ((form == ResidualForm::ConsecutiveSlope || form == ResidualForm::MonotonicRun) &&
         primary == AggregationKind::AvgResponseTime) ||
        ((form == ResidualForm::ThresholdExceeded || form == ResidualForm::Unbalance) &&
         primary == AggregationKind::Utilization) ||
        (form == ResidualForm::DeclineUnderLoad && primary == AggregationKind::Throughput);
    if (!ok)
        throw ValidationError("rule '" + rule_.id + "': predicate form " +
                              precalc::to_string(form) + " does not match aggregation " +
                              rulec::to_string(primary));
    if (form == ResidualForm::DeclineUnderLoad &&
        (!rule_.secondary || rule_.secondary->kind != AggregationKind::Concurrency))
        throw ValidationError("rule '" + rule_.id +
                              "': decline-under-load needs a concurrency guard metric");
}

void RuleEngine::touch(long index) { max_touched_ = std::max(max_touched_, index); }

std::vector<DetectionVerdict> RuleEngine::process(const events::EventRecord& e) {
    consumed_.insert(e.event_type);
    std::vector<DetectionVerdict> out;
    if (any_seen_ && e.timestamp_s < max_seen_ - horizon_) {
        ++rejected_;
        return out;
    }
    pending_.insert({e.timestamp_s, e});
    max_seen_ = any_seen_ ? std::max(max_seen_, e.timestamp_s) : e.timestamp_s;
    any_seen_ = true;
    while (!pending_.empty() && pending_.begin()->first <= max_seen_ - horizon_) {
        events::EventRecord next = std::move(pending_.begin()->second);
        pending_.erase(pending_.begin());
        ingest(next, out);
    }
    return out;
}

std::vector<DetectionVerdict> RuleEngine::finish() {
    std::vector<DetectionVerdict> out;
    while (!pending_.empty()) {
        events::EventRecord next = std::move(pending_.begin()->second);
        pending_.erase(pending_.begin());
        ingest(next, out);
    }
    if (!past_end_ && max_touched_ >= 0) finalize_through(max_touched_, out);
    return out;
}

void RuleEngine::ingest(const events::EventRecord& e, std::vector<DetectionVerdict>& out) {
    const double ts = e.timestamp_s;
    const rulec::WindowPlan& plan = rule_.window;

    if (ts >= plan.end_s) {
        // Crossing the final boundary closes everything still open.
        if (!past_end_) {
            past_end_ = true;
            finalize_through(plan.window_count() - 1, out);
        }
        return;
    }
    const long idx = plan.index_of(ts);
    if (idx < 0 || past_end_) return;  // before init (or a late pre-end event after close)
    if (idx < open_index_) return;     // cannot happen with ordered ingestion; ignore
    if (idx > open_index_) finalize_through(idx - 1, out);

    const std::string& type = e.event_type;
    bool counted = false;
    if (start_types_.count(type)) {
        windows_[idx].arrivals += 1;
        counted = true;
        if (match_pairs_ && !open_starts_.count(e.correlation_id))
            open_starts_[e.correlation_id] = ts;
    }
    if (end_types_.count(type)) {
        windows_[idx].completions += 1;
        counted = true;
        if (match_pairs_) {
            auto it = open_starts_.find(e.correlation_id);
            if (it != open_starts_.end()) {
                windows_[idx].rt_sum += ts - it->second;
                windows_[idx].rt_count += 1;
                open_starts_.erase(it);
            } else {
                ++unmatched_ends_;
            }
        }
    }
    auto git = busy_groups_.find(type);
    if (git != busy_groups_.end()) {
        const double duration = e.number_attribute("duration");
        if (duration < 0.0)
            throw ValidationError("busy event '" + type + "' has a negative duration");
        const double b0 = ts;
        const double b1 = std::min(ts + duration, plan.end_s);
        for (long j = idx; j < plan.window_count() && plan.window_start(j) < b1; ++j) {
            const double overlap =
                std::min(b1, plan.window_end(j)) - std::max(b0, plan.window_start(j));
            if (overlap > 0.0) {
                for (const auto& g : git->second) windows_[j].busy_s[g] += overlap;
                touch(j);
                counted = true;
            }
        }
    }
    if (counted) touch(idx);
}

void RuleEngine::finalize_through(long last_index, std::vector<DetectionVerdict>& out) {
    for (long j = open_index_; j <= last_index; ++j) finalize_window(j, out);
    if (last_index >= open_index_) open_index_ = last_index + 1;
}

void RuleEngine::push_verdict(DetectionVerdict v, bool extra_fire_condition,
                              std::vector<DetectionVerdict>& out) {
    if (v.violated) {
        ++run_length_;
        v.fired = run_length_ >= rule_.predicate.consecutive_required && extra_fire_condition;
    } else {
        run_length_ = 0;
        v.fired = false;
    }
    out.push_back(std::move(v));
}

void RuleEngine::finalize_window(long index, std::vector<DetectionVerdict>& out) {
    Win w;
    auto it = windows_.find(index);
    if (it != windows_.end()) {
        w = std::move(it->second);
        windows_.erase(it);
    }
    closed_starts_ += w.arrivals;
    closed_ends_ += w.completions;

    const double size = rule_.window.size_s;
    DetectionVerdict v;
    v.rule_id = rule_.id;
    v.instance_id = instance_;
    v.window_index = index;
    v.window_start_s = rule_.window.window_start(index);
    v.window_end_s = rule_.window.window_end(index);
    v.threshold = rule_.predicate.threshold;
    v.low_threshold = rule_.predicate.low_threshold;

    switch (rule_.primary.kind) {
        case AggregationKind::AvgResponseTime: {
            if (w.rt_count == 0) return;  // empty windows break no chains, emit nothing
            const double avg = w.rt_sum / static_cast<double>(w.rt_count);
            if (have_prev_) {
                const double raw = avg - prev_avg_;
                v.has_prev = true;
                v.prev_window_index = prev_index_;
                v.prev_window_start_s = rule_.window.window_start(prev_index_);
                v.prev_window_end_s = rule_.window.window_end(prev_index_);
                if (rule_.predicate.form == ResidualForm::ConsecutiveSlope) {
                    const double slope = absolute_slope_ ? std::fabs(raw) : raw;
                    v.values = {{"avg_rt_prev", prev_avg_}, {"avg_rt", avg}, {"slope", slope}};
                    v.violated = !cmp_holds(slope, rule_.predicate.comparator, v.threshold);
                    push_verdict(std::move(v), true, out);
                } else {
                    v.values = {{"avg_rt_prev", prev_avg_}, {"avg_rt", avg}, {"increase", raw}};
                    v.violated = raw > 0.0;
                    if (v.violated)
                        run_total_ += raw;
                    else
                        run_total_ = 0.0;
                    push_verdict(std::move(v), run_total_ > v.threshold, out);
                }
            }
            have_prev_ = true;
            prev_avg_ = avg;
            prev_index_ = index;
            return;
        }
        case AggregationKind::Utilization: {
            double max_u = 0.0;
            double min_u = 1.0;
            for (const auto& g : rule_.primary.groups) {
                auto bit = w.busy_s.find(g.name);
                double u = bit == w.busy_s.end() ? 0.0 : bit->second / size;
                u = std::min(std::max(u, 0.0), 1.0);
                v.values.emplace_back("utilization_" + g.name, u);
                max_u = std::max(max_u, u);
                min_u = std::min(min_u, u);
            }
            if (rule_.predicate.form == ResidualForm::ThresholdExceeded) {
                // comparator states the prescription; violation is its negation
                v.violated = !cmp_holds(max_u, rule_.predicate.comparator, v.threshold);
            } else {
                const double low = v.low_threshold.value_or(0.0);
                v.violated = rule_.primary.groups.size() >= 2 &&
                             cmp_holds(max_u, rule_.predicate.comparator, v.threshold) &&
                             min_u <= low;
            }
            push_verdict(std::move(v), true, out);
            return;
        }
        case AggregationKind::Throughput: {
            const double thr = static_cast<double>(w.completions) / size;
            const double conc = static_cast<double>(closed_starts_ - closed_ends_);
            if (!have_prev_) {
                have_prev_ = true;
                prev_thr_ = thr;
                prev_index_ = index;
                return;
            }
            v.has_prev = true;
            v.prev_window_index = prev_index_;
            v.prev_window_start_s = rule_.window.window_start(prev_index_);
            v.prev_window_end_s = rule_.window.window_end(prev_index_);
            v.values = {{"throughput_prev", prev_thr_},
                        {"throughput", thr},
                        {"concurrency", conc}};
            v.violated = conc > v.threshold && thr < prev_thr_;
            push_verdict(std::move(v), true, out);
            prev_thr_ = thr;
            prev_index_ = index;
            return;
        }
        case AggregationKind::Concurrency:
            return;  // guard metric only; never a primary (enforced in ctor)
    }
}

bool SubscriberQueue::pop(events::EventRecord& out) {
    std::lock_guard<std::mutex> lock(m_);
    if (q_.empty()) return false;
    out = std::move(q_.front());
    q_.pop_front();
    return true;
}

std::vector<events::EventRecord> SubscriberQueue::drain() {
    std::lock_guard<std::mutex> lock(m_);
    std::vector<events::EventRecord> out(q_.begin(), q_.end());
    q_.clear();
    return out;
}

void SubscriberQueue::push(const events::EventRecord& e) {
    std::lock_guard<std::mutex> lock(m_);
    q_.push_back(e);
}

std::shared_ptr<SubscriberQueue> MonitoringBus::subscribe(const std::set<std::string>& types) {
    if (types.empty()) throw ValidationError("subscription must name at least one event type");
    std::lock_guard<std::mutex> lock(m_);
    auto q = std::make_shared<SubscriberQueue>();
    subs_.push_back({q, types});
    return q;
}

void MonitoringBus::unsubscribe(const std::shared_ptr<SubscriberQueue>& q) {
    std::lock_guard<std::mutex> lock(m_);
    for (auto it = subs_.begin(); it != subs_.end(); ++it) {
        if (it->queue == q) {
            subs_.erase(it);
            return;
        }
    }
    throw ValidationError("queue is not subscribed to this bus");
}

ProbeInstruction MonitoringBus::instruction() const {
    std::lock_guard<std::mutex> lock(m_);
    ProbeInstruction pi;
    for (const auto& s : subs_) pi.enabled_types.insert(s.types.begin(), s.types.end());
    return pi;
}

bool MonitoringBus::publish(const events::EventRecord& e) {
    std::lock_guard<std::mutex> lock(m_);
    bool delivered = false;
    for (auto& s : subs_) {
        if (s.types.count(e.event_type)) {
            s.queue->push(e);
            delivered = true;
        }
    }
    if (!delivered) ++dropped_;
    return delivered;
}

long MonitoringBus::dropped_count() const {
    std::lock_guard<std::mutex> lock(m_);
    return dropped_;
}

std::vector<DetectionVerdict> ConsumerChannel::drain() {
    std::lock_guard<std::mutex> lock(m_);
    std::vector<DetectionVerdict> out = std::move(verdicts_);
    verdicts_.clear();
    return out;
}

bool ConsumerChannel::closed() const {
    std::lock_guard<std::mutex> lock(m_);
    return closed_;
}

Manager::Manager(const RuleEngine::Options& engine_opts) : engine_opts_(engine_opts) {}

std::shared_ptr<ConsumerChannel> Manager::register_consumer(
    const precalc::AntipatternInstance& instance, const std::vector<rulec::MonitorRule>& rules) {
    std::lock_guard<std::mutex> lock(m_);
    const std::string id = instance.id();
    for (const auto& e : entries_)
        if (e.instance.id() == id)
            throw ValidationError("a consumer for instance '" + id + "' is already registered");

    Entry entry;
    entry.instance = instance;
    entry.channel = std::make_shared<ConsumerChannel>();
    entry.channel->instance_ = id;
    for (const auto& r : rules)
        entry.engines.push_back(std::make_unique<RuleEngine>(r, id, engine_opts_));
    entries_.push_back(std::move(entry));
    return entries_.back().channel;
}

void Manager::unregister(const std::string& instance_id) {
    std::lock_guard<std::mutex> lock(m_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->instance.id() == instance_id) {
            {
                std::lock_guard<std::mutex> clock(it->channel->m_);
                it->channel->closed_ = true;
            }
            entries_.erase(it);
            return;
        }
    }
    throw ValidationError("no consumer registered for instance '" + instance_id + "'");
}

ProbeInstruction Manager::instruction() const {
    std::lock_guard<std::mutex> lock(m_);
    ProbeInstruction pi;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines)
            pi.enabled_types.insert(engine->rule().subscriptions.begin(),
                                    engine->rule().subscriptions.end());
    return pi;
}

void Manager::route(Entry& entry, std::vector<DetectionVerdict> verdicts) {
    if (verdicts.empty()) return;
    std::lock_guard<std::mutex> clock(entry.channel->m_);
    for (auto& v : verdicts) {
        entry.channel->verdicts_.push_back(v);
        emitted_.push_back(std::move(v));
    }
}

bool Manager::publish(const events::EventRecord& e) {
    std::lock_guard<std::mutex> lock(m_);
    bool enabled = false;
    for (const auto& entry : entries_) {
        for (const auto& engine : entry.engines) {
            if (std::binary_search(engine->rule().subscriptions.begin(),
                                   engine->rule().subscriptions.end(), e.event_type)) {
                enabled = true;
                break;
            }
        }
        if (enabled) break;
    }
    if (!enabled) {
        ++dropped_;
        return false;
    }
    for (auto& entry : entries_) {
        for (auto& engine : entry.engines) {
            if (std::binary_search(engine->rule().subscriptions.begin(),
                                   engine->rule().subscriptions.end(), e.event_type))
                route(entry, engine->process(e));
        }
    }
    return true;
}

void Manager::finish() {
    std::lock_guard<std::mutex> lock(m_);
    for (auto& entry : entries_)
        for (auto& engine : entry.engines) route(entry, engine->finish());
}

long Manager::dropped_count() const {
    std::lock_guard<std::mutex> lock(m_);
    return dropped_;
}

long Manager::rejected_count() const {
    std::lock_guard<std::mutex> lock(m_);
    long n = 0;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines) n += engine->rejected_events();
    return n;
}

long Manager::unmatched_starts() const {
    std::lock_guard<std::mutex> lock(m_);
    long n = 0;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines) n += engine->unmatched_starts();
    return n;
}

long Manager::unmatched_ends() const {
    std::lock_guard<std::mutex> lock(m_);
    long n = 0;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines) n += engine->unmatched_ends();
    return n;
}

std::set<std::string> Manager::consumed_types() const {
    std::lock_guard<std::mutex> lock(m_);
    std::set<std::string> out;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines)
            out.insert(engine->consumed_types().begin(), engine->consumed_types().end());
    return out;
}

std::vector<DetectionVerdict> Manager::all_verdicts() const {
    std::lock_guard<std::mutex> lock(m_);
    return emitted_;
}

std::map<std::string, rulec::WindowPlan> Manager::window_plans() const {
    std::lock_guard<std::mutex> lock(m_);
    std::map<std::string, rulec::WindowPlan> plans;
    for (const auto& e : entries_)
        for (const auto& engine : e.engines) plans[engine->rule().id] = engine->rule().window;
    return plans;
}

DetectionResult detect(const std::string& instance_id,
                       const std::vector<DetectionVerdict>& verdicts) {
    DetectionResult result;
    result.instance_id = instance_id;

    std::map<std::string, std::vector<const DetectionVerdict*>> by_rule;
    for (const auto& v : verdicts) by_rule[v.rule_id].push_back(&v);

    for (const auto& v : verdicts) {
        if (!v.fired) continue;
        result.fired = true;
        // Evidence: the consecutive violated verdicts of this rule that end
        // at the first firing verdict.
        const auto& seq = by_rule[v.rule_id];
        std::size_t at = 0;
        for (std::size_t i = 0; i < seq.size(); ++i)
            if (seq[i] == &v) at = i;
        std::vector<const DetectionVerdict*> run;
        for (std::size_t i = at + 1; i-- > 0;) {
            if (!seq[i]->violated) break;
            run.push_back(seq[i]);
        }
        for (std::size_t i = run.size(); i-- > 0;) result.evidence.push_back(*run[i]);
        break;
    }
    return result;
}

ReplayResult replay(const std::vector<ConsumerSpec>& consumers,
                    std::vector<events::EventRecord> log,
                    const RuleEngine::Options& engine_opts) {
    Manager manager(engine_opts);
    std::vector<std::pair<std::string, std::shared_ptr<ConsumerChannel>>> channels;
    for (const auto& [instance, rules] : consumers)
        channels.emplace_back(instance.id(), manager.register_consumer(instance, rules));

    std::stable_sort(log.begin(), log.end(),
                     [](const events::EventRecord& a, const events::EventRecord& b) {
                         return a.timestamp_s < b.timestamp_s;
                     });
    ReplayResult result;
    result.subscribed_types = manager.instruction().enabled_types;
    for (const auto& e : log) manager.publish(e);
    manager.finish();

    result.verdicts = manager.all_verdicts();
    result.consumed_types = manager.consumed_types();
    result.dropped = manager.dropped_count();
    result.rejected = manager.rejected_count();
    result.unmatched_starts = manager.unmatched_starts();
    result.unmatched_ends = manager.unmatched_ends();
    for (auto& [id, channel] : channels) result.detections[id] = detect(id, channel->drain());
    result.verdict_log = format_verdict_log(manager.window_plans(), result.verdicts);
    return result;
}

}  // namespace apm::monitor
