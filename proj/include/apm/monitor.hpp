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

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "apm/events.hpp"
#include "apm/precalc.hpp"
#include "apm/rulec.hpp"

namespace apm::monitor {

/// Outcome of evaluating one rule over one closed window (or pair of
/// consecutive windows for slope-style rules). `fired` marks the verdict
/// that completes the required consecutive-violation run.
struct DetectionVerdict {
    std::string rule_id;
    std::string instance_id;
    long window_index = 0;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    bool has_prev = false;
    long prev_window_index = -1;
    double prev_window_start_s = 0.0;
    double prev_window_end_s = 0.0;
    std::vector<std::pair<std::string, double>> values;  // named observations, fixed order
    double threshold = 0.0;
    std::optional<double> low_threshold;
    bool violated = false;
    bool fired = false;

    friend bool operator==(const DetectionVerdict&, const DetectionVerdict&) = default;
};

std::string format_verdict(const DetectionVerdict& v);
DetectionVerdict parse_verdict_line(const std::string& line, std::size_t line_no = 0);

/// Verdict log: `# plan` header lines (one per rule, sorted by id) followed
/// by one line per verdict in emission order.
std::string format_verdict_log(const std::map<std::string, rulec::WindowPlan>& plans,
                               const std::vector<DetectionVerdict>& verdicts);
struct VerdictLog {
    std::map<std::string, rulec::WindowPlan> plans;
    std::vector<DetectionVerdict> verdicts;
};
VerdictLog parse_verdict_log(const std::string& text);

/// Complex-event-processing core for a single rule: buffers mildly
/// out-of-order events within a reordering horizon, maintains per-window
/// aggregates, and emits one verdict per (rule, window) or window pair.
/// Single-threaded per instance; the manager serializes access.
class RuleEngine {
  public:
    struct Options {
        double reorder_horizon_s = -1.0;  // < 0: one window length
        bool absolute_slope = false;      // judge |slope| instead of signed slope
    };

    RuleEngine(rulec::MonitorRule rule, std::string instance_id);
    RuleEngine(rulec::MonitorRule rule, std::string instance_id, const Options& opts);

    /// Feeds one event; returns verdicts for any windows this event closed.
    std::vector<DetectionVerdict> process(const events::EventRecord& e);
    /// Drains the reorder buffer and finalizes every touched window.
    std::vector<DetectionVerdict> finish();

    const rulec::MonitorRule& rule() const { return rule_; }
    const std::string& instance_id() const { return instance_; }
    const std::set<std::string>& consumed_types() const { return consumed_; }
    long rejected_events() const { return rejected_; }
    long unmatched_starts() const { return static_cast<long>(open_starts_.size()); }
    long unmatched_ends() const { return unmatched_ends_; }

  private:
    struct Win {
        long arrivals = 0;
        long completions = 0;
        long rt_count = 0;
        double rt_sum = 0.0;
        std::map<std::string, double> busy_s;  // group -> in-window busy time
    };

    void ingest(const events::EventRecord& e, std::vector<DetectionVerdict>& out);
    void finalize_through(long last_index, std::vector<DetectionVerdict>& out);
    void finalize_window(long index, std::vector<DetectionVerdict>& out);
    void push_verdict(DetectionVerdict v, bool extra_fire_condition,
                      std::vector<DetectionVerdict>& out);
    void touch(long index);

    rulec::MonitorRule rule_;
    std::string instance_;
    double horizon_;
    bool absolute_slope_;

    std::set<std::string> start_types_;
    std::set<std::string> end_types_;
    std::map<std::string, std::vector<std::string>> busy_groups_;  // event type -> group names
    bool match_pairs_ = false;

    std::multimap<double, events::EventRecord> pending_;
    double max_seen_ = 0.0;
    bool any_seen_ = false;

    std::map<long, Win> windows_;  // open windows, index >= open_index_
    long open_index_ = 0;
    long max_touched_ = -1;
    bool past_end_ = false;
    std::map<std::string, double> open_starts_;  // correlation id -> start timestamp
    long unmatched_ends_ = 0;
    long rejected_ = 0;
    std::set<std::string> consumed_;

    // cumulative counters advanced as windows close, in index order
    long closed_starts_ = 0;
    long closed_ends_ = 0;

    // chain state for pair rules
    bool have_prev_ = false;
    double prev_avg_ = 0.0;
    double prev_thr_ = 0.0;
    long prev_index_ = -1;

    int run_length_ = 0;
    double run_total_ = 0.0;  // accumulated increase for monotonic runs
};

/// What probes are asked to emit: exactly the union of the event types
/// subscribed by active rules.
struct ProbeInstruction {
    std::set<std::string> enabled_types;
    std::string destination_topic = "monitor";
};

/// Thread-safe FIFO a bus subscriber reads from.
class SubscriberQueue {
  public:
    bool pop(events::EventRecord& out);
    std::vector<events::EventRecord> drain();

  private:
    friend class MonitoringBus;
    void push(const events::EventRecord& e);
    mutable std::mutex m_;
    std::deque<events::EventRecord> q_;
};

/// In-process pub-sub backbone. Delivery is serialized under one lock, so
/// every subscriber observes a single global order consistent with each
/// publisher's order. Events whose type no subscriber enabled are dropped
/// and counted.
class MonitoringBus {
  public:
    std::shared_ptr<SubscriberQueue> subscribe(const std::set<std::string>& types);
    void unsubscribe(const std::shared_ptr<SubscriberQueue>& q);
    ProbeInstruction instruction() const;
    bool publish(const events::EventRecord& e);
    long dropped_count() const;

  private:
    mutable std::mutex m_;
    struct Sub {
        std::shared_ptr<SubscriberQueue> queue;
        std::set<std::string> types;
    };
    std::vector<Sub> subs_;
    long dropped_ = 0;
};

/// Verdict channel of one registered antipattern instance.
class ConsumerChannel {
  public:
    std::vector<DetectionVerdict> drain();
    bool closed() const;
    const std::string& instance_id() const { return instance_; }

  private:
    friend class Manager;
    mutable std::mutex m_;
    std::string instance_;
    std::vector<DetectionVerdict> verdicts_;
    bool closed_ = false;
};

/// Orchestrates consumers: one verdict channel and one rule-engine set per
/// antipattern instance, and a probe instruction equal to the union of all
/// active subscriptions. Publishing is serialized; rule evaluation is
/// deterministic in arrival order.
class Manager {
  public:
    explicit Manager(const RuleEngine::Options& engine_opts = {});

    std::shared_ptr<ConsumerChannel> register_consumer(
        const precalc::AntipatternInstance& instance,
        const std::vector<rulec::MonitorRule>& rules);
    void unregister(const std::string& instance_id);

    ProbeInstruction instruction() const;
    bool publish(const events::EventRecord& e);
    void finish();

    long dropped_count() const;
    long rejected_count() const;
    long unmatched_starts() const;
    long unmatched_ends() const;
    /// Event types any engine actually consumed (the monitoring-effort audit).
    std::set<std::string> consumed_types() const;
    std::vector<DetectionVerdict> all_verdicts() const;
    std::map<std::string, rulec::WindowPlan> window_plans() const;

  private:
    struct Entry {
        precalc::AntipatternInstance instance;
        std::vector<std::unique_ptr<RuleEngine>> engines;
        std::shared_ptr<ConsumerChannel> channel;
    };
    void route(Entry& entry, std::vector<DetectionVerdict> verdicts);

    mutable std::mutex m_;
    RuleEngine::Options engine_opts_;
    std::vector<Entry> entries_;
    long dropped_ = 0;
    std::vector<DetectionVerdict> emitted_;
};

/// Folds an instance's verdict stream into fired/not-fired with the run of
/// verdicts that triggered the first firing as evidence.
struct DetectionResult {
    std::string instance_id;
    bool fired = false;
    std::vector<DetectionVerdict> evidence;
};

DetectionResult detect(const std::string& instance_id,
                       const std::vector<DetectionVerdict>& verdicts);

/// One consumer registration: the instance plus its compiled rules.
using ConsumerSpec = std::pair<precalc::AntipatternInstance, std::vector<rulec::MonitorRule>>;

struct ReplayResult {
    std::vector<DetectionVerdict> verdicts;
    std::map<std::string, DetectionResult> detections;  // instance id -> result
    std::string verdict_log;
    std::set<std::string> subscribed_types;
    std::set<std::string> consumed_types;
    long dropped = 0;
    long rejected = 0;
    long unmatched_starts = 0;
    long unmatched_ends = 0;
};

/// Replays an event log (sorted by timestamp, stable) through a fresh
/// manager. Deterministic: equal inputs produce byte-identical verdict logs.
ReplayResult replay(const std::vector<ConsumerSpec>& consumers,
                    std::vector<events::EventRecord> log,
                    const RuleEngine::Options& engine_opts = {});

}  // namespace apm::monitor
