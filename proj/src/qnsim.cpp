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
#include "apm/qnsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <random>

#include "apm/common.hpp"
#include "apm/pmm.hpp"

namespace apm::qnsim {

std::string to_string(StationKind k) {
    return k == StationKind::Queueing ? "queueing" : "delay";
}

const Station* QnNetwork::find_station(const std::string& name) const {
    for (const auto& s : stations)
        if (s.name == name) return &s;
    return nullptr;
}

QnNetwork derive_qn(const model::SystemModel& m, const std::string& scenario) {
    const model::Scenario* s = m.find_scenario(scenario);
    if (!s) throw ValidationError("scenario '" + scenario + "' not found in model '" + m.name + "'");

    QnNetwork net;
    net.scenario = s->name;
    net.population = s->workload.population;
    net.think_time_s = s->workload.think_time_s;
    if (net.population < 1)
        throw ValidationError("scenario '" + scenario + "' has a population below 1");

    auto charge = [&net](const std::string& name, StationKind kind, double demand_s) {
        if (demand_s <= 0.0) return;
        for (auto& st : net.stations) {
            if (st.name == name) {
                st.demand_s += demand_s;
                return;
            }
        }
        net.stations.push_back({name, kind, demand_s});
    };

    auto node_of = [&m, &scenario](const std::string& component) -> const model::ProcessingNode* {
        if (!m.find_component(component))
            throw ValidationError("scenario '" + scenario + "' references unknown component '" +
                                  component + "'");
        const std::string node = m.node_of(component);
        if (node.empty())
            throw ValidationError("component '" + component + "' is not deployed on any node");
        const model::ProcessingNode* n = m.find_node(node);
        if (!n) throw ValidationError("deployment of '" + component + "' names unknown node '" +
                                      node + "'");
        return n;
    };

    for (const auto& msg : s->messages) {
        const model::ProcessingNode* sender = node_of(msg.sender);
        const model::ProcessingNode* receiver = node_of(msg.receiver);

        if (msg.cpu_instructions > 0)
            charge("cpu-" + sender->name, StationKind::Queueing,
                   static_cast<double>(msg.cpu_instructions) * sender->cpu_time_per_instruction_s);
        if (msg.disk_accesses > 0) {
            if (sender->disk_time_per_access_s <= 0.0)
                throw ValidationError("message from '" + msg.sender + "' needs disk on node '" +
                                      sender->name + "', which has no disk access time");
            charge("disk-" + sender->name, StationKind::Queueing,
                   static_cast<double>(msg.disk_accesses) * sender->disk_time_per_access_s);
        }
        if (msg.size_mbit > 0.0 && sender->name != receiver->name) {
            const model::NetworkLink* link = m.link_between(sender->name, receiver->name);
            if (!link)
                throw ValidationError("no network link connects nodes '" + sender->name +
                                      "' and '" + receiver->name + "'");
            if (link->bandwidth_mbit_per_s <= 0.0)
                throw ValidationError("network link '" + link->name + "' has no bandwidth");
            charge(link->name,
                   link->is_delay_center ? StationKind::Delay : StationKind::Queueing,
                   msg.size_mbit / link->bandwidth_mbit_per_s);
        }
    }
    if (net.stations.empty())
        throw ValidationError("scenario '" + scenario + "' places no demand on any resource");
    return net;
}

namespace {

void check_network(const QnNetwork& net) {
    if (net.population < 1) throw ValidationError("network population must be at least 1");
    if (net.think_time_s < 0.0) throw ValidationError("think time must be non-negative");
    if (net.stations.empty()) throw ValidationError("network has no stations");
    for (const auto& st : net.stations)
        if (st.demand_s <= 0.0)
            throw ValidationError("station '" + st.name + "' has a non-positive demand");
}

}  // namespace

QnSolution mva_solve(const QnNetwork& net) {
    check_network(net);
    const std::size_t k_count = net.stations.size();
    std::vector<double> queue(k_count, 0.0);
    std::vector<double> residence(k_count, 0.0);
    double x = 0.0;

    for (long n = 1; n <= net.population; ++n) {
        double total_r = 0.0;
        for (std::size_t k = 0; k < k_count; ++k) {
            const Station& st = net.stations[k];
            residence[k] = st.kind == StationKind::Queueing ? st.demand_s * (1.0 + queue[k])
                                                            : st.demand_s;
            total_r += residence[k];
        }
        x = static_cast<double>(n) / (net.think_time_s + total_r);
        for (std::size_t k = 0; k < k_count; ++k) queue[k] = x * residence[k];
    }

    QnSolution sol;
    sol.population = net.population;
    sol.think_time_s = net.think_time_s;
    sol.throughput_per_s = x;
    for (std::size_t k = 0; k < k_count; ++k) {
        const Station& st = net.stations[k];
        StationSolution out;
        out.name = st.name;
        out.kind = st.kind;
        out.demand_s = st.demand_s;
        out.residence_s = residence[k];
        out.queue_length = queue[k];
        out.utilization = st.kind == StationKind::Queueing
                              ? std::min(std::max(x * st.demand_s, 0.0), 1.0)
                              : 0.0;
        sol.response_time_s += residence[k];
        sol.stations.push_back(std::move(out));
    }
    return sol;
}

std::string format_solution(const QnNetwork& net, const QnSolution& sol) {
    std::string out;
    out += "network " + net.scenario + ": population " + std::to_string(sol.population) +
           ", think_time " + format_double(sol.think_time_s) + " s\n";
    out += "station\tkind\tdemand_s\tresidence_s\tqueue_length\tutilization\n";
    for (const auto& st : sol.stations) {
        out += st.name + "\t" + to_string(st.kind) + "\t" + format_double(st.demand_s) + "\t" +
               format_double(st.residence_s) + "\t" + format_double(st.queue_length) + "\t" +
               format_double(st.utilization) + "\n";
    }
    out += "system\tresponse_time_s=" + format_double(sol.response_time_s) +
           "\tthroughput_per_s=" + format_double(sol.throughput_per_s) + "\n";
    return out;
}

namespace {

// Unit-interval draw with 53 random bits; log1p keeps small quantiles exact.
class Sampler {
  public:
    Sampler(unsigned long long seed, ServiceSampling sampling)
        : rng_(seed), sampling_(sampling) {}

    double draw(double mean) {
        if (sampling_ == ServiceSampling::Deterministic) return mean;
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        return -mean * std::log1p(-u);
    }

  private:
    std::mt19937_64 rng_;
    ServiceSampling sampling_;
};

struct Job {
    long id = 0;
    long cycle = 0;
    double released_at = 0.0;     // current pass start (the start event timestamp)
    double station_arrival = 0.0; // arrival at the current station
    std::size_t station = 0;
};

enum class EvKind { Release, Depart };

struct Ev {
    double t;
    long seq;
    EvKind kind;
    long job;
    std::size_t station;

    bool operator>(const Ev& other) const {
        if (t != other.t) return t > other.t;
        return seq > other.seq;
    }
};

struct StationState {
    bool busy = false;
    std::deque<long> fifo;
    // measurement accumulators
    long present = 0;
    double last_change = 0.0;
    double queue_integral = 0.0;
    double busy_s = 0.0;
    long visits = 0;
    double residence_sum = 0.0;
};

class Simulation {
  public:
    Simulation(const QnNetwork& net, const SimOptions& opts)
        : net_(net),
          opts_(opts),
          sampler_(opts.seed, opts.sampling),
          start_type_(pmm::scenario_start_event(net.scenario)),
          end_type_(pmm::scenario_end_event(net.scenario)) {
        check_network(net);
        if (opts.horizon_s <= 0.0) throw ValidationError("simulation horizon must be positive");
        if (opts.measure_from_s < 0.0 || opts.measure_from_s >= opts.horizon_s)
            throw ValidationError("measurement start must lie inside the horizon");
        stations_.resize(net.stations.size());
    }

    void schedule(double t, EvKind kind, long job, std::size_t station = 0) {
        heap_.push({t, seq_++, kind, job, station});
    }

    void add_job(long id, double release_t, long cycle) {
        Job j;
        j.id = id;
        j.cycle = cycle;
        jobs_[id] = j;
        schedule(release_t, EvKind::Release, id);
    }

    double draw_think() { return sampler_.draw(net_.think_time_s); }

    SimResult run(bool steady) {
        steady_ = steady;
        double last_t = 0.0;
        while (!heap_.empty()) {
            Ev ev = heap_.top();
            if (ev.t > opts_.horizon_s) {
                last_t = opts_.horizon_s;
                break;
            }
            heap_.pop();
            last_t = ev.t;
            if (ev.kind == EvKind::Release)
                on_release(ev);
            else
                on_depart(ev);
        }
        if (heap_.empty()) last_t = std::max(last_t, opts_.measure_from_s);
        return finalize(last_t);
    }

    void on_release(const Ev& ev) {
        Job& j = jobs_[ev.job];
        j.released_at = ev.t;
        j.station = 0;
        emit(ev.t, start_type_, correlation(j));
        arrive(j, 0, ev.t);
    }

    void on_depart(const Ev& ev) {
        Job& j = jobs_[ev.job];
        StationState& st = stations_[ev.station];
        depart_stats(st, j, ev.t);
        if (net_.stations[ev.station].kind == StationKind::Queueing) {
            st.busy = false;
            if (!st.fifo.empty()) {
                const long next = st.fifo.front();
                st.fifo.pop_front();
                begin_service(ev.station, next, ev.t);
            }
        }
        const std::size_t next_station = ev.station + 1;
        if (next_station < net_.stations.size()) {
            arrive(j, next_station, ev.t);
        } else {
            complete_pass(j, ev.t);
        }
    }

    void arrive(Job& j, std::size_t k, double t) {
        j.station = k;
        j.station_arrival = t;
        StationState& st = stations_[k];
        integrate(st, t);
        st.present += 1;
        if (net_.stations[k].kind == StationKind::Delay) {
            const double svc = sampler_.draw(net_.stations[k].demand_s);
            schedule(t + svc, EvKind::Depart, j.id, k);
        } else if (st.busy) {
            st.fifo.push_back(j.id);
        } else {
            begin_service(k, j.id, t);
        }
    }

    void begin_service(std::size_t k, long job_id, double t) {
        StationState& st = stations_[k];
        st.busy = true;
        const double svc = sampler_.draw(net_.stations[k].demand_s);
        record_busy(k, t, svc);
        // the busy event keeps its full duration even when it crosses the horizon
        emit_busy(k, t, svc, jobs_[job_id]);
        schedule(t + svc, EvKind::Depart, job_id, k);
    }

    void complete_pass(Job& j, double t) {
        emit(t, end_type_, correlation(j));
        if (j.released_at >= opts_.measure_from_s) {
            completions_ += 1;
            rt_sum_ += t - j.released_at;
        }
        if (steady_) {
            j.cycle += 1;
            const double think = sampler_.draw(net_.think_time_s);
            schedule(t + think, EvKind::Release, j.id);
        }
    }

    SimResult finalize(double until) {
        for (auto& st : stations_) integrate(st, until);
        SimResult r;
        r.measured_from_s = opts_.measure_from_s;
        r.measured_until_s = until;
        const double elapsed = std::max(until - opts_.measure_from_s, 1e-12);
        r.completions = completions_;
        r.response_time_s = completions_ ? rt_sum_ / static_cast<double>(completions_) : 0.0;
        r.throughput_per_s = static_cast<double>(completions_) / elapsed;
        for (std::size_t k = 0; k < stations_.size(); ++k) {
            const StationState& st = stations_[k];
            SimStationStats out;
            out.name = net_.stations[k].name;
            out.kind = net_.stations[k].kind;
            out.demand_s = net_.stations[k].demand_s;
            out.visits = st.visits;
            out.residence_s =
                st.visits ? st.residence_sum / static_cast<double>(st.visits) : 0.0;
            out.queue_length = st.queue_integral / elapsed;
            out.utilization = out.kind == StationKind::Queueing
                                  ? std::min(std::max(st.busy_s / elapsed, 0.0), 1.0)
                                  : 0.0;
            out.throughput_per_s = static_cast<double>(st.visits) / elapsed;
            r.stations.push_back(std::move(out));
        }
        std::stable_sort(log_.begin(), log_.end(),
                         [](const events::EventRecord& a, const events::EventRecord& b) {
                             return a.timestamp_s < b.timestamp_s;
                         });
        r.log = std::move(log_);
        return r;
    }

  private:
    std::string correlation(const Job& j) const {
        return steady_ ? "job" + std::to_string(j.id) + "-c" + std::to_string(j.cycle)
                       : "job" + std::to_string(j.id);
    }

    void emit(double t, const std::string& type, const std::string& cid) {
        if (!opts_.collect_log) return;
        events::EventRecord e;
        e.timestamp_s = t;
        e.event_type = type;
        e.correlation_id = cid;
        log_.push_back(std::move(e));
    }

    void emit_busy(std::size_t k, double t, double duration, const Job& j) {
        if (!opts_.collect_log) return;
        events::EventRecord e;
        e.timestamp_s = t;
        e.event_type = pmm::busy_event(net_.stations[k].name);
        e.correlation_id = correlation(j);
        e.attributes["resource"] = net_.stations[k].name;
        e.set_number("duration", duration);
        log_.push_back(std::move(e));
    }

    void integrate(StationState& st, double t) {
        const double from = std::max(st.last_change, opts_.measure_from_s);
        const double to = std::min(t, opts_.horizon_s);
        if (to > from) st.queue_integral += static_cast<double>(st.present) * (to - from);
        st.last_change = std::max(st.last_change, t);
    }

    void record_busy(std::size_t k, double start, double duration) {
        StationState& st = stations_[k];
        const double from = std::max(start, opts_.measure_from_s);
        const double to = std::min(start + duration, opts_.horizon_s);
        if (to > from) st.busy_s += to - from;
    }

    void depart_stats(StationState& st, const Job& j, double t) {
        integrate(st, t);
        st.present -= 1;
        if (j.station_arrival >= opts_.measure_from_s) {
            st.visits += 1;
            st.residence_sum += t - j.station_arrival;
        }
    }

    const QnNetwork& net_;
    SimOptions opts_;
    Sampler sampler_;
    std::string start_type_;
    std::string end_type_;
    bool steady_ = false;

    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> heap_;
    long seq_ = 0;
    std::map<long, Job> jobs_;
    std::vector<StationState> stations_;
    std::vector<events::EventRecord> log_;

    long completions_ = 0;
    double rt_sum_ = 0.0;
};

}  // namespace

SimResult simulate_steady(const QnNetwork& net, const SimOptions& opts) {
    Simulation sim(net, opts);
    // Everybody starts with a think period, so first releases stagger.
    for (long id = 0; id < net.population; ++id) sim.add_job(id, sim.draw_think(), 0);
    return sim.run(true);
}

SimResult simulate_burst(const QnNetwork& net, const BurstSpec& burst, const SimOptions& opts) {
    if (burst.n_jobs < 1) throw ValidationError("burst needs at least one job");
    if (burst.t0_s < 0.0) throw ValidationError("burst release time must be non-negative");
    if (burst.inter_release_s < 0.0)
        throw ValidationError("burst release spacing must be non-negative");
    Simulation sim(net, opts);
    for (long id = 0; id < burst.n_jobs; ++id)
        sim.add_job(id, burst.t0_s + static_cast<double>(id) * burst.inter_release_s, 0);
    return sim.run(false);
}

QnNetwork apply_refactoring(const QnNetwork& net, const std::string& target, double factor) {
    if (factor <= 0.0) throw ValidationError("refactoring factor must be positive");
    QnNetwork out = net;
    bool matched = false;
    const std::string suffix = "-" + target;
    for (auto& st : out.stations) {
        const bool node_match = st.name.size() > suffix.size() &&
                                st.name.compare(st.name.size() - suffix.size(), suffix.size(),
                                                suffix) == 0;
        if (st.name == target || node_match) {
            st.demand_s *= factor;
            matched = true;
        }
    }
    if (!matched)
        throw ValidationError("refactoring target '" + target + "' matches no station");
    return out;
}

}  // namespace apm::qnsim
