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

#include <string>
#include <vector>

#include "apm/events.hpp"
#include "apm/model.hpp"

namespace apm::qnsim {

enum class StationKind {
    Queueing,  // single server, first come first served
    Delay,     // infinite servers, pure latency
};

std::string to_string(StationKind k);

/// One service center of the closed network. Demand is the total service
/// requirement per job visit, in seconds.
struct Station {
    std::string name;
    StationKind kind = StationKind::Queueing;
    double demand_s = 0.0;

    friend bool operator==(const Station&, const Station&) = default;
};

/// Single-class closed queueing network with a serial visit path: every job
/// visits the stations once, in order, then spends the think time.
struct QnNetwork {
    std::string scenario;  // names the start/end event types of emitted logs
    std::vector<Station> stations;
    long population = 1;
    double think_time_s = 0.0;

    const Station* find_station(const std::string& name) const;

    friend bool operator==(const QnNetwork&, const QnNetwork&) = default;
};

struct StationSolution {
    std::string name;
    StationKind kind;
    double demand_s = 0.0;
    double residence_s = 0.0;    // R_k at full population
    double queue_length = 0.0;   // Q_k, time average number at the station
    double utilization = 0.0;    // X * D_k for queueing stations, 0 for delay
};

struct QnSolution {
    std::vector<StationSolution> stations;
    double response_time_s = 0.0;   // sum of residence times
    double throughput_per_s = 0.0;  // X at full population
    long population = 0;
    double think_time_s = 0.0;
};

/// Builds the network of a scenario: per message, cpu and disk demand lands
/// on the sender's node stations (cpu-<node>, disk-<node>) and transfer time
/// on the link between sender and receiver nodes. Stations appear in first-
/// contribution order; zero-demand stations are omitted.
QnNetwork derive_qn(const model::SystemModel& m, const std::string& scenario);

/// Exact mean-value analysis: R_k(n) = D_k (1 + Q_k(n-1)) for queueing
/// stations, D_k for delay stations; X(n) = n / (Z + sum R_k); Q_k = X R_k.
QnSolution mva_solve(const QnNetwork& net);

/// Stable two-column table of a solution, for reports.
std::string format_solution(const QnNetwork& net, const QnSolution& sol);

enum class ServiceSampling {
    Exponential,   // mean-D exponential draws (matches the analytic model)
    Deterministic, // exactly D every visit (for closed-form oracles)
};

struct SimOptions {
    double horizon_s = 0.0;
    unsigned long long seed = 1;
    ServiceSampling sampling = ServiceSampling::Exponential;
    double measure_from_s = 0.0;  // statistics ignore anything earlier
    bool collect_log = true;      // false: statistics only, no event records
};

/// Burst release plan: n_jobs released starting at t0, one every
/// inter_release_s seconds (0 = all simultaneously).
struct BurstSpec {
    long n_jobs = 0;
    double t0_s = 0.0;
    double inter_release_s = 0.0;
};

struct SimStationStats {
    std::string name;
    StationKind kind;
    double demand_s = 0.0;
    long visits = 0;           // departures inside the measurement window
    double residence_s = 0.0;  // mean time at the station per visit
    double queue_length = 0.0; // time average number present
    double utilization = 0.0;  // busy fraction (queueing stations)
    double throughput_per_s = 0.0;
};

struct SimResult {
    std::vector<events::EventRecord> log;  // sorted by timestamp
    long completions = 0;                  // measured completed passes
    double response_time_s = 0.0;          // mean over measured passes
    double throughput_per_s = 0.0;
    double measured_from_s = 0.0;
    double measured_until_s = 0.0;
    std::vector<SimStationStats> stations;
};

/// Closed-workload simulation: jobs cycle through the visit path and the
/// think time until the horizon. Deterministic for fixed inputs and seed.
SimResult simulate_steady(const QnNetwork& net, const SimOptions& opts);

/// One-shot backlog: each job runs the visit path once. Deterministic for
/// fixed inputs and seed.
SimResult simulate_burst(const QnNetwork& net, const BurstSpec& burst, const SimOptions& opts);

/// Scales the demand of every station matching `target` (exact station name,
/// or node name matching the cpu-/disk- suffix) by `factor`.
QnNetwork apply_refactoring(const QnNetwork& net, const std::string& target, double factor);

}  // namespace apm::qnsim
