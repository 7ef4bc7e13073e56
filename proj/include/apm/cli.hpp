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

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "apm/monitor.hpp"

namespace apm::cli {

/// One row of the per-window metric table. Cells stay empty when no rule
/// observed that metric in the window.
struct WindowRow {
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    std::optional<double> avg_rt_s;
    std::map<std::string, double> utilization;  // resource -> busy ratio
    std::optional<double> throughput_per_s;
};

struct FiredEntry {
    std::string instance_id;
    std::vector<monitor::DetectionVerdict> evidence;
};

/// Result of one monitoring run: what fired, the full per-window series
/// covering every rule's window partition, and the loss/rejection counters.
struct RunReport {
    double epoch_s = 0.0;
    std::vector<FiredEntry> fired;
    std::vector<WindowRow> windows;
    long dropped = 0;
    long rejected = 0;
    long unmatched_starts = 0;
    long unmatched_ends = 0;
};

/// Merges a verdict log into per-window rows, one row per window of every
/// plan's partition, ordered by window start.
std::vector<WindowRow> window_table(const monitor::VerdictLog& log);

/// CSV series for external plotting. Columns: window_start_s,window_end_s,
/// avg_rt_s,utilization_<resource>...,throughput_per_s. Header-only when
/// the log is empty.
std::string report_csv(const monitor::VerdictLog& log);

/// Deterministic JSON serialization of a run report.
std::string save_report(const RunReport& report);

/// Parses and runs one subcommand (precalc, compile, monitor, simulate,
/// report). Returns the exit code; every failure prints one
/// "error: ..." line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace apm::cli
