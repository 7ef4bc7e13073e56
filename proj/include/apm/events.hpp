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
#include <string>
#include <vector>

namespace apm::events {

/// One primitive event on the monitoring bus. Timestamps are seconds on the
/// scenario clock; attributes are scalars kept in text form so a record
/// round-trips the log format byte-exactly.
struct EventRecord {
    double timestamp_s = 0.0;
    std::string event_type;
    std::string correlation_id;
    std::map<std::string, std::string> attributes;

    /// Numeric attribute value; throws ParseError if absent or non-numeric.
    double number_attribute(const std::string& key) const;
    void set_number(const std::string& key, double value);

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

/// Log line: `timestamp_s<TAB>event_type<TAB>correlation_id<TAB>key=value,...`
/// (the attribute field is omitted when there are no attributes).
std::string format_event(const EventRecord& e);
EventRecord parse_event_line(const std::string& line, std::size_t line_no = 0);

std::string format_event_log(const std::vector<EventRecord>& log);
std::vector<EventRecord> parse_event_log(const std::string& text);
std::vector<EventRecord> load_event_log(const std::string& path);
void save_event_log(const std::vector<EventRecord>& log, const std::string& path);

}  // namespace apm::events
