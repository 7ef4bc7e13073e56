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
#include "apm/events.hpp"

#include <charconv>

#include "apm/common.hpp"

namespace apm::events {

namespace {

double parse_number(const std::string& text, const std::string& what, std::size_t line_no) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        std::string prefix = line_no ? "event log line " + std::to_string(line_no) + ": " : "";
        throw ParseError(prefix + what + " '" + text + "' is not a number");
    }
    return value;
}

// Field content must not collide with the log's own separators.
void check_field(const std::string& value, const std::string& what) {
    if (value.find('\t') != std::string::npos || value.find('\n') != std::string::npos)
        throw ValidationError(what + " contains a tab or newline");
}

}  // namespace

double EventRecord::number_attribute(const std::string& key) const {
    auto it = attributes.find(key);
    if (it == attributes.end())
        throw ParseError("event '" + event_type + "' has no attribute '" + key + "'");
    return parse_number(it->second, "attribute '" + key + "'", 0);
}

void EventRecord::set_number(const std::string& key, double value) {
    attributes[key] = format_double(value);
}

std::string format_event(const EventRecord& e) {
    if (e.event_type.empty()) throw ValidationError("event type is empty");
    if (e.timestamp_s < 0.0) throw ValidationError("event timestamp is negative");
    check_field(e.event_type, "event type");
    check_field(e.correlation_id, "correlation id");

    std::string line = format_double(e.timestamp_s);
    line += '\t';
    line += e.event_type;
    line += '\t';
    line += e.correlation_id;
    if (!e.attributes.empty()) {
        line += '\t';
        bool first = true;
        for (const auto& [k, v] : e.attributes) {
            check_field(k, "attribute name");
            check_field(v, "attribute value");
            if (k.find('=') != std::string::npos || k.find(',') != std::string::npos)
                throw ValidationError("attribute name '" + k + "' contains a separator");
            if (v.find(',') != std::string::npos)
                throw ValidationError("attribute value '" + v + "' contains a separator");
            if (!first) line += ',';
            first = false;
            line += k;
            line += '=';
            line += v;
        }
    }
    return line;
}

EventRecord parse_event_line(const std::string& line, std::size_t line_no) {
    const std::string prefix =
        line_no ? "event log line " + std::to_string(line_no) + ": " : "";

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    if (fields.size() < 3 || fields.size() > 4)
        throw ParseError(prefix + "expected 3 or 4 tab-separated fields, got " +
                         std::to_string(fields.size()));

    EventRecord e;
    e.timestamp_s = parse_number(fields[0], "timestamp", line_no);
    if (e.timestamp_s < 0.0) throw ParseError(prefix + "timestamp is negative");
    e.event_type = fields[1];
    if (e.event_type.empty()) throw ParseError(prefix + "event type is empty");
    e.correlation_id = fields[2];

    if (fields.size() == 4 && !fields[3].empty()) {
        std::size_t pos = 0;
        const std::string& attrs = fields[3];
        while (pos <= attrs.size()) {
            std::size_t comma = attrs.find(',', pos);
            std::string item =
                comma == std::string::npos ? attrs.substr(pos) : attrs.substr(pos, comma - pos);
            std::size_t eq = item.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ParseError(prefix + "attribute '" + item + "' is not key=value");
            e.attributes[item.substr(0, eq)] = item.substr(eq + 1);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    return e;
}

std::string format_event_log(const std::vector<EventRecord>& log) {
    std::string out;
    for (const auto& e : log) {
        out += format_event(e);
        out += '\n';
    }
    return out;
}

std::vector<EventRecord> parse_event_log(const std::string& text) {
    std::vector<EventRecord> log;
    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < text.size()) {
        std::size_t nl = text.find('\n', start);
        std::string line =
            nl == std::string::npos ? text.substr(start) : text.substr(start, nl - start);
        ++line_no;
        if (!line.empty() && line[0] != '#') log.push_back(parse_event_line(line, line_no));
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    return log;
}

std::vector<EventRecord> load_event_log(const std::string& path) {
    return parse_event_log(read_file(path));
}

void save_event_log(const std::vector<EventRecord>& log, const std::string& path) {
    write_file(path, format_event_log(log));
}

}  // namespace apm::events
