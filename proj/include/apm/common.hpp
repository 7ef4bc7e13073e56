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

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace apm {

/// Base class for all toolkit errors. CLI layers catch this and turn it
/// into a single-line diagnostic plus a nonzero exit code.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input text (model files, event logs, rule files).
class ParseError : public Error {
  public:
    explicit ParseError(const std::string& what) : Error("parse error: " + what) {}
};

/// A structurally well-formed input that violates a documented invariant.
class ValidationError : public Error {
  public:
    explicit ValidationError(const std::string& what) : Error("validation error: " + what) {}
};

/// Shortest round-trip decimal rendering of a double. All serialized text
/// (event logs, verdict logs, rule listings, CSV) goes through this one
/// function so outputs are byte-identical across runs and platforms.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "nan";
    return std::string(buf, ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read file '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file '" + path + "'");
    out << content;
    if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace apm
