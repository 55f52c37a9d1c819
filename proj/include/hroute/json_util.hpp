#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hroute/error.hpp"

namespace hroute {

/// Insertion-ordered JSON. Spec documents keep the key order they were
/// written with so the exchange files round-trip byte for byte.
using Json = nlohmann::ordered_json;

namespace detail {

inline void dump_python_into(const Json& j, std::string& out) {
    switch (j.type()) {
        case Json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [key, value] : j.items()) {
                if (!first) out += ", ";
                first = false;
                out += Json(key).dump(-1, ' ', false, Json::error_handler_t::replace);
                out += ": ";
                dump_python_into(value, out);
            }
            out += '}';
            break;
        }
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& value : j) {
                if (!first) out += ", ";
                first = false;
                dump_python_into(value, out);
            }
            out += ']';
            break;
        }
        default:
            out += j.dump(-1, ' ', false, Json::error_handler_t::replace);
    }
}

}  // namespace detail

/// Single-line JSON with ", " and ": " separators, the layout Python's
/// json.dumps produces by default. Used inside rendered call tags.
inline std::string dump_inline(const Json& j) {
    std::string out;
    detail::dump_python_into(j, out);
    return out;
}

/// Indented (2 spaces) JSON, no ASCII escaping.
inline std::string dump_pretty(const Json& j) { return j.dump(2, ' ', false, Json::error_handler_t::replace); }

/// Compact single-line JSON for line-oriented files.
inline std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

inline std::string_view trim(std::string_view s) noexcept {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool starts_with(std::string_view s, std::string_view prefix) noexcept {
    return s.substr(0, prefix.size()) == prefix;
}

/// Text between the first `open` and the next `close` after it.
inline std::optional<std::string_view> extract_between(std::string_view text, std::string_view open, std::string_view close) {
    const auto b = text.find(open);
    if (b == std::string_view::npos) return std::nullopt;
    const auto start = b + open.size();
    const auto e = text.find(close, start);
    if (e == std::string_view::npos) return std::nullopt;
    return text.substr(start, e - start);
}

/// Removes one surrounding markdown code fence (```json ... ```), if any.
inline std::string strip_code_fence(std::string_view text) {
    std::string_view body = trim(text);
    if (!starts_with(body, "```")) return std::string(body);
    const auto first_nl = body.find('\n');
    if (first_nl == std::string_view::npos) return std::string(body);
    body.remove_prefix(first_nl + 1);
    body = trim(body);
    if (body.size() >= 3 && body.substr(body.size() - 3) == "```") body.remove_suffix(3);
    return std::string(trim(body));
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error(Errc::IoError, "read failed: " + path);
    return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IoError, "cannot open for writing " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::IoError, "write failed: " + path);
}

/// A JSON document together with its 1-based source line.
struct LineRecord {
    std::size_t line = 0;
    Json value;
};

/// Parses a file holding either one JSON array or one JSON value per line.
/// Blank lines are skipped. Throws ParseError with "path:line".
inline std::vector<LineRecord> parse_records(std::string_view text, const std::string& origin) {
    std::vector<LineRecord> out;
    const auto body = trim(text);
    if (body.empty()) return out;
    if (body.front() == '[') {
        Json arr;
        try {
            arr = Json::parse(body);
        } catch (const Json::parse_error& e) {
            throw Error(Errc::ParseError, origin + ":1: " + e.what());
        }
        // Line numbers are not tracked inside a single array; report 1-based element index.
        std::size_t i = 0;
        for (auto& v : arr) out.push_back({++i, std::move(v)});
        return out;
    }
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        ++line_no;
        const auto line = trim(text.substr(pos, nl - pos));
        if (!line.empty()) {
            try {
                out.push_back({line_no, Json::parse(line)});
            } catch (const Json::parse_error& e) {
                throw Error(Errc::ParseError, origin + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        pos = nl + 1;
    }
    return out;
}

inline std::vector<LineRecord> read_records(const std::string& path) { return parse_records(read_text_file(path), path); }

/// Writes one compact JSON value per line.
inline void write_records(const std::string& path, const std::vector<Json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += dump_line(r);
        out += '\n';
    }
    write_text_file(path, out);
}

}  // namespace hroute
