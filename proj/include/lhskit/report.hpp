#pragma once

#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lhskit/chart.hpp"

namespace lhskit {

// Minimal ordered JSON value with byte-stable serialization: object keys keep
// insertion order and every double prints as %.17g, so reports for a fixed
// seed are reproducible to the byte. (Input configs are parsed with a full
// JSON library; this type only writes.)
class Json {
public:
    using Array = std::vector<Json>;
    using Object = std::vector<std::pair<std::string, Json>>;

    Json() : v_(nullptr) {}
    Json(std::nullptr_t) : v_(nullptr) {}
    Json(bool b) : v_(b) {}
    Json(int i) : v_(static_cast<long long>(i)) {}
    Json(long long i) : v_(i) {}
    Json(std::size_t i) : v_(static_cast<long long>(i)) {}
    Json(double d) : v_(d) {}
    Json(const char* s) : v_(std::string(s)) {}
    Json(std::string s) : v_(std::move(s)) {}

    static Json object() {
        Json j;
        j.v_ = Object{};
        return j;
    }
    static Json array() {
        Json j;
        j.v_ = Array{};
        return j;
    }
    static Json array_of(const std::vector<double>& xs) {
        Json j = array();
        for (double x : xs) j.push(Json(x));
        return j;
    }

    Json& add(const std::string& key, Json val) {
        std::get<Object>(v_).emplace_back(key, std::move(val));
        return *this;
    }
    Json& push(Json val) {
        std::get<Array>(v_).push_back(std::move(val));
        return *this;
    }

    bool is_object() const { return std::holds_alternative<Object>(v_); }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        out += '\n';
        return out;
    }

private:
    std::variant<std::nullptr_t, bool, long long, double, std::string, Array, Object> v_;

    static void escape(const std::string& s, std::string& out) {
        out += '"';
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                case '\r': out += "\\r"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out += buf;
                    } else {
                        out += c;
                    }
            }
        }
        out += '"';
    }

    void write(std::string& out, int indent, int depth) const {
        auto pad = [&](int d) {
            if (indent > 0) out.append(static_cast<std::size_t>(indent * d), ' ');
        };
        if (std::holds_alternative<std::nullptr_t>(v_)) {
            out += "null";
        } else if (auto* b = std::get_if<bool>(&v_)) {
            out += *b ? "true" : "false";
        } else if (auto* i = std::get_if<long long>(&v_)) {
            out += std::to_string(*i);
        } else if (auto* d = std::get_if<double>(&v_)) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", *d);
            out += buf;
        } else if (auto* s = std::get_if<std::string>(&v_)) {
            escape(*s, out);
        } else if (auto* arr = std::get_if<Array>(&v_)) {
            if (arr->empty()) {
                out += "[]";
                return;
            }
            out += '[';
            for (std::size_t k = 0; k < arr->size(); ++k) {
                if (indent > 0) out += '\n';
                pad(depth + 1);
                (*arr)[k].write(out, indent, depth + 1);
                if (k + 1 < arr->size()) out += ',';
            }
            if (indent > 0) out += '\n';
            pad(depth);
            out += ']';
        } else if (auto* obj = std::get_if<Object>(&v_)) {
            if (obj->empty()) {
                out += "{}";
                return;
            }
            out += '{';
            for (std::size_t k = 0; k < obj->size(); ++k) {
                if (indent > 0) out += '\n';
                pad(depth + 1);
                escape((*obj)[k].first, out);
                out += indent > 0 ? ": " : ":";
                (*obj)[k].second.write(out, indent, depth + 1);
                if (k + 1 < obj->size()) out += ',';
            }
            if (indent > 0) out += '\n';
            pad(depth);
            out += '}';
        }
    }
};

// ---------------------------------------------------------------------------
// Verification reports
// ---------------------------------------------------------------------------

inline constexpr const char* kToolVersion = "0.1.0";

struct CheckRecord {
    std::string id;
    bool pass = false;
    double worst_residual = 0.0;
    Point worst_point;
    double wall_ms = 0.0;
    std::string detail;
};

struct VerificationReport {
    std::string tool_version = kToolVersion;
    Json config_echo = Json::object();
    std::vector<CheckRecord> checks;

    bool overall_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    // Timings default to zero so that repeated runs with a fixed seed are
    // byte-identical; pass include_timings to keep the measured values.
    Json to_json(bool include_timings = false) const {
        Json root = Json::object();
        root.add("tool_version", tool_version);
        root.add("config", config_echo);
        Json arr = Json::array();
        for (const auto& c : checks) {
            Json jc = Json::object();
            jc.add("id", c.id);
            jc.add("pass", c.pass);
            jc.add("worst_residual", c.worst_residual);
            jc.add("worst_point", Json::array_of(c.worst_point));
            jc.add("wall_ms", include_timings ? c.wall_ms : 0.0);
            if (!c.detail.empty()) jc.add("detail", c.detail);
            arr.push(std::move(jc));
        }
        root.add("checks", std::move(arr));
        root.add("overall_pass", overall_pass());
        return root;
    }
};

}  // namespace lhskit
