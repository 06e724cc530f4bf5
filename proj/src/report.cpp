#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "haplo/report.hpp"

namespace haplo {

double round12(double value) {
    if (!std::isfinite(value)) return value;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return std::strtod(buf, nullptr);
}

JsonValue JsonValue::boolean(bool b) {
    JsonValue v;
    v.kind_ = Kind::boolean;
    v.bool_ = b;
    return v;
}

JsonValue JsonValue::number(double value) {
    JsonValue v;
    if (!std::isfinite(value)) {
        v.kind_ = Kind::string;
        v.string_ = std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
        return v;
    }
    v.kind_ = Kind::number;
    v.number_ = round12(value);
    return v;
}

JsonValue JsonValue::integer(long long value) {
    JsonValue v;
    v.kind_ = Kind::number;
    v.is_integer_ = true;
    v.integer_ = value;
    return v;
}

JsonValue JsonValue::string(std::string s) {
    JsonValue v;
    v.kind_ = Kind::string;
    v.string_ = std::move(s);
    return v;
}

JsonValue JsonValue::array() {
    JsonValue v;
    v.kind_ = Kind::array;
    return v;
}

JsonValue JsonValue::object() {
    JsonValue v;
    v.kind_ = Kind::object;
    return v;
}

void JsonValue::push_back(JsonValue v) {
    if (kind_ != Kind::array) throw std::logic_error("push_back on a non-array value");
    array_.push_back(std::move(v));
}

JsonValue& JsonValue::field(const std::string& key) {
    if (kind_ != Kind::object) throw std::logic_error("field() on a non-object value");
    return object_[key];
}

const JsonValue* JsonValue::find(const std::string& key) const {
    if (kind_ != Kind::object) return nullptr;
    const auto it = object_.find(key);
    return it == object_.end() ? nullptr : &it->second;
}

namespace {

void escape_into(const std::string& s, std::string& out) {
    out.push_back('"');
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04x", c);
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    out.push_back('"');
}

}  // namespace

std::string JsonValue::serialize() const {
    std::string out;
    switch (kind_) {
        case Kind::null:
            out = "null";
            break;
        case Kind::boolean:
            out = bool_ ? "true" : "false";
            break;
        case Kind::number:
            if (is_integer_) {
                out = std::to_string(integer_);
            } else {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.12g", number_);
                out = buf;
            }
            break;
        case Kind::string:
            escape_into(string_, out);
            break;
        case Kind::array: {
            out.push_back('[');
            bool first = true;
            for (const JsonValue& item : array_) {
                if (!first) out.push_back(',');
                first = false;
                out += item.serialize();
            }
            out.push_back(']');
            break;
        }
        case Kind::object: {
            out.push_back('{');
            bool first = true;
            for (const auto& [key, value] : object_) {
                if (!first) out.push_back(',');
                first = false;
                escape_into(key, out);
                out.push_back(':');
                out += value.serialize();
            }
            out.push_back('}');
            break;
        }
    }
    return out;
}

JsonValue ReportDocument::to_json() const {
    JsonValue root = JsonValue::object();
    root.field("schema_version") = JsonValue::integer(schema_version);
    root.field("command") = JsonValue::string(command);
    root.field("config_fingerprint") = JsonValue::string(config_fingerprint);
    root.field("timestamp_utc") = JsonValue::string(timestamp_utc);
    root.field("exit_code") = JsonValue::integer(exit_code);
    root.field("results") = results;
    return root;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void write_report(const ReportDocument& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open report file " + path);
    out << doc.to_json().serialize() << "\n";
    out.flush();
    if (!out) throw std::runtime_error("failed writing report file " + path);
}

}  // namespace haplo
