// Canonical machine-readable reports: a small JSON value tree with sorted
// object keys and fixed 12-significant-digit number formatting, so equal
// documents always serialize to equal bytes.

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace haplo {

/// Rounds through the 12-significant-digit decimal representation used in
/// reports, making stored and re-read values identical.
double round12(double value);

class JsonValue {
  public:
    enum class Kind { null, boolean, number, string, array, object };

    JsonValue() = default;
    static JsonValue boolean(bool b);
    /// Numbers are rounded via round12; non-finite values become the
    /// strings "inf", "-inf", "nan" (documented in docs/config_schema.md).
    static JsonValue number(double v);
    static JsonValue integer(long long v);
    static JsonValue string(std::string s);
    static JsonValue array();
    static JsonValue object();

    Kind kind() const { return kind_; }

    void push_back(JsonValue v);                   // arrays
    JsonValue& field(const std::string& key);      // objects; inserts null
    const JsonValue* find(const std::string& key) const;

    /// Canonical serialization: sorted keys, no whitespace variation.
    std::string serialize() const;

  private:
    Kind kind_ = Kind::null;
    bool bool_ = false;
    double number_ = 0.0;
    long long integer_ = 0;
    bool is_integer_ = false;
    std::string string_;
    std::vector<JsonValue> array_;
    std::map<std::string, JsonValue> object_;
};

struct ReportDocument {
    int schema_version = 1;
    std::string command;             // subcommand echo
    std::string config_fingerprint;  // of the bench config acted on
    std::string timestamp_utc;       // the only non-deterministic field
    int exit_code = 0;
    JsonValue results;

    JsonValue to_json() const;
};

/// Current time as ISO-8601 UTC (e.g. 2026-08-15T12:00:00Z).
std::string utc_timestamp();

/// Writes doc as canonical JSON plus trailing newline. Throws
/// std::runtime_error naming the path on I/O failure.
void write_report(const ReportDocument& doc, const std::string& path);

}  // namespace haplo
