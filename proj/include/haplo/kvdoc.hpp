// Strict single-document text format: nested [section.path] headers with
// key = value lines, '#' comments, explicit unit suffixes on dimensioned
// keys. Unknown keys and sections are errors; diagnostics carry line
// numbers and field paths.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace haplo {

struct Diagnostic {
    int line = 0;           // 1-based; 0 when not tied to a line
    std::string path;       // dotted field path, e.g. wings.left.monitor.axial_position_m
    std::string message;

    std::string format() const;
};

struct KvValue {
    std::string text;       // raw value token, trimmed
    int line = 0;
    mutable bool consumed = false;
};

struct KvSection {
    int line = 0;
    std::map<std::string, KvValue> keys;
    mutable bool consumed = false;
};

struct KvDocument {
    // Section path -> section. The implicit root section is "".
    std::map<std::string, KvSection> sections;

    bool has_section(const std::string& path) const;
    const KvSection* find_section(const std::string& path) const;
};

struct KvParseResult {
    KvDocument doc;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

KvParseResult parse_kv_document(const std::string& text);

/// Cursor over one section that records key consumption so unread keys can
/// be reported as unknown fields afterwards.
class SectionReader {
  public:
    SectionReader(const KvDocument& doc, std::string section_path,
                  std::vector<Diagnostic>& diagnostics);

    bool section_exists() const { return section_ != nullptr; }
    int section_line() const { return section_ ? section_->line : 0; }

    /// Required scalar; records a diagnostic and returns fallback when
    /// missing or malformed. "inf" is accepted iff allow_infinity.
    double require_number(const std::string& key, bool allow_infinity = false,
                          double fallback = 0.0);
    double optional_number(const std::string& key, double default_value,
                           bool allow_infinity = false);
    std::string require_string(const std::string& key, const std::string& fallback = "");
    long require_integer(const std::string& key, long fallback = 0);

    bool has_key(const std::string& key) const;
    std::optional<std::string> raw(const std::string& key);  // consumes

  private:
    const KvValue* take(const std::string& key);
    void error(int line, const std::string& key, const std::string& message);

    const KvSection* section_ = nullptr;
    std::string path_;
    std::vector<Diagnostic>* diagnostics_;
};

/// Appends one diagnostic per unconsumed key or section ("unknown field" /
/// "unknown section").
void report_unknown_entries(const KvDocument& doc, std::vector<Diagnostic>& diagnostics);

/// Strict full-token number parse, locale-independent; accepts inf/-inf
/// only when allow_infinity.
std::optional<double> parse_number_token(const std::string& token, bool allow_infinity);

/// Shortest round-trip decimal representation of a double ("inf"/"-inf"
/// for infinities).
std::string format_number(double value);

}  // namespace haplo
