#include "haplo/kvdoc.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

namespace haplo {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
    // Dotted keys are allowed so adjustment and perturbation files can address
    // bench degrees of freedom by path (e.g. wings.left.beamsplitter.yaw_deg).
    if (k.empty() || k.front() == '.' || k.back() == '.') return false;
    char prev = 0;
    for (char c : k) {
        if (c == '.') {
            if (prev == '.') return false;
        } else if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') {
            return false;
        }
        prev = c;
    }
    return true;
}

bool valid_section_path(const std::string& p) {
    if (p.empty()) return false;
    bool segment_open = false;
    for (char c : p) {
        if (c == '.') {
            if (!segment_open) return false;
            segment_open = false;
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
            segment_open = true;
        } else {
            return false;
        }
    }
    return segment_open;
}

}  // namespace

std::string Diagnostic::format() const {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ": ";
    if (!path.empty()) out += path + ": ";
    out += message;
    return out;
}

bool KvDocument::has_section(const std::string& path) const {
    return sections.count(path) != 0;
}

const KvSection* KvDocument::find_section(const std::string& path) const {
    auto it = sections.find(path);
    return it == sections.end() ? nullptr : &it->second;
}

KvParseResult parse_kv_document(const std::string& text) {
    KvParseResult result;
    std::string current_section;  // root
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t eol = text.find('\n', pos);
        std::string line = text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
        pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') {
                result.diagnostics.push_back({line_no, "", "unterminated section header"});
                continue;
            }
            std::string path = trim(line.substr(1, line.size() - 2));
            if (!valid_section_path(path)) {
                result.diagnostics.push_back({line_no, path, "invalid section path"});
                continue;
            }
            if (result.doc.sections.count(path)) {
                result.diagnostics.push_back({line_no, path, "duplicate section"});
                continue;
            }
            KvSection section;
            section.line = line_no;
            result.doc.sections.emplace(path, std::move(section));
            current_section = path;
            continue;
        }

        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            result.diagnostics.push_back({line_no, "", "expected 'key = value' or '[section]'"});
            continue;
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        std::string path = current_section.empty() ? key : current_section + "." + key;
        if (!valid_key(key)) {
            result.diagnostics.push_back({line_no, path, "invalid key name"});
            continue;
        }
        if (value.empty()) {
            result.diagnostics.push_back({line_no, path, "missing value"});
            continue;
        }
        auto& section = result.doc.sections[current_section];
        if (section.line == 0 && !current_section.empty()) section.line = line_no;
        if (section.keys.count(key)) {
            result.diagnostics.push_back({line_no, path, "duplicate key"});
            continue;
        }
        section.keys.emplace(key, KvValue{value, line_no, false});
    }
    return result;
}

std::optional<double> parse_number_token(const std::string& token, bool allow_infinity) {
    if (token.empty()) return std::nullopt;
    if (allow_infinity) {
        if (token == "inf" || token == "+inf") return std::numeric_limits<double>::infinity();
        if (token == "-inf") return -std::numeric_limits<double>::infinity();
    }
    std::string t = token;
    if (t.front() == '+') t.erase(0, 1);
    if (t.empty()) return std::nullopt;
    double value = 0.0;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || end != t.data() + t.size()) return std::nullopt;
    if (!std::isfinite(value)) return std::nullopt;
    return value;
}

std::string format_number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (std::isnan(value)) return "nan";
    if (value == 0.0) value = 0.0;  // drop the sign of negative zero
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, end);
}

SectionReader::SectionReader(const KvDocument& doc, std::string section_path,
                             std::vector<Diagnostic>& diagnostics)
    : path_(std::move(section_path)), diagnostics_(&diagnostics) {
    section_ = doc.find_section(path_);
    if (section_) section_->consumed = true;
}

const KvValue* SectionReader::take(const std::string& key) {
    if (!section_) return nullptr;
    auto it = section_->keys.find(key);
    if (it == section_->keys.end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
}

void SectionReader::error(int line, const std::string& key, const std::string& message) {
    std::string path = path_.empty() ? key : path_ + "." + key;
    diagnostics_->push_back({line, path, message});
}

double SectionReader::require_number(const std::string& key, bool allow_infinity,
                                     double fallback) {
    const KvValue* v = take(key);
    if (!v) {
        error(section_line(), key, "missing required field");
        return fallback;
    }
    auto parsed = parse_number_token(v->text, allow_infinity);
    if (!parsed) {
        error(v->line, key, "not a valid number: '" + v->text + "'");
        return fallback;
    }
    return *parsed;
}

double SectionReader::optional_number(const std::string& key, double default_value,
                                      bool allow_infinity) {
    const KvValue* v = take(key);
    if (!v) return default_value;
    auto parsed = parse_number_token(v->text, allow_infinity);
    if (!parsed) {
        error(v->line, key, "not a valid number: '" + v->text + "'");
        return default_value;
    }
    return *parsed;
}

std::string SectionReader::require_string(const std::string& key, const std::string& fallback) {
    const KvValue* v = take(key);
    if (!v) {
        error(section_line(), key, "missing required field");
        return fallback;
    }
    return v->text;
}

long SectionReader::require_integer(const std::string& key, long fallback) {
    const KvValue* v = take(key);
    if (!v) {
        error(section_line(), key, "missing required field");
        return fallback;
    }
    long value = 0;
    const std::string& t = v->text;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || end != t.data() + t.size()) {
        error(v->line, key, "not a valid integer: '" + t + "'");
        return fallback;
    }
    return value;
}

bool SectionReader::has_key(const std::string& key) const {
    return section_ && section_->keys.count(key) != 0;
}

std::optional<std::string> SectionReader::raw(const std::string& key) {
    const KvValue* v = take(key);
    if (!v) return std::nullopt;
    return v->text;
}

void report_unknown_entries(const KvDocument& doc, std::vector<Diagnostic>& diagnostics) {
    for (const auto& [path, section] : doc.sections) {
        if (!section.consumed && !path.empty()) {
            diagnostics.push_back({section.line, path, "unknown section"});
            continue;
        }
        for (const auto& [key, value] : section.keys) {
            if (!value.consumed) {
                std::string full = path.empty() ? key : path + "." + key;
                diagnostics.push_back({value.line, full, "unknown field"});
            }
        }
    }
}

}  // namespace haplo
