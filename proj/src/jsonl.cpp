#include "dars/jsonl.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "dars/errors.hpp"

namespace dars {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

std::vector<ojson> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::vector<ojson> records;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            records.push_back(ojson::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

static void write_lines(const std::string& path, const std::vector<ojson>& records,
                        std::ios::openmode mode) {
    std::ofstream out(path, std::ios::binary | mode);
    if (!out) throw Error("cannot write file: " + path);
    for (const auto& rec : records) out << rec.dump() << '\n';
    if (!out) throw Error("write failed: " + path);
}

void write_jsonl(const std::string& path, const std::vector<ojson>& records) {
    write_lines(path, records, std::ios::trunc);
}

void append_jsonl(const std::string& path, const std::vector<ojson>& records) {
    write_lines(path, records, std::ios::app);
}

std::optional<json> extract_first_json_object(const std::string& text) {
    for (size_t start = 0; start < text.size(); ++start) {
        if (text[start] != '{') continue;
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) {
                    json parsed = json::parse(text.substr(start, i - start + 1),
                                              nullptr, /*allow_exceptions=*/false);
                    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
                    break;  // candidate was not valid JSON, scan from next brace
                }
            }
        }
    }
    return std::nullopt;
}

std::string canonical_json_hash(const json& value) {
    const std::string canon = value.dump();  // plain json sorts object keys
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace dars
