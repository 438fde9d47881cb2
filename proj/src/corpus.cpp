#include "dars/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dars/errors.hpp"

namespace dars {

const char* to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& value) {
    if (value == "train") return Split::Train;
    if (value == "validation") return Split::Validation;
    if (value == "test") return Split::Test;
    throw ValidationError("split: unknown value \"" + value +
                          "\" (expected train, validation, or test)");
}

void validate_question_context(const QuestionContext& ctx) {
    if (ctx.id.empty()) throw ValidationError("id: empty");
    if (ctx.key_elements.empty()) throw ValidationError("key_elements: at least one entry required");
    for (size_t i = 0; i < ctx.key_elements.size(); ++i) {
        if (ctx.key_elements[i].empty())
            throw ValidationError("key_elements[" + std::to_string(i) + "]: empty");
        for (size_t j = 0; j < i; ++j) {
            if (ctx.key_elements[i] == ctx.key_elements[j])
                throw ValidationError("key_elements[" + std::to_string(i) +
                                      "]: duplicate of key_elements[" + std::to_string(j) + "]");
        }
    }
    if (ctx.score_range.lo > ctx.score_range.hi)
        throw ValidationError("score_range: lo " + std::to_string(ctx.score_range.lo) +
                              " greater than hi " + std::to_string(ctx.score_range.hi));

    const int m = ctx.element_count();
    const auto& bands = ctx.rubric.bands;
    for (size_t i = 0; i < bands.size(); ++i) {
        const std::string name = "rubric.bands[" + std::to_string(i) + "]";
        if (bands[i].min_count < 0)
            throw ValidationError(name + ".min_count: negative");
        if (bands[i].min_count > bands[i].max_count)
            throw ValidationError(name + ": min_count " + std::to_string(bands[i].min_count) +
                                  " greater than max_count " + std::to_string(bands[i].max_count));
        if (bands[i].max_count > m)
            throw ValidationError(name + ".max_count: " + std::to_string(bands[i].max_count) +
                                  " exceeds element count " + std::to_string(m));
        if (!ctx.score_range.contains(bands[i].score))
            throw ValidationError(name + ".score: " + std::to_string(bands[i].score) +
                                  " outside score_range [" + std::to_string(ctx.score_range.lo) +
                                  ", " + std::to_string(ctx.score_range.hi) + "]");
        for (size_t j = 0; j < i; ++j) {
            const int lo = std::max(bands[i].min_count, bands[j].min_count);
            const int hi = std::min(bands[i].max_count, bands[j].max_count);
            if (lo <= hi)
                throw ValidationError(name + ": overlaps rubric.bands[" + std::to_string(j) +
                                      "] at count " + std::to_string(lo));
        }
    }
    if (!ctx.score_range.contains(ctx.rubric.default_score))
        throw ValidationError("rubric.default_score: " + std::to_string(ctx.rubric.default_score) +
                              " outside score_range [" + std::to_string(ctx.score_range.lo) + ", " +
                              std::to_string(ctx.score_range.hi) + "]");
}

namespace {

const json& require_field(const json& doc, const char* key, const std::string& where) {
    auto it = doc.find(key);
    if (it == doc.end()) throw ParseError(where + ": missing field \"" + std::string(key) + "\"");
    return *it;
}

int require_int(const json& doc, const char* key, const std::string& where) {
    const json& v = require_field(doc, key, where);
    if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

std::string require_string(const json& doc, const char* key, const std::string& where) {
    const json& v = require_field(doc, key, where);
    if (!v.is_string()) throw ParseError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

}  // namespace

QuestionContext question_context_from_json(const json& doc) {
    if (!doc.is_object()) throw ParseError("question context: expected a JSON object");
    QuestionContext ctx;
    ctx.id = require_string(doc, "id", "question context");
    ctx.prompt = require_string(doc, "prompt", "question context");

    const json& elements = require_field(doc, "key_elements", "question context");
    if (!elements.is_array()) throw ParseError("question context.key_elements: expected an array");
    for (const auto& e : elements) {
        if (!e.is_string()) throw ParseError("question context.key_elements: expected strings");
        ctx.key_elements.push_back(e.get<std::string>());
    }

    const json& rubric = require_field(doc, "rubric", "question context");
    if (!rubric.is_object()) throw ParseError("question context.rubric: expected an object");
    const json& bands = require_field(rubric, "bands", "rubric");
    if (!bands.is_array()) throw ParseError("rubric.bands: expected an array");
    for (size_t i = 0; i < bands.size(); ++i) {
        const std::string where = "rubric.bands[" + std::to_string(i) + "]";
        if (!bands[i].is_object()) throw ParseError(where + ": expected an object");
        RubricBand band;
        band.min_count = require_int(bands[i], "min_count", where);
        band.max_count = require_int(bands[i], "max_count", where);
        band.score = require_int(bands[i], "score", where);
        ctx.rubric.bands.push_back(band);
    }
    ctx.rubric.default_score = require_int(rubric, "default_score", "rubric");

    const json& range = require_field(doc, "score_range", "question context");
    if (!range.is_object()) throw ParseError("question context.score_range: expected an object");
    ctx.score_range.lo = require_int(range, "lo", "score_range");
    ctx.score_range.hi = require_int(range, "hi", "score_range");

    validate_question_context(ctx);
    return ctx;
}

ojson question_context_to_json(const QuestionContext& ctx) {
    ojson doc;
    doc["id"] = ctx.id;
    doc["prompt"] = ctx.prompt;
    doc["key_elements"] = ctx.key_elements;
    ojson bands = ojson::array();
    for (const auto& band : ctx.rubric.bands) {
        ojson b;
        b["min_count"] = band.min_count;
        b["max_count"] = band.max_count;
        b["score"] = band.score;
        bands.push_back(std::move(b));
    }
    doc["rubric"] = ojson{{"bands", std::move(bands)}, {"default_score", ctx.rubric.default_score}};
    doc["score_range"] = ojson{{"lo", ctx.score_range.lo}, {"hi", ctx.score_range.hi}};
    return doc;
}

QuestionContext load_question_context(const std::string& path) {
    json doc = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError("malformed JSON: " + path);
    try {
        return question_context_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

void save_question_context(const QuestionContext& ctx, const std::string& path) {
    validate_question_context(ctx);
    write_text_file(path, question_context_to_json(ctx).dump(2) + "\n");
}

namespace {

// RFC-4180 style reader: quoted fields may contain the delimiter, doubled
// quotes, and embedded newlines. Tab mode uses the same code path; tabs
// inside fields are simply not special-cased away.
std::vector<std::vector<std::string>> read_delimited(const std::string& content, char delim) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    size_t i = 0;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(row);
        row.clear();
    };
    while (i < content.size()) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started && field.empty()) {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() || field_started || !row.empty()) end_row();
        } else if (c != '\r') {
            field += c;
            field_started = true;
        }
        ++i;
    }
    if (!field.empty() || field_started || !row.empty()) end_row();
    return rows;
}

}  // namespace

std::vector<StudentAnswer> load_answers(const std::string& path, const QuestionContext& ctx) {
    const std::string content = read_text_file(path);
    if (content.find_first_not_of(" \t\r\n") == std::string::npos) return {};

    char delim = ',';
    if (path.size() >= 4 && (path.ends_with(".tsv") || path.ends_with(".tab"))) {
        delim = '\t';
    } else if (!path.ends_with(".csv")) {
        const std::string head = content.substr(0, content.find('\n'));
        if (head.find('\t') != std::string::npos) delim = '\t';
    }

    auto rows = read_delimited(content, delim);
    if (rows.empty()) return {};

    const std::vector<std::string> expected = {"id", "question_id", "text", "gold_score", "split"};
    std::vector<int> col(expected.size(), -1);
    const auto& header = rows[0];
    for (size_t h = 0; h < header.size(); ++h) {
        auto it = std::find(expected.begin(), expected.end(), header[h]);
        if (it == expected.end())
            throw ParseError(path + ": unknown column \"" + header[h] + "\"");
        col[static_cast<size_t>(it - expected.begin())] = static_cast<int>(h);
    }
    for (size_t k = 0; k < expected.size(); ++k) {
        if (col[k] < 0) throw ParseError(path + ": missing column \"" + expected[k] + "\"");
    }

    std::vector<StudentAnswer> answers;
    std::vector<std::string> problems;
    std::set<std::string> seen_ids;
    for (size_t r = 1; r < rows.size(); ++r) {
        // 1-based file line, header included, so the number matches an editor.
        const std::string where = "row " + std::to_string(r + 1);
        const auto& cells = rows[r];
        if (cells.size() != header.size()) {
            problems.push_back(where + ": expected " + std::to_string(header.size()) +
                               " columns, found " + std::to_string(cells.size()));
            continue;
        }
        StudentAnswer a;
        a.id = cells[static_cast<size_t>(col[0])];
        a.question_id = cells[static_cast<size_t>(col[1])];
        a.text = cells[static_cast<size_t>(col[2])];
        const std::string& score_text = cells[static_cast<size_t>(col[3])];
        const std::string& split_text = cells[static_cast<size_t>(col[4])];

        bool ok = true;
        if (a.id.empty()) {
            problems.push_back(where + ": empty id");
            ok = false;
        } else if (!seen_ids.insert(a.id).second) {
            problems.push_back(where + ": duplicate id \"" + a.id + "\"");
            ok = false;
        }
        if (a.question_id != ctx.id) {
            problems.push_back(where + ": question_id \"" + a.question_id +
                               "\" does not match context \"" + ctx.id + "\"");
            ok = false;
        }
        try {
            size_t pos = 0;
            a.gold_score = std::stoi(score_text, &pos);
            if (pos != score_text.size()) throw std::invalid_argument("trailing characters");
            if (!ctx.score_range.contains(a.gold_score)) {
                problems.push_back(where + ": gold_score " + std::to_string(a.gold_score) +
                                   " outside score_range [" + std::to_string(ctx.score_range.lo) +
                                   ", " + std::to_string(ctx.score_range.hi) + "]");
                ok = false;
            }
        } catch (const std::exception&) {
            problems.push_back(where + ": gold_score \"" + score_text + "\" is not an integer");
            ok = false;
        }
        try {
            a.split = split_from_string(split_text);
        } catch (const ValidationError&) {
            problems.push_back(where + ": unknown split \"" + split_text + "\"");
            ok = false;
        }
        if (ok) answers.push_back(std::move(a));
    }
    if (!problems.empty()) {
        std::ostringstream msg;
        msg << path << ": " << problems.size() << " invalid row(s)";
        for (const auto& p : problems) msg << "\n  " << p;
        throw ValidationError(msg.str());
    }
    return answers;
}

DatasetStats dataset_stats(const std::vector<StudentAnswer>& answers) {
    DatasetStats stats;
    for (const auto& a : answers) {
        switch (a.split) {
            case Split::Train: ++stats.train; break;
            case Split::Validation: ++stats.validation; break;
            case Split::Test: ++stats.test; break;
        }
        ++stats.score_histogram[a.gold_score];
        ++stats.total;
    }
    return stats;
}

}  // namespace dars
