#pragma once

#include <map>
#include <string>
#include <vector>

#include "dars/jsonl.hpp"

namespace dars {

struct ScoreRange {
    int lo = 0;
    int hi = 0;
    bool contains(int s) const { return s >= lo && s <= hi; }
    int size() const { return hi - lo + 1; }
};

/// Contiguous coverage-count interval mapped to one score.
struct RubricBand {
    int min_count = 0;
    int max_count = 0;
    int score = 0;
};

/// Bands must be disjoint; counts hitting no band take default_score, so
/// lookup is total over 0..M.
struct Rubric {
    std::vector<RubricBand> bands;
    int default_score = 0;
};

enum class Split { Train, Validation, Test };

const char* to_string(Split split);
Split split_from_string(const std::string& value);

struct QuestionContext {
    std::string id;
    std::string prompt;
    std::vector<std::string> key_elements;
    Rubric rubric;
    ScoreRange score_range;

    int element_count() const { return static_cast<int>(key_elements.size()); }
};

struct StudentAnswer {
    std::string id;
    std::string question_id;
    std::string text;
    int gold_score = 0;
    Split split = Split::Train;
};

/// Throws ValidationError naming the offending field.
void validate_question_context(const QuestionContext& ctx);

QuestionContext question_context_from_json(const json& doc);
ojson question_context_to_json(const QuestionContext& ctx);
QuestionContext load_question_context(const std::string& path);
void save_question_context(const QuestionContext& ctx, const std::string& path);

/// Tabular file with header id, question_id, text, gold_score, split.
/// Delimiter is a tab for .tsv paths, a comma otherwise (sniffed when the
/// extension is unknown). Row errors are collected and reported together
/// with their row numbers.
std::vector<StudentAnswer> load_answers(const std::string& path, const QuestionContext& ctx);

struct DatasetStats {
    int train = 0;
    int validation = 0;
    int test = 0;
    int total = 0;
    std::map<int, int> score_histogram;
};

DatasetStats dataset_stats(const std::vector<StudentAnswer>& answers);

}  // namespace dars
