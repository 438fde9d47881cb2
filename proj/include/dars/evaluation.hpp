#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dars/corpus.hpp"

namespace dars {

struct LabeledPair {
    int gold = 0;
    int predicted = 0;
    std::string answer_id;
    std::string iteration_tag;  // "initial", "final", or an iteration number
};

/// Exact-match rate. Throws ValidationError on empty input.
double accuracy(const std::vector<LabeledPair>& pairs);

/// Unweighted mean of per-class F1 across every score in the range. Classes
/// absent from both gold and predictions contribute zero unless
/// exclude_absent drops them from the mean.
double macro_f1(const std::vector<LabeledPair>& pairs, const ScoreRange& range,
                bool exclude_absent = false);

/// Quadratic-weighted agreement over the fixed score range: weights
/// ((i-j)/(K-1))^2, expected matrix from the marginal outer product. Throws
/// ValidationError when the expected disagreement mass is zero.
double qwk(const std::vector<LabeledPair>& pairs, const ScoreRange& range);

/// Welch's unequal-variance t-test, one-tailed for mean(a) > mean(b).
/// Identical samples give exactly 0.5.
double one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Same alternative on paired differences; sizes must match.
double paired_one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct ConfusionMatrix {
    ScoreRange range;
    std::vector<std::vector<long>> counts;  // counts[gold - lo][predicted - lo]

    long at(int gold, int predicted) const;
};

ConfusionMatrix confusion_matrix(const std::vector<LabeledPair>& pairs, const ScoreRange& range);

struct TransitionTriple {
    int gold = 0;
    int from = 0;
    int to = 0;
    long count = 0;
};

struct TransitionAnalysis {
    long correct_to_correct = 0;
    long correct_to_incorrect = 0;
    long incorrect_to_correct = 0;
    long incorrect_to_incorrect = 0;
    ConfusionMatrix initial;
    ConfusionMatrix final;
    /// Every (gold, from, to) with from != to, ranked by count descending,
    /// ties by ascending (gold, from, to).
    std::vector<TransitionTriple> ranked;
};

/// Initial and final predictions joined by answer_id; gold labels must agree.
TransitionAnalysis transitions(const std::vector<LabeledPair>& initial,
                               const std::vector<LabeledPair>& final_pairs,
                               const ScoreRange& range);

struct EvalDataset {
    std::string name;
    std::vector<LabeledPair> pairs;
    ScoreRange range;
    bool exclude_absent = false;
};

struct EvalRow {
    std::string name;
    size_t n = 0;
    double acc = 0.0;
    double f1 = 0.0;
    double qwk = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    EvalRow overall;  // unweighted mean across datasets
};

/// Metric errors are rethrown annotated with the dataset name.
EvalReport build_report(const std::vector<EvalDataset>& datasets);

std::string render_report_text(const EvalReport& report);
/// Side-by-side table for first-pass and final predictions.
std::string render_comparison_text(const EvalReport& initial, const EvalReport& final_report);
ojson report_to_json(const EvalReport& report);

}  // namespace dars
