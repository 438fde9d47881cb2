#include "dars/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "dars/errors.hpp"

namespace dars {

namespace {

void check_labels(const std::vector<LabeledPair>& pairs, const ScoreRange& range) {
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (!range.contains(pairs[i].gold))
            throw ValidationError("pair " + std::to_string(i) + ": gold " +
                                  std::to_string(pairs[i].gold) + " outside [" +
                                  std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
        if (!range.contains(pairs[i].predicted))
            throw ValidationError("pair " + std::to_string(i) + ": predicted " +
                                  std::to_string(pairs[i].predicted) + " outside [" +
                                  std::to_string(range.lo) + ", " + std::to_string(range.hi) + "]");
    }
}

}  // namespace

double accuracy(const std::vector<LabeledPair>& pairs) {
    if (pairs.empty()) throw ValidationError("accuracy: no pairs");
    long hits = 0;
    for (const auto& p : pairs) hits += p.gold == p.predicted;
    return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

double macro_f1(const std::vector<LabeledPair>& pairs, const ScoreRange& range,
                bool exclude_absent) {
    if (pairs.empty()) throw ValidationError("macro_f1: no pairs");
    if (range.lo > range.hi) throw ValidationError("macro_f1: bad score range");
    check_labels(pairs, range);

    double sum = 0.0;
    int classes = 0;
    for (int c = range.lo; c <= range.hi; ++c) {
        long tp = 0, fp = 0, fn = 0;
        for (const auto& p : pairs) {
            if (p.predicted == c && p.gold == c) ++tp;
            else if (p.predicted == c) ++fp;
            else if (p.gold == c) ++fn;
        }
        if (exclude_absent && tp + fp + fn == 0) continue;
        const double f1 = (2 * tp + fp + fn) == 0
                              ? 0.0
                              : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
        sum += f1;
        ++classes;
    }
    if (classes == 0) throw ValidationError("macro_f1: no classes left to average");
    return sum / classes;
}

double qwk(const std::vector<LabeledPair>& pairs, const ScoreRange& range) {
    if (pairs.empty()) throw ValidationError("qwk: no pairs");
    const int k = range.size();
    if (k < 2) throw ValidationError("qwk: score range needs at least two labels");
    check_labels(pairs, range);

    const size_t n = pairs.size();
    const size_t ku = static_cast<size_t>(k);
    std::vector<std::vector<double>> observed(ku, std::vector<double>(ku, 0.0));
    std::vector<double> gold_hist(ku, 0.0), pred_hist(ku, 0.0);
    for (const auto& p : pairs) {
        const size_t g = static_cast<size_t>(p.gold - range.lo);
        const size_t q = static_cast<size_t>(p.predicted - range.lo);
        observed[g][q] += 1.0;
        gold_hist[g] += 1.0;
        pred_hist[q] += 1.0;
    }

    const double denom_weight = static_cast<double>(k - 1) * static_cast<double>(k - 1);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < ku; ++i) {
        for (size_t j = 0; j < ku; ++j) {
            const double w =
                static_cast<double>((static_cast<long>(i) - static_cast<long>(j)) *
                                    (static_cast<long>(i) - static_cast<long>(j))) /
                denom_weight;
            const double expected = gold_hist[i] * pred_hist[j] / static_cast<double>(n);
            num += w * observed[i][j];
            den += w * expected;
        }
    }
    if (den == 0.0)
        throw ValidationError("qwk: expected disagreement is zero (labels are degenerate)");
    return 1.0 - num / den;
}

namespace {

struct SampleStats {
    double mean = 0.0;
    double var = 0.0;  // unbiased
    size_t n = 0;
};

SampleStats sample_stats(const std::vector<double>& xs, const char* name) {
    if (xs.size() < 2)
        throw ValidationError(std::string(name) + ": need at least two observations");
    SampleStats s;
    s.n = xs.size();
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(s.n);
    for (double x : xs) s.var += (x - s.mean) * (x - s.mean);
    s.var /= static_cast<double>(s.n - 1);
    return s;
}

double upper_tail_p(double t, double df) {
    boost::math::students_t dist(df);
    return boost::math::cdf(boost::math::complement(dist, t));
}

}  // namespace

double one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    const SampleStats sa = sample_stats(a, "sample a");
    const SampleStats sb = sample_stats(b, "sample b");
    const double se2 = sa.var / static_cast<double>(sa.n) + sb.var / static_cast<double>(sb.n);
    if (se2 == 0.0) {
        if (sa.mean == sb.mean) return 0.5;
        return sa.mean > sb.mean ? 0.0 : 1.0;
    }
    const double t = (sa.mean - sb.mean) / std::sqrt(se2);
    const double va = sa.var / static_cast<double>(sa.n);
    const double vb = sb.var / static_cast<double>(sb.n);
    const double df = (va + vb) * (va + vb) /
                      (va * va / static_cast<double>(sa.n - 1) +
                       vb * vb / static_cast<double>(sb.n - 1));
    return upper_tail_p(t, df);
}

double paired_one_tailed_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw ValidationError("paired t-test: sample sizes differ (" + std::to_string(a.size()) +
                              " vs " + std::to_string(b.size()) + ")");
    std::vector<double> diffs(a.size());
    for (size_t i = 0; i < a.size(); ++i) diffs[i] = a[i] - b[i];
    const SampleStats sd = sample_stats(diffs, "differences");
    if (sd.var == 0.0) {
        if (sd.mean == 0.0) return 0.5;
        return sd.mean > 0.0 ? 0.0 : 1.0;
    }
    const double t = sd.mean / std::sqrt(sd.var / static_cast<double>(sd.n));
    return upper_tail_p(t, static_cast<double>(sd.n - 1));
}

long ConfusionMatrix::at(int gold, int predicted) const {
    if (!range.contains(gold) || !range.contains(predicted))
        throw ValidationError("confusion matrix: label outside range");
    return counts[static_cast<size_t>(gold - range.lo)][static_cast<size_t>(predicted - range.lo)];
}

ConfusionMatrix confusion_matrix(const std::vector<LabeledPair>& pairs, const ScoreRange& range) {
    check_labels(pairs, range);
    ConfusionMatrix m;
    m.range = range;
    m.counts.assign(static_cast<size_t>(range.size()),
                    std::vector<long>(static_cast<size_t>(range.size()), 0));
    for (const auto& p : pairs) {
        ++m.counts[static_cast<size_t>(p.gold - range.lo)]
                  [static_cast<size_t>(p.predicted - range.lo)];
    }
    return m;
}

TransitionAnalysis transitions(const std::vector<LabeledPair>& initial,
                               const std::vector<LabeledPair>& final_pairs,
                               const ScoreRange& range) {
    if (initial.size() != final_pairs.size())
        throw ValidationError("transitions: pair counts differ (" + std::to_string(initial.size()) +
                              " vs " + std::to_string(final_pairs.size()) + ")");
    std::map<std::string, const LabeledPair*> by_id;
    for (const auto& p : final_pairs) {
        if (!by_id.emplace(p.answer_id, &p).second)
            throw ValidationError("transitions: duplicate answer_id \"" + p.answer_id +
                                  "\" in final pairs");
    }

    TransitionAnalysis analysis;
    analysis.initial = confusion_matrix(initial, range);
    analysis.final = confusion_matrix(final_pairs, range);

    std::map<std::tuple<int, int, int>, long> triple_counts;
    std::map<std::string, int> seen_initial;
    for (const auto& first : initial) {
        if (++seen_initial[first.answer_id] > 1)
            throw ValidationError("transitions: duplicate answer_id \"" + first.answer_id +
                                  "\" in initial pairs");
        auto it = by_id.find(first.answer_id);
        if (it == by_id.end())
            throw ValidationError("transitions: answer_id \"" + first.answer_id +
                                  "\" missing from final pairs");
        const LabeledPair& last = *it->second;
        if (first.gold != last.gold)
            throw ValidationError("transitions: answer_id \"" + first.answer_id +
                                  "\" has gold " + std::to_string(first.gold) + " vs " +
                                  std::to_string(last.gold));
        const bool was_correct = first.predicted == first.gold;
        const bool is_correct = last.predicted == last.gold;
        if (was_correct && is_correct) ++analysis.correct_to_correct;
        else if (was_correct) ++analysis.correct_to_incorrect;
        else if (is_correct) ++analysis.incorrect_to_correct;
        else ++analysis.incorrect_to_incorrect;
        if (first.predicted != last.predicted)
            ++triple_counts[{first.gold, first.predicted, last.predicted}];
    }

    for (const auto& [key, count] : triple_counts) {
        analysis.ranked.push_back(
            {std::get<0>(key), std::get<1>(key), std::get<2>(key), count});
    }
    std::stable_sort(analysis.ranked.begin(), analysis.ranked.end(),
                     [](const TransitionTriple& a, const TransitionTriple& b) {
                         if (a.count != b.count) return a.count > b.count;
                         return std::tie(a.gold, a.from, a.to) < std::tie(b.gold, b.from, b.to);
                     });
    return analysis;
}

EvalReport build_report(const std::vector<EvalDataset>& datasets) {
    if (datasets.empty()) throw ValidationError("report: no datasets");
    EvalReport report;
    double acc_sum = 0.0, f1_sum = 0.0, qwk_sum = 0.0;
    size_t n_sum = 0;
    for (const auto& ds : datasets) {
        EvalRow row;
        row.name = ds.name;
        row.n = ds.pairs.size();
        try {
            row.acc = accuracy(ds.pairs);
            row.f1 = macro_f1(ds.pairs, ds.range, ds.exclude_absent);
            row.qwk = qwk(ds.pairs, ds.range);
        } catch (const Error& e) {
            throw ValidationError("dataset \"" + ds.name + "\": " + e.what());
        }
        acc_sum += row.acc;
        f1_sum += row.f1;
        qwk_sum += row.qwk;
        n_sum += row.n;
        report.rows.push_back(std::move(row));
    }
    report.overall.name = "overall";
    report.overall.n = n_sum;
    const double d = static_cast<double>(datasets.size());
    report.overall.acc = acc_sum / d;
    report.overall.f1 = f1_sum / d;
    report.overall.qwk = qwk_sum / d;
    return report;
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string render_report_text(const EvalReport& report) {
    size_t name_width = 7;  // "overall"
    for (const auto& row : report.rows) name_width = std::max(name_width, row.name.size());

    std::ostringstream out;
    auto line = [&](const std::string& name, const std::string& n, const std::string& acc,
                    const std::string& f1, const std::string& qwk_text) {
        out << name << std::string(name_width - name.size() + 2, ' ');
        out << n << std::string(n.size() < 6 ? 6 - n.size() + 2 : 2, ' ');
        out << acc << "  " << f1 << "  " << qwk_text << "\n";
    };
    line("dataset", "n", "ACC   ", "F1    ", "QWK   ");
    for (const auto& row : report.rows)
        line(row.name, std::to_string(row.n), fixed4(row.acc), fixed4(row.f1), fixed4(row.qwk));
    line("overall", std::to_string(report.overall.n), fixed4(report.overall.acc),
         fixed4(report.overall.f1), fixed4(report.overall.qwk));
    return out.str();
}

std::string render_comparison_text(const EvalReport& initial, const EvalReport& final_report) {
    size_t name_width = 7;
    for (const auto& row : initial.rows) name_width = std::max(name_width, row.name.size());

    std::ostringstream out;
    auto pad = [&](const std::string& s, size_t width) {
        return s + std::string(width > s.size() ? width - s.size() : 1, ' ');
    };
    out << pad("dataset", name_width + 2) << pad("n", 8)
        << "initial ACC/F1/QWK        final ACC/F1/QWK\n";
    auto triple = [](const EvalRow& row) {
        return fixed4(row.acc) + " " + fixed4(row.f1) + " " + fixed4(row.qwk);
    };
    for (size_t i = 0; i < initial.rows.size(); ++i) {
        const EvalRow& a = initial.rows[i];
        const EvalRow* b = i < final_report.rows.size() ? &final_report.rows[i] : nullptr;
        out << pad(a.name, name_width + 2) << pad(std::to_string(a.n), 8) << triple(a)
            << "      " << (b ? triple(*b) : std::string("-")) << "\n";
    }
    out << pad("overall", name_width + 2) << pad(std::to_string(initial.overall.n), 8)
        << triple(initial.overall) << "      " << triple(final_report.overall) << "\n";
    return out.str();
}

ojson report_to_json(const EvalReport& report) {
    ojson doc;
    ojson rows = ojson::array();
    auto row_json = [](const EvalRow& row) {
        return ojson{{"dataset", row.name},
                     {"n", row.n},
                     {"acc", row.acc},
                     {"macro_f1", row.f1},
                     {"qwk", row.qwk}};
    };
    for (const auto& row : report.rows) rows.push_back(row_json(row));
    doc["rows"] = std::move(rows);
    doc["overall"] = row_json(report.overall);
    return doc;
}

}  // namespace dars
