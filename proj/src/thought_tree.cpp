#include "dars/thought_tree.hpp"

#include <algorithm>
#include <numeric>

#include "dars/errors.hpp"

namespace dars {

std::string to_string(const DecisionVector& v) {
    std::string s;
    s.reserve(v.bits.size());
    for (auto b : v.bits) s += b ? '1' : '0';
    return s;
}

DecisionVector decision_vector_from_string(const std::string& s) {
    DecisionVector v;
    v.bits.reserve(s.size());
    for (char c : s) {
        if (c != '0' && c != '1')
            throw ValidationError("decision vector: invalid character '" + std::string(1, c) + "'");
        v.bits.push_back(c == '1');
    }
    return v;
}

int coverage_count(const DecisionVector& v) {
    return static_cast<int>(std::count(v.bits.begin(), v.bits.end(), std::uint8_t{1}));
}

int hamming_distance(const DecisionVector& a, const DecisionVector& b) {
    if (a.bits.size() != b.bits.size())
        throw ValidationError("hamming distance: lengths differ (" + std::to_string(a.bits.size()) +
                              " vs " + std::to_string(b.bits.size()) + ")");
    int d = 0;
    for (size_t i = 0; i < a.bits.size(); ++i) d += a.bits[i] != b.bits[i];
    return d;
}

int apply_rubric(const Rubric& rubric, int count, int element_count) {
    if (count < 0 || count > element_count)
        throw ValidationError("count " + std::to_string(count) + " outside [0, " +
                              std::to_string(element_count) + "]");
    for (const auto& band : rubric.bands) {
        if (count >= band.min_count && count <= band.max_count) return band.score;
    }
    return rubric.default_score;
}

const char* to_string(PathSource source) {
    switch (source) {
        case PathSource::Judged: return "judged";
        case PathSource::Enumerated: return "enumerated";
        case PathSource::External: return "external";
    }
    return "judged";
}

namespace {

std::vector<TreePath> paths_from_judgments(const std::vector<ElementJudgment>& judgments,
                                           const QuestionContext& ctx, int path_cap,
                                           PathSource source) {
    if (path_cap < 1) throw ValidationError("path_cap must be >= 1");
    const int m = ctx.element_count();
    if (static_cast<int>(judgments.size()) != m)
        throw ValidationError("expected " + std::to_string(m) + " judgments, got " +
                              std::to_string(judgments.size()));

    DecisionVector base;
    base.bits.resize(static_cast<size_t>(m));
    std::vector<int> uncertain;
    for (int j = 0; j < m; ++j) {
        const auto& judgment = judgments[static_cast<size_t>(j)];
        if (judgment.element_index != j)
            throw ValidationError("judgment " + std::to_string(j) + " reports element_index " +
                                  std::to_string(judgment.element_index));
        switch (judgment.plausible) {
            case Plausible::Absent: base.bits[static_cast<size_t>(j)] = 0; break;
            case Plausible::Present: base.bits[static_cast<size_t>(j)] = 1; break;
            case Plausible::Either:
                base.bits[static_cast<size_t>(j)] = 0;
                uncertain.push_back(j);
                break;
        }
    }

    std::vector<TreePath> paths;
    auto emit = [&](const std::vector<int>& flipped) {
        DecisionVector v = base;
        for (int j : flipped) v.bits[static_cast<size_t>(j)] ^= 1;
        TreePath path;
        path.derived_score = apply_rubric(ctx.rubric, coverage_count(v), m);
        path.decisions = std::move(v);
        path.source = source;
        paths.push_back(std::move(path));
    };

    // Subsets of the uncertain indices by ascending cardinality, then
    // lexicographic combination order. Stops at the cap without ever
    // materializing the full 2^U set.
    const int u = static_cast<int>(uncertain.size());
    emit({});
    for (int k = 1; k <= u && static_cast<int>(paths.size()) < path_cap; ++k) {
        std::vector<int> idx(static_cast<size_t>(k));
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            std::vector<int> flipped;
            flipped.reserve(static_cast<size_t>(k));
            for (int i : idx) flipped.push_back(uncertain[static_cast<size_t>(i)]);
            emit(flipped);
            if (static_cast<int>(paths.size()) >= path_cap) break;
            int pos = k - 1;
            while (pos >= 0 && idx[static_cast<size_t>(pos)] == u - k + pos) --pos;
            if (pos < 0) break;
            ++idx[static_cast<size_t>(pos)];
            for (int p = pos + 1; p < k; ++p)
                idx[static_cast<size_t>(p)] = idx[static_cast<size_t>(p - 1)] + 1;
        }
    }
    return paths;
}

}  // namespace

std::vector<TreePath> build_paths(const StudentAnswer& answer, const QuestionContext& ctx,
                                  const ElementJudge& judge, int path_cap) {
    if (!judge) throw ValidationError("judge is empty");
    const int m = ctx.element_count();
    std::vector<ElementJudgment> judgments;
    judgments.reserve(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        try {
            judgments.push_back(judge(ctx, answer, j));
        } catch (const std::exception& e) {
            throw Error("judge failed for element " + std::to_string(j) + " of answer " +
                        answer.id + ": " + e.what());
        }
    }
    return paths_from_judgments(judgments, ctx, path_cap, PathSource::Judged);
}

std::vector<TreePath> enumerate_paths(const std::vector<ElementJudgment>& judgments,
                                      const QuestionContext& ctx, int path_cap) {
    return paths_from_judgments(judgments, ctx, path_cap, PathSource::Enumerated);
}

PartitionedPaths partition_paths(const std::vector<TreePath>& paths, int gold_score) {
    PartitionedPaths out;
    for (const auto& path : paths) {
        (path.derived_score == gold_score ? out.chosen : out.rejected).push_back(path);
    }
    return out;
}

std::vector<PreferencePair> make_preference_pairs(const std::vector<TreePath>& chosen,
                                                  const std::vector<TreePath>& rejected,
                                                  const std::string& answer_id, int pairs_cap) {
    if (chosen.empty())
        throw ValidationError("no chosen path for answer " + answer_id +
                              ": cannot form preference pairs");
    if (pairs_cap < 0) throw ValidationError("pairs_cap must be >= 0");

    const int gold = chosen[0].derived_score;
    for (size_t i = 1; i < chosen.size(); ++i) {
        if (chosen[i].derived_score != gold)
            throw ValidationError("chosen paths disagree on score (" + std::to_string(gold) +
                                  " vs " + std::to_string(chosen[i].derived_score) + ")");
    }

    struct Candidate {
        size_t rejected_index;
        size_t chosen_index;
        int distance;
    };
    std::vector<Candidate> candidates;
    candidates.reserve(rejected.size());
    for (size_t r = 0; r < rejected.size(); ++r) {
        if (rejected[r].derived_score == gold)
            throw ValidationError("rejected path " + std::to_string(r) +
                                  " carries the chosen score " + std::to_string(gold));
        size_t best = 0;
        int best_distance = hamming_distance(chosen[0].decisions, rejected[r].decisions);
        for (size_t c = 1; c < chosen.size(); ++c) {
            const int d = hamming_distance(chosen[c].decisions, rejected[r].decisions);
            if (d < best_distance) {
                best = c;
                best_distance = d;
            }
        }
        candidates.push_back({r, best, best_distance});
    }

    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
        if (a.distance != b.distance) return a.distance > b.distance;
        return a.rejected_index < b.rejected_index;
    });
    if (static_cast<int>(candidates.size()) > pairs_cap)
        candidates.resize(static_cast<size_t>(pairs_cap));

    std::vector<PreferencePair> pairs;
    pairs.reserve(candidates.size());
    for (const auto& c : candidates) {
        pairs.push_back({chosen[c.chosen_index], rejected[c.rejected_index], answer_id});
    }
    return pairs;
}

}  // namespace dars
