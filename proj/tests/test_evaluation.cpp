#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "dars/errors.hpp"
#include "dars/evaluation.hpp"
#include "metric_reference.hpp"

using namespace dars;

namespace {

std::vector<LabeledPair> zip_pairs(const std::vector<int>& gold, const std::vector<int>& pred) {
    std::vector<LabeledPair> pairs;
    for (size_t i = 0; i < gold.size(); ++i) {
        LabeledPair p;
        p.gold = gold[i];
        p.predicted = pred[i];
        p.answer_id = "a" + std::to_string(i);
        pairs.push_back(p);
    }
    return pairs;
}

LabeledPair tagged(const std::string& id, int gold, int predicted) {
    LabeledPair p;
    p.gold = gold;
    p.predicted = predicted;
    p.answer_id = id;
    return p;
}

}  // namespace

TEST_CASE("agreement metrics reproduce hand-computed goldens") {
    const auto pairs = zip_pairs({0, 0, 1, 1}, {0, 1, 1, 1});
    const ScoreRange range{0, 1};
    CHECK(accuracy(pairs) == doctest::Approx(0.75));
    CHECK(qwk(pairs, range) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(macro_f1(pairs, range) == doctest::Approx(11.0 / 15.0).epsilon(1e-12));
}

TEST_CASE("perfect and degenerate agreement edge cases") {
    const ScoreRange range{0, 2};
    SUBCASE("perfect predictions score one across the board") {
        const auto pairs = zip_pairs({0, 1, 2, 1}, {0, 1, 2, 1});
        CHECK(accuracy(pairs) == doctest::Approx(1.0));
        CHECK(macro_f1(pairs, range) == doctest::Approx(1.0));
        CHECK(qwk(pairs, range) == doctest::Approx(1.0));
    }
    SUBCASE("constant identical labels make the expected disagreement vanish") {
        const auto pairs = zip_pairs({1, 1, 1}, {1, 1, 1});
        CHECK(accuracy(pairs) == doctest::Approx(1.0));
        CHECK_THROWS_WITH_AS(qwk(pairs, range), doctest::Contains("degenerate"), ValidationError);
    }
    SUBCASE("empty inputs are refused") {
        CHECK_THROWS_AS(accuracy({}), ValidationError);
        CHECK_THROWS_AS(macro_f1({}, range), ValidationError);
        CHECK_THROWS_AS(qwk({}, range), ValidationError);
    }
    SUBCASE("labels outside the range are refused") {
        const auto pairs = zip_pairs({0, 3}, {0, 1});
        CHECK_THROWS_AS(macro_f1(pairs, range), ValidationError);
        CHECK_THROWS_AS(qwk(pairs, range), ValidationError);
    }
    SUBCASE("a single-label range cannot be quadratically weighted") {
        CHECK_THROWS_AS(qwk(zip_pairs({0}, {0}), ScoreRange{0, 0}), ValidationError);
    }
}

TEST_CASE("absent classes can be dropped from the macro average") {
    const ScoreRange range{0, 3};
    const auto pairs = zip_pairs({0, 1}, {0, 1});
    CHECK(macro_f1(pairs, range, false) == doctest::Approx(0.5));
    CHECK(macro_f1(pairs, range, true) == doctest::Approx(1.0));
}

TEST_CASE("metrics agree with an independent reference on random instances") {
    std::mt19937 rng(987654);
    int qwk_checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int lo = static_cast<int>(rng() % 3);
        const int k = 2 + static_cast<int>(rng() % 4);  // 2..5 labels
        const ScoreRange range{lo, lo + k - 1};
        const size_t n = 1 + rng() % 50;
        std::vector<int> gold(n), pred(n);
        for (size_t i = 0; i < n; ++i) {
            gold[i] = lo + static_cast<int>(rng() % k);
            pred[i] = lo + static_cast<int>(rng() % k);
        }
        const auto pairs = zip_pairs(gold, pred);
        CAPTURE(trial);

        CHECK(accuracy(pairs) == doctest::Approx(ref::accuracy(gold, pred)).epsilon(1e-9));
        CHECK(macro_f1(pairs, range, false) ==
              doctest::Approx(ref::macro_f1(gold, pred, lo, range.hi, false)).epsilon(1e-9));
        CHECK(macro_f1(pairs, range, true) ==
              doctest::Approx(ref::macro_f1(gold, pred, lo, range.hi, true)).epsilon(1e-9));
        if (!ref::qwk_degenerate(gold, pred, lo, range.hi)) {
            CHECK(qwk(pairs, range) ==
                  doctest::Approx(ref::qwk(gold, pred, lo, range.hi)).epsilon(1e-9));
            ++qwk_checked;
        }
    }
    CHECK(qwk_checked > 400);  // degeneracy should be rare at these sizes
}

TEST_CASE("one-tailed t-tests behave across separations") {
    SUBCASE("identical samples sit exactly at one half") {
        const std::vector<double> xs = {0.4, 0.5, 0.6};
        CHECK(one_tailed_t_test(xs, xs) == 0.5);
        CHECK(paired_one_tailed_t_test(xs, xs) == 0.5);
    }
    SUBCASE("a known instance matches an external computation") {
        CHECK(one_tailed_t_test({3, 4, 5}, {1, 2, 3}) ==
              doctest::Approx(0.03524199845510997).epsilon(1e-9));
        CHECK(paired_one_tailed_t_test({0.9, 0.8, 0.85, 0.95}, {0.6, 0.55, 0.7, 0.62}) ==
              doctest::Approx(0.0036534059790654274).epsilon(1e-9));
    }
    SUBCASE("direction matters") {
        const std::vector<double> high = {0.9, 0.92, 0.88, 0.91};
        const std::vector<double> low = {0.5, 0.52, 0.48, 0.51};
        CHECK(one_tailed_t_test(high, low) < 0.01);
        CHECK(one_tailed_t_test(low, high) > 0.99);
    }
    SUBCASE("a constant positive paired difference is maximally significant") {
        CHECK(paired_one_tailed_t_test({1.1, 2.1, 3.1}, {1.0, 2.0, 3.0}) == 0.0);
        CHECK(paired_one_tailed_t_test({1.0, 2.0, 3.0}, {1.1, 2.1, 3.1}) == 1.0);
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(one_tailed_t_test({1.0}, {1.0, 2.0}), ValidationError);
        CHECK_THROWS_AS(paired_one_tailed_t_test({1.0, 2.0}, {1.0}), ValidationError);
    }
}

TEST_CASE("transition analysis joins runs by answer id") {
    const ScoreRange range{0, 2};
    const std::vector<LabeledPair> initial = {
        tagged("a", 1, 1), tagged("b", 2, 0), tagged("c", 0, 0),
        tagged("d", 2, 2), tagged("e", 1, 1),
    };
    const std::vector<LabeledPair> final_pairs = {
        tagged("e", 1, 0), tagged("d", 2, 2), tagged("c", 0, 0),
        tagged("b", 2, 2), tagged("a", 1, 0),
    };

    const TransitionAnalysis analysis = transitions(initial, final_pairs, range);
    CHECK(analysis.correct_to_correct == 2);    // c, d
    CHECK(analysis.correct_to_incorrect == 2);  // a, e
    CHECK(analysis.incorrect_to_correct == 1);  // b
    CHECK(analysis.incorrect_to_incorrect == 0);

    REQUIRE(analysis.ranked.size() == 2);
    CHECK(analysis.ranked[0].gold == 1);
    CHECK(analysis.ranked[0].from == 1);
    CHECK(analysis.ranked[0].to == 0);
    CHECK(analysis.ranked[0].count == 2);
    CHECK(analysis.ranked[1].gold == 2);
    CHECK(analysis.ranked[1].from == 0);
    CHECK(analysis.ranked[1].to == 2);
    CHECK(analysis.ranked[1].count == 1);

    CHECK(analysis.initial.at(1, 1) == 2);
    CHECK(analysis.initial.at(2, 0) == 1);
    CHECK(analysis.final.at(1, 0) == 2);
    CHECK(analysis.final.at(2, 2) == 2);
    CHECK_THROWS_AS(analysis.final.at(3, 0), ValidationError);

    SUBCASE("ranked ties break on ascending gold, from, to") {
        const std::vector<LabeledPair> first = {tagged("p", 0, 1), tagged("q", 2, 1)};
        const std::vector<LabeledPair> last = {tagged("p", 0, 0), tagged("q", 2, 2)};
        const auto tied = transitions(first, last, range);
        REQUIRE(tied.ranked.size() == 2);
        CHECK(tied.ranked[0].gold == 0);
        CHECK(tied.ranked[1].gold == 2);
    }
    SUBCASE("mismatched cohorts are refused") {
        CHECK_THROWS_WITH_AS(transitions(initial, {tagged("a", 1, 1)}, range),
                             doctest::Contains("counts differ"), ValidationError);
        auto dup_final = final_pairs;
        dup_final[1] = tagged("a", 1, 1);
        CHECK_THROWS_WITH_AS(transitions(initial, dup_final, range),
                             doctest::Contains("duplicate"), ValidationError);
        auto dup_initial = initial;
        dup_initial[1] = tagged("a", 1, 1);
        auto final_with_extra = final_pairs;
        CHECK_THROWS_AS(transitions(dup_initial, final_with_extra, range), ValidationError);
        auto renamed = final_pairs;
        renamed[0].answer_id = "zz";
        CHECK_THROWS_WITH_AS(transitions(initial, renamed, range),
                             doctest::Contains("missing from final"), ValidationError);
        auto regraded = final_pairs;
        regraded[0].gold = 2;
        CHECK_THROWS_WITH_AS(transitions(initial, regraded, range), doctest::Contains("gold"),
                             ValidationError);
    }
}

TEST_CASE("reports average datasets without weighting") {
    EvalDataset small{"small", zip_pairs({0, 0, 1, 1}, {0, 1, 1, 1}), {0, 1}, false};
    EvalDataset big{"bigger", zip_pairs({0, 1, 2, 0, 1, 2}, {0, 1, 2, 0, 1, 2}), {0, 2}, false};

    const EvalReport report = build_report({small, big});
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].name == "small");
    CHECK(report.rows[0].n == 4);
    CHECK(report.rows[0].acc == doctest::Approx(0.75));
    CHECK(report.rows[1].acc == doctest::Approx(1.0));
    CHECK(report.overall.n == 10);
    CHECK(report.overall.acc == doctest::Approx((0.75 + 1.0) / 2));
    CHECK(report.overall.qwk == doctest::Approx((0.5 + 1.0) / 2));

    SUBCASE("metric failures name the offending dataset") {
        EvalDataset degenerate{"flatline", zip_pairs({1, 1}, {1, 1}), {0, 2}, false};
        CHECK_THROWS_WITH_AS(build_report({small, degenerate}), doctest::Contains("flatline"),
                             ValidationError);
    }
    SUBCASE("no datasets is an error") {
        CHECK_THROWS_AS(build_report({}), ValidationError);
    }
    SUBCASE("text renderings carry the numbers") {
        const std::string text = render_report_text(report);
        CHECK(text.find("small") != std::string::npos);
        CHECK(text.find("bigger") != std::string::npos);
        CHECK(text.find("overall") != std::string::npos);
        CHECK(text.find("0.7500") != std::string::npos);

        const std::string side_by_side = render_comparison_text(report, report);
        CHECK(side_by_side.find("initial ACC/F1/QWK") != std::string::npos);
        CHECK(side_by_side.find("final ACC/F1/QWK") != std::string::npos);
        CHECK(side_by_side.find("small") != std::string::npos);
    }
    SUBCASE("json rendering keeps row and overall structure") {
        const ojson doc = report_to_json(report);
        REQUIRE(doc.contains("rows"));
        CHECK(doc["rows"].size() == 2);
        CHECK(doc["rows"][0]["dataset"] == "small");
        CHECK(doc["rows"][0]["acc"] == doctest::Approx(0.75));
        CHECK(doc["overall"]["dataset"] == "overall");
        CHECK(doc["overall"]["n"] == 10);
    }
}
