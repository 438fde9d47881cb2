#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dars/corpus.hpp"

namespace dars {

/// Binary coverage decisions over a question's key elements; index j is the
/// decision for element j.
struct DecisionVector {
    std::vector<std::uint8_t> bits;

    bool operator==(const DecisionVector&) const = default;
};

std::string to_string(const DecisionVector& v);          // e.g. "1011"
DecisionVector decision_vector_from_string(const std::string& s);

int coverage_count(const DecisionVector& v);
int hamming_distance(const DecisionVector& a, const DecisionVector& b);

/// Band lookup; counts hitting no band take the default score. `count` must
/// lie in [0, element_count].
int apply_rubric(const Rubric& rubric, int count, int element_count);

enum class PathSource { Judged, Enumerated, External };

const char* to_string(PathSource source);

struct TreePath {
    DecisionVector decisions;
    int derived_score = 0;
    std::string rationale_text;  // empty until summarized
    PathSource source = PathSource::Judged;
};

/// What the per-element judge can defensibly claim about one element.
enum class Plausible { Absent, Present, Either };

struct ElementJudgment {
    int element_index = 0;
    Plausible plausible = Plausible::Either;
    std::string evidence;
};

using ElementJudge =
    std::function<ElementJudgment(const QuestionContext&, const StudentAnswer&, int element_index)>;

/// All decision vectors consistent with the judge's per-element judgments,
/// scored through the rubric. When more than path_cap paths exist the list is
/// truncated by ascending Hamming distance from the base path (each Either
/// element at its Absent setting), ties broken by the enumeration order of
/// the flipped index sets.
std::vector<TreePath> build_paths(const StudentAnswer& answer, const QuestionContext& ctx,
                                  const ElementJudge& judge, int path_cap);

/// Same enumeration from precomputed judgments. Source is tagged Enumerated.
std::vector<TreePath> enumerate_paths(const std::vector<ElementJudgment>& judgments,
                                      const QuestionContext& ctx, int path_cap);

struct PartitionedPaths {
    std::vector<TreePath> chosen;    // derived score equals the gold score
    std::vector<TreePath> rejected;  // everything else
};

/// Order-preserving partition. Empty chosen is a legal outcome.
PartitionedPaths partition_paths(const std::vector<TreePath>& paths, int gold_score);

struct PreferencePair {
    TreePath chosen;
    TreePath rejected;
    std::string answer_id;
};

/// Each rejected path is paired with its Hamming-nearest chosen path (ties:
/// lowest chosen index). At most pairs_cap pairs survive, picked by
/// descending pair distance, then ascending rejected index.
std::vector<PreferencePair> make_preference_pairs(const std::vector<TreePath>& chosen,
                                                  const std::vector<TreePath>& rejected,
                                                  const std::string& answer_id, int pairs_cap);

}  // namespace dars
