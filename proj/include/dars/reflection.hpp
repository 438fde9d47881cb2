#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dars/llm_gateway.hpp"
#include "dars/thought_tree.hpp"

namespace dars {

/// Component-wise chosen minus rejected; entries in {-1, 0, +1}.
struct DifferenceVector {
    std::vector<std::int8_t> deltas;
};

DifferenceVector diff(const PreferencePair& pair);

/// One line per nonzero delta, ascending element index. `rendered` joins the
/// lines with newlines.
struct StructuralHint {
    std::vector<std::string> lines;
    std::string rendered;
};

StructuralHint render_hint(const DifferenceVector& delta, const QuestionContext& ctx);

struct SynthesisOptions {
    bool include_chosen_rationale = true;
    int parse_retries = 2;  // re-asks after a malformed reply, same prompt
};

/// Single-user-message request following the synthesis template. Both
/// rationale texts must be present (the chosen one only when included).
ChatRequest build_reflection_prompt(const StudentAnswer& answer, const PreferencePair& pair,
                                    const StructuralHint& hint, const SynthesisOptions& options = {},
                                    const GenerationProfile& profile = profiles::synthesis());

/// Pulls the "guidance" string out of the first well-formed JSON object in
/// raw model output. Throws GuidanceError with the failure kind.
std::string parse_guidance(const std::string& raw);

struct ReflectionRecord {
    std::string id;         // assigned by the pipeline, e.g. "a1#0"
    std::string answer_id;
    std::string chosen_bits;
    std::string rejected_bits;
    std::string rejected_rationale;
    std::string chosen_rationale;
    StructuralHint hint;
    std::string guidance;
    std::string raw_response;
    int retries = 0;
};

/// diff -> hint -> prompt -> completion -> guidance, with parse retries.
/// Refuses identical paths (empty hint) before any model call.
ReflectionRecord synthesize_reflection(const StudentAnswer& answer, const PreferencePair& pair,
                                       const QuestionContext& ctx, ChatGateway& gateway,
                                       const SynthesisOptions& options = {},
                                       const GenerationProfile& profile = profiles::synthesis());

ojson reflection_record_to_json(const ReflectionRecord& record);
ReflectionRecord reflection_record_from_json(const json& doc);

}  // namespace dars
