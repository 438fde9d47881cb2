#include "dars/reflection.hpp"

#include <algorithm>

#include "dars/errors.hpp"
#include "dars/prompts.hpp"

namespace dars {

DifferenceVector diff(const PreferencePair& pair) {
    const auto& c = pair.chosen.decisions.bits;
    const auto& r = pair.rejected.decisions.bits;
    if (c.size() != r.size())
        throw ValidationError("pair for answer " + pair.answer_id + ": decision lengths differ (" +
                              std::to_string(c.size()) + " vs " + std::to_string(r.size()) + ")");
    DifferenceVector d;
    d.deltas.reserve(c.size());
    for (size_t j = 0; j < c.size(); ++j) {
        d.deltas.push_back(static_cast<std::int8_t>(static_cast<int>(c[j]) - static_cast<int>(r[j])));
    }
    return d;
}

StructuralHint render_hint(const DifferenceVector& delta, const QuestionContext& ctx) {
    if (static_cast<int>(delta.deltas.size()) != ctx.element_count())
        throw ValidationError("delta length " + std::to_string(delta.deltas.size()) +
                              " does not match element count " +
                              std::to_string(ctx.element_count()));
    StructuralHint hint;
    for (size_t j = 0; j < delta.deltas.size(); ++j) {
        const std::string& element = ctx.key_elements[j];
        if (delta.deltas[j] < 0) {
            hint.lines.push_back(prompts::hint_line_missing(static_cast<int>(j), element));
        } else if (delta.deltas[j] > 0) {
            hint.lines.push_back(prompts::hint_line_covered(static_cast<int>(j), element));
        }
    }
    for (size_t i = 0; i < hint.lines.size(); ++i) {
        if (i > 0) hint.rendered += '\n';
        hint.rendered += hint.lines[i];
    }
    return hint;
}

ChatRequest build_reflection_prompt(const StudentAnswer& answer, const PreferencePair& pair,
                                    const StructuralHint& hint, const SynthesisOptions& options,
                                    const GenerationProfile& profile) {
    if (pair.rejected.rationale_text.empty())
        throw ValidationError("pair for answer " + pair.answer_id +
                              ": rejected path has no rationale text");
    const std::string* chosen_rationale = nullptr;
    if (options.include_chosen_rationale) {
        if (pair.chosen.rationale_text.empty())
            throw ValidationError("pair for answer " + pair.answer_id +
                                  ": chosen path has no rationale text");
        chosen_rationale = &pair.chosen.rationale_text;
    }
    ChatRequest request;
    request.profile = profile;
    request.messages.push_back(
        {Role::User, prompts::render_reflection_prompt(answer, pair.rejected.rationale_text,
                                                       hint.rendered, chosen_rationale)});
    return request;
}

std::string parse_guidance(const std::string& raw) {
    auto object = extract_first_json_object(raw);
    if (!object)
        throw GuidanceError(GuidanceError::Kind::NoObject, "no JSON object found in model output");
    auto it = object->find("guidance");
    if (it == object->end() || !it->is_string())
        throw GuidanceError(GuidanceError::Kind::MissingField,
                            "object has no string \"guidance\" field");
    std::string guidance = it->get<std::string>();
    if (guidance.empty())
        throw GuidanceError(GuidanceError::Kind::EmptyValue, "guidance is empty");
    return guidance;
}

ReflectionRecord synthesize_reflection(const StudentAnswer& answer, const PreferencePair& pair,
                                       const QuestionContext& ctx, ChatGateway& gateway,
                                       const SynthesisOptions& options,
                                       const GenerationProfile& profile) {
    DifferenceVector delta = diff(pair);
    const bool all_zero =
        std::all_of(delta.deltas.begin(), delta.deltas.end(), [](std::int8_t d) { return d == 0; });
    if (all_zero)
        throw ValidationError("pair for answer " + pair.answer_id +
                              ": no discrepancy between chosen and rejected paths");

    StructuralHint hint = render_hint(delta, ctx);
    ChatRequest request = build_reflection_prompt(answer, pair, hint, options, profile);

    const int max_attempts = 1 + std::max(0, options.parse_retries);
    for (int attempt = 1;; ++attempt) {
        ChatResponse response = gateway.complete(request);
        try {
            ReflectionRecord record;
            // Parse before touching `hint`; a malformed reply must leave it
            // intact for the retry.
            record.guidance = parse_guidance(response.text);
            record.answer_id = pair.answer_id;
            record.chosen_bits = to_string(pair.chosen.decisions);
            record.rejected_bits = to_string(pair.rejected.decisions);
            record.rejected_rationale = pair.rejected.rationale_text;
            record.chosen_rationale = pair.chosen.rationale_text;
            record.hint = std::move(hint);
            record.raw_response = response.text;
            record.retries = attempt - 1;
            return record;
        } catch (const GuidanceError& e) {
            if (attempt >= max_attempts)
                throw GuidanceError(e.kind, std::string(e.what()) + " (after " +
                                                std::to_string(attempt) + " attempts)");
        }
    }
}

ojson reflection_record_to_json(const ReflectionRecord& record) {
    ojson doc;
    doc["id"] = record.id;
    doc["answer_id"] = record.answer_id;
    doc["chosen_bits"] = record.chosen_bits;
    doc["rejected_bits"] = record.rejected_bits;
    doc["rejected_rationale"] = record.rejected_rationale;
    doc["chosen_rationale"] = record.chosen_rationale;
    doc["hint"] = ojson{{"lines", record.hint.lines}, {"rendered", record.hint.rendered}};
    doc["guidance"] = record.guidance;
    doc["raw_response"] = record.raw_response;
    doc["retries"] = record.retries;
    return doc;
}

ReflectionRecord reflection_record_from_json(const json& doc) {
    ReflectionRecord record;
    record.id = doc.value("id", "");
    record.answer_id = doc.at("answer_id").get<std::string>();
    record.chosen_bits = doc.value("chosen_bits", "");
    record.rejected_bits = doc.value("rejected_bits", "");
    record.rejected_rationale = doc.at("rejected_rationale").get<std::string>();
    record.chosen_rationale = doc.value("chosen_rationale", "");
    if (doc.contains("hint")) {
        const auto& hint = doc.at("hint");
        for (const auto& line : hint.value("lines", json::array()))
            record.hint.lines.push_back(line.get<std::string>());
        record.hint.rendered = hint.value("rendered", "");
    }
    record.guidance = doc.at("guidance").get<std::string>();
    record.raw_response = doc.value("raw_response", "");
    record.retries = doc.value("retries", 0);
    return record;
}

}  // namespace dars
