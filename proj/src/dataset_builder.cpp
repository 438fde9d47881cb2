#include "dars/dataset_builder.hpp"

#include "dars/errors.hpp"
#include "dars/prompts.hpp"

namespace dars {

const char* to_string(SftFamily family) {
    switch (family) {
        case SftFamily::ReasonerTask: return "reasoner_task";
        case SftFamily::ReasonerRefine: return "reasoner_refine";
        case SftFamily::CriticReflect: return "critic_reflect";
        case SftFamily::CriticStop: return "critic_stop";
    }
    return "reasoner_task";
}

SftFamily sft_family_from_string(const std::string& value) {
    if (value == "reasoner_task") return SftFamily::ReasonerTask;
    if (value == "reasoner_refine") return SftFamily::ReasonerRefine;
    if (value == "critic_reflect") return SftFamily::CriticReflect;
    if (value == "critic_stop") return SftFamily::CriticStop;
    throw ValidationError("family: unknown value \"" + value + "\"");
}

void validate_sft_record(const SftRecord& record) {
    validate_chat_messages(record.messages);
    if (record.target.empty()) throw ValidationError("sft record: empty target");

    size_t n = record.messages.size();
    if (!record.messages.empty() && record.messages[0].role == Role::System) --n;
    switch (record.family) {
        case SftFamily::ReasonerTask:
            if (n != 1) throw ValidationError("reasoner_task: expected 1 message, found " +
                                              std::to_string(n));
            break;
        case SftFamily::ReasonerRefine:
            if (n != 3) throw ValidationError("reasoner_refine: expected 3 messages, found " +
                                              std::to_string(n));
            break;
        case SftFamily::CriticReflect:
        case SftFamily::CriticStop:
            if (n < 2 || n % 2 != 0)
                throw ValidationError(std::string(to_string(record.family)) +
                                      ": expected an even message count >= 2, found " +
                                      std::to_string(n));
            break;
    }
}

namespace {

std::vector<ChatMessage> start_messages(const QuestionContext& ctx, const StudentAnswer& answer,
                                        const SftOptions& options) {
    std::vector<ChatMessage> messages;
    if (options.system_message) messages.push_back({Role::System, *options.system_message});
    messages.push_back({Role::User, prompts::render_question_turn(ctx, answer)});
    return messages;
}

void check_reflection(const ReflectionRecord& reflection, const char* use) {
    if (reflection.rejected_rationale.empty())
        throw ValidationError(std::string(use) + ": reflection " + reflection.id +
                              " has no rejected rationale");
    if (reflection.guidance.empty())
        throw ValidationError(std::string(use) + ": reflection " + reflection.id +
                              " has no guidance");
}

}  // namespace

SftRecord build_reasoner_task(const StudentAnswer& answer, const QuestionContext& ctx,
                              const TreePath& chosen, const SftOptions& options) {
    if (chosen.rationale_text.empty())
        throw ValidationError("reasoner_task: chosen path for answer " + answer.id +
                              " has no rationale text");
    if (chosen.derived_score != answer.gold_score)
        throw ValidationError("reasoner_task: chosen path scores " +
                              std::to_string(chosen.derived_score) + " but answer " + answer.id +
                              " is gold " + std::to_string(answer.gold_score));
    SftRecord record;
    record.family = SftFamily::ReasonerTask;
    record.messages = start_messages(ctx, answer, options);
    record.target = chosen.rationale_text;
    record.answer_id = answer.id;
    record.provenance = "chosen:" + to_string(chosen.decisions);
    validate_sft_record(record);
    return record;
}

SftRecord build_reasoner_refine(const StudentAnswer& answer, const QuestionContext& ctx,
                                const ReflectionRecord& reflection, const SftOptions& options) {
    check_reflection(reflection, "reasoner_refine");
    if (reflection.chosen_rationale.empty())
        throw ValidationError("reasoner_refine: reflection " + reflection.id +
                              " has no chosen rationale");
    SftRecord record;
    record.family = SftFamily::ReasonerRefine;
    record.messages = start_messages(ctx, answer, options);
    record.messages.push_back({Role::Assistant, reflection.rejected_rationale});
    record.messages.push_back({Role::User, reflection.guidance});
    record.target = reflection.chosen_rationale;
    record.answer_id = answer.id;
    record.provenance = "reflection:" + reflection.id;
    validate_sft_record(record);
    return record;
}

SftRecord build_critic_reflect(const StudentAnswer& answer, const QuestionContext& ctx,
                               const ReflectionRecord& reflection, int depth,
                               const ReflectionRecord* prior, const SftOptions& options) {
    if (depth != 1 && depth != 2)
        throw ValidationError("critic_reflect: depth must be 1 or 2, got " + std::to_string(depth));
    check_reflection(reflection, "critic_reflect");

    SftRecord record;
    record.family = SftFamily::CriticReflect;
    record.messages = start_messages(ctx, answer, options);
    if (depth == 2) {
        if (prior == nullptr)
            throw ValidationError("critic_reflect: depth 2 requested without a prior reflection");
        check_reflection(*prior, "critic_reflect");
        if (prior->rejected_bits == reflection.rejected_bits)
            throw ValidationError("critic_reflect: depth 2 needs a second distinct rejected path");
        record.messages.push_back({Role::Assistant, prior->rejected_rationale});
        record.messages.push_back({Role::User, prior->guidance});
    }
    record.messages.push_back({Role::Assistant, reflection.rejected_rationale});
    record.target = reflection.guidance;
    record.answer_id = answer.id;
    record.provenance = "reflection:" + reflection.id;
    validate_sft_record(record);

    // Reflect targets guidance, so the record is [.., assistant] -> user-side
    // text; re-check the count rule for the depth asked for.
    size_t n = record.messages.size();
    if (record.messages[0].role == Role::System) --n;
    if (n != static_cast<size_t>(2 * depth))
        throw ValidationError("critic_reflect: depth " + std::to_string(depth) + " built " +
                              std::to_string(n) + " messages");
    return record;
}

SftRecord build_critic_stop(const StudentAnswer& answer, const QuestionContext& ctx,
                            const std::string& correct_rationale, int history_depth,
                            const ReflectionRecord* prior, const SftOptions& options) {
    if (history_depth != 1 && history_depth != 2)
        throw ValidationError("critic_stop: history_depth must be 1 or 2, got " +
                              std::to_string(history_depth));
    if (correct_rationale.empty())
        throw ValidationError("critic_stop: empty correct rationale for answer " + answer.id);
    int asserted;
    try {
        asserted = extract_score(correct_rationale, ctx.score_range);
    } catch (const ExtractionError& e) {
        throw ValidationError("critic_stop: rationale for answer " + answer.id +
                              " has no extractable score: " + e.what());
    }
    if (asserted != answer.gold_score)
        throw ValidationError("critic_stop: rationale asserts " + std::to_string(asserted) +
                              " but answer " + answer.id + " is gold " +
                              std::to_string(answer.gold_score));
    if (options.stop_completion.empty())
        throw ValidationError("critic_stop: empty stop completion");

    SftRecord record;
    record.family = SftFamily::CriticStop;
    record.messages = start_messages(ctx, answer, options);
    if (history_depth == 2) {
        if (prior == nullptr)
            throw ValidationError("critic_stop: history_depth 2 requested without a prior reflection");
        check_reflection(*prior, "critic_stop");
        record.messages.push_back({Role::Assistant, prior->rejected_rationale});
        record.messages.push_back({Role::User, prior->guidance});
    }
    record.messages.push_back({Role::Assistant, correct_rationale});
    record.target = options.stop_completion;
    record.answer_id = answer.id;
    record.provenance = prior ? "reflection:" + prior->id : "chosen";
    validate_sft_record(record);
    return record;
}

std::string summarize_rationale(const TreePath& path, const StudentAnswer& answer,
                                const QuestionContext& ctx, ChatGateway& gateway, int retries,
                                const GenerationProfile& profile) {
    ChatRequest request;
    request.profile = profile;
    request.messages.push_back({Role::User, prompts::render_summarize_prompt(ctx, answer, path)});

    const int max_attempts = 1 + std::max(0, retries);
    std::string last_problem;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        ChatResponse response = gateway.complete(request);
        try {
            const int asserted = extract_score(response.text, ctx.score_range);
            if (asserted == path.derived_score) return response.text;
            last_problem = "summary asserts " + std::to_string(asserted) + ", path derives " +
                           std::to_string(path.derived_score);
        } catch (const ExtractionError& e) {
            last_problem = e.what();
        }
    }
    throw ValidationError("summarize_rationale for answer " + answer.id + ", path " +
                          to_string(path.decisions) + ": " + last_problem + " (after " +
                          std::to_string(max_attempts) + " attempts)");
}

void emit_sft(const std::vector<SftRecord>& records, const std::string& path) {
    std::vector<ojson> lines;
    lines.reserve(records.size());
    for (const auto& record : records) {
        validate_sft_record(record);
        ojson doc;
        doc["family"] = to_string(record.family);
        ojson messages = ojson::array();
        for (const auto& m : record.messages)
            messages.push_back(ojson{{"role", to_string(m.role)}, {"content", m.content}});
        doc["messages"] = std::move(messages);
        doc["target"] = record.target;
        doc["answer_id"] = record.answer_id;
        doc["provenance"] = record.provenance;
        lines.push_back(std::move(doc));
    }
    write_jsonl(path, lines);
}

std::vector<SftRecord> read_sft(const std::string& path) {
    std::vector<SftRecord> records;
    for (const auto& doc : read_jsonl(path)) {
        SftRecord record;
        record.family = sft_family_from_string(doc.at("family").get<std::string>());
        for (const auto& m : doc.at("messages")) {
            record.messages.push_back({role_from_string(m.at("role").get<std::string>()),
                                       m.at("content").get<std::string>()});
        }
        record.target = doc.at("target").get<std::string>();
        record.answer_id = doc.at("answer_id").get<std::string>();
        record.provenance = doc.value("provenance", "");
        validate_sft_record(record);
        records.push_back(std::move(record));
    }
    return records;
}

DpoRecord build_dpo_record(const StudentAnswer& answer, const QuestionContext& ctx,
                           const ReflectionRecord& reflection) {
    if (reflection.chosen_rationale.empty() || reflection.rejected_rationale.empty())
        throw ValidationError("dpo record: reflection " + reflection.id +
                              " is missing a rationale");
    return DpoRecord{prompts::render_question_turn(ctx, answer), reflection.chosen_rationale,
                     reflection.rejected_rationale, answer.id};
}

void emit_dpo(const std::vector<DpoRecord>& records, const std::string& path) {
    std::vector<ojson> lines;
    lines.reserve(records.size());
    for (const auto& record : records) {
        ojson doc;
        doc["prompt"] = record.prompt;
        doc["chosen"] = record.chosen;
        doc["rejected"] = record.rejected;
        doc["answer_id"] = record.answer_id;
        lines.push_back(std::move(doc));
    }
    write_jsonl(path, lines);
}

}  // namespace dars
