#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dars/loop.hpp"
#include "dars/reflection.hpp"

namespace dars {

/// Conversational fine-tuning families. Message shapes at the default depth:
///   ReasonerTask    [user context]                                -> rationale
///   ReasonerRefine  [user context, assistant wrong, user guidance] -> better rationale
///   CriticReflect   [user context, assistant wrong]                -> guidance
///   CriticStop      [user context, assistant correct]              -> stop completion
/// Each extra history depth adds one guidance turn and one assessment turn.
enum class SftFamily { ReasonerTask, ReasonerRefine, CriticReflect, CriticStop };

const char* to_string(SftFamily family);
SftFamily sft_family_from_string(const std::string& value);

struct SftRecord {
    SftFamily family = SftFamily::ReasonerTask;
    std::vector<ChatMessage> messages;
    std::string target;
    std::string answer_id;
    std::string provenance;
};

struct SftOptions {
    std::string stop_completion = "Rationale Looks Good! [STOP]";
    std::optional<std::string> system_message;
};

/// Role alternation plus the per-family message-count rule.
void validate_sft_record(const SftRecord& record);

SftRecord build_reasoner_task(const StudentAnswer& answer, const QuestionContext& ctx,
                              const TreePath& chosen, const SftOptions& options = {});

SftRecord build_reasoner_refine(const StudentAnswer& answer, const QuestionContext& ctx,
                                const ReflectionRecord& reflection, const SftOptions& options = {});

/// depth 1 trains on the first wrong assessment; depth 2 appends the prior
/// reflection's guidance and the current wrong assessment, so `prior` must be
/// a reflection for a different rejected path of the same answer.
SftRecord build_critic_reflect(const StudentAnswer& answer, const QuestionContext& ctx,
                               const ReflectionRecord& reflection, int depth,
                               const ReflectionRecord* prior = nullptr,
                               const SftOptions& options = {});

/// history_depth 1 puts the correct rationale first; history_depth 2 reaches
/// it through `prior`'s wrong assessment and guidance. The rationale must
/// assert the answer's gold score.
SftRecord build_critic_stop(const StudentAnswer& answer, const QuestionContext& ctx,
                            const std::string& correct_rationale, int history_depth,
                            const ReflectionRecord* prior = nullptr, const SftOptions& options = {});

/// Asks the gateway to write the rationale a path implies; the reply must
/// extract back to the path's derived score, retried up to `retries` times.
std::string summarize_rationale(const TreePath& path, const StudentAnswer& answer,
                                const QuestionContext& ctx, ChatGateway& gateway, int retries = 2,
                                const GenerationProfile& profile = profiles::synthesis());

void emit_sft(const std::vector<SftRecord>& records, const std::string& path);
std::vector<SftRecord> read_sft(const std::string& path);

/// Minimal preference-pair export: prompt plus the two rationales.
struct DpoRecord {
    std::string prompt;
    std::string chosen;
    std::string rejected;
    std::string answer_id;
};

DpoRecord build_dpo_record(const StudentAnswer& answer, const QuestionContext& ctx,
                           const ReflectionRecord& reflection);
void emit_dpo(const std::vector<DpoRecord>& records, const std::string& path);

}  // namespace dars
