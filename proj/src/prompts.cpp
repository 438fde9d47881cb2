#include "dars/prompts.hpp"

#include <algorithm>

#include "dars/errors.hpp"
#include "dars/thought_tree.hpp"

namespace dars::prompts {

std::string render_rubric_text(const Rubric& rubric) {
    std::vector<RubricBand> bands = rubric.bands;
    std::stable_sort(bands.begin(), bands.end(),
                     [](const RubricBand& a, const RubricBand& b) { return a.score > b.score; });
    std::string out;
    auto points = [](int score) {
        return std::to_string(score) + (score == 1 ? " point" : " points");
    };
    for (const auto& band : bands) {
        out += points(band.score);
        out += ": ";
        if (band.min_count == band.max_count) {
            out += std::to_string(band.min_count);
            out += band.min_count == 1 ? " key element;" : " key elements;";
        } else {
            out += std::to_string(band.min_count) + "-" + std::to_string(band.max_count) +
                   " key elements;";
        }
        out += '\n';
    }
    out += points(rubric.default_score);
    out += ": Other.";
    return out;
}

std::string render_question_turn(const QuestionContext& ctx, const StudentAnswer& answer) {
    std::string out;
    out += "[Question]: \n";
    out += ctx.prompt;
    out += "\n\n[Key Elements]:\n";
    for (const auto& element : ctx.key_elements) {
        out += element;
        out += '\n';
    }
    out += "\n[Marking Rubric]:\n";
    out += render_rubric_text(ctx.rubric);
    out += "\n[Student Answer]: ";
    out += answer.text;
    out += "\nCritically assess the [Student Answer] in light of the [Key Answer Elements]. "
           "Offer a detailed explanation for the score assigned, referencing specific criteria "
           "from the [Marking Rubric]:";
    return out;
}

std::string hint_line_missing(int element_index, const std::string& element) {
    return "- " + std::to_string(element_index) + ": The student didn't answer the \"" + element +
           "\" but the incorrect rationale wrongly assessed the student mentioned it.";
}

std::string hint_line_covered(int element_index, const std::string& element) {
    return "- " + std::to_string(element_index) + ": The student answered the \"" + element +
           "\" but the incorrect rationale wrongly assessed the student didn't mention it.";
}

std::string render_reflection_prompt(const StudentAnswer& answer,
                                     const std::string& rejected_rationale,
                                     const std::string& hint_rendered,
                                     const std::string* chosen_rationale) {
    std::string out;
    out += "Here is an incorrect assessment rationale for the student answer:\n";
    out += "[Student Answer]:";
    out += answer.text;
    out += "\nIncorrect Rationale: ";
    out += rejected_rationale;
    out += "\nThis wrong rationale missed the following key elements:\n";
    out += hint_rendered;
    out += '\n';
    if (chosen_rationale != nullptr) {
        out += "Correct Rationale: ";
        out += *chosen_rationale;
        out += '\n';
    }
    out += "Please construct a **reflection guidance** that\n";
    out += "1. point out the incorrectly assessed key elements,\n";
    out += "2. guide the model to reflect on the mistakes for generating a better assessment "
           "rationale,\n";
    out += "3. pretend you are talking with an assessor using pronouns like \"you\",\n";
    out += "4. By the end of the guidance ask the model to reflect or revise based on the "
           "feedback and retry or regenerate the rationale.\n";
    out += "Output the guidance in JSON format:{ \"guidance\": \"...\" }";
    return out;
}

std::string baseline_critic_system_prompt() {
    return "Given the provided assessment of the student's answer, generate constructive and "
           "actionable feedback to help the assessment model improve their response. The "
           "feedback should:\n"
           "1. Highlight Areas for Improvement: Point out specific aspects where the model can "
           "enhance their assessment, such as accuracy, completeness, clarity, or structure.\n"
           "2. Provide Actionable Suggestions: Offer clear, practical steps the model can take "
           "to address identified weaknesses and improve their understanding.\n"
           "Please generate feedback based on these guidelines to guide the model in refining "
           "their response effectively.\n"
           "If the assessment seems good enough, please output \"[STOP]\" to indicate the end "
           "of the feedback.";
}

std::string render_summarize_prompt(const QuestionContext& ctx, const StudentAnswer& answer,
                                    const TreePath& path) {
    const int m = ctx.element_count();
    if (static_cast<int>(path.decisions.bits.size()) != m)
        throw ValidationError("path: decision length " + std::to_string(path.decisions.bits.size()) +
                              " does not match element count " + std::to_string(m));
    std::string out = render_question_turn(ctx, answer);
    out += "\n\n[Assessment Decisions]:\n";
    for (int j = 0; j < m; ++j) {
        out += "- " + std::to_string(j) + ": \"" + ctx.key_elements[static_cast<size_t>(j)] +
               "\" was " + (path.decisions.bits[static_cast<size_t>(j)] ? "addressed" : "not addressed") +
               " by the student.\n";
    }
    out += "[Decision Vector]: " + to_string(path.decisions);
    out += "\n[Derived Score]: " + std::to_string(path.derived_score);
    out += "\n\nWrite the assessment rationale these decisions imply. State explicitly that the "
           "student's answer scored " +
           std::to_string(path.derived_score) +
           (path.derived_score == 1 ? " point" : " points") +
           " according to the marking rubric, walk through each decision listed above, and quote "
           "the student's words where they support a decision.";
    return out;
}

std::string render_judge_prompt(const QuestionContext& ctx, const StudentAnswer& answer,
                                int element_index) {
    if (element_index < 0 || element_index >= ctx.element_count())
        throw ValidationError("element_index " + std::to_string(element_index) +
                              " out of range for " + std::to_string(ctx.element_count()) +
                              " elements");
    std::string out;
    out += "[Question]: \n";
    out += ctx.prompt;
    out += "\n\n[Key Element]: ";
    out += ctx.key_elements[static_cast<size_t>(element_index)];
    out += "\n[Student Answer]: ";
    out += answer.text;
    out += "\nDecide whether the student answer covers the key element above. Answer \"present\" "
           "when it clearly does, \"absent\" when it clearly does not, and \"unsure\" when a "
           "grader could defensibly rule either way. Reply in JSON format:{ \"decision\": "
           "\"present\" | \"absent\" | \"unsure\", \"evidence\": \"short quote from the student "
           "answer, or empty\" }";
    return out;
}

}  // namespace dars::prompts
