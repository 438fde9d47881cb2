#include "dars/judge.hpp"

#include "dars/errors.hpp"
#include "dars/prompts.hpp"

namespace dars {

ElementJudge make_llm_judge(std::shared_ptr<ChatGateway> gateway, GenerationProfile profile) {
    if (!gateway) throw ValidationError("judge: gateway is null");
    return [gateway, profile](const QuestionContext& ctx, const StudentAnswer& answer,
                              int element_index) {
        ChatRequest request;
        request.profile = profile;
        request.messages.push_back(
            {Role::User, prompts::render_judge_prompt(ctx, answer, element_index)});
        ChatResponse response = gateway->complete(request);

        auto object = extract_first_json_object(response.text);
        if (!object) throw ParseError("judge reply has no JSON object");
        auto it = object->find("decision");
        if (it == object->end() || !it->is_string())
            throw ParseError("judge reply has no string \"decision\" field");
        const std::string decision = it->get<std::string>();

        ElementJudgment judgment;
        judgment.element_index = element_index;
        if (decision == "present") judgment.plausible = Plausible::Present;
        else if (decision == "absent") judgment.plausible = Plausible::Absent;
        else if (decision == "unsure") judgment.plausible = Plausible::Either;
        else throw ParseError("judge decision \"" + decision + "\" is not present/absent/unsure");
        if (auto ev = object->find("evidence"); ev != object->end() && ev->is_string())
            judgment.evidence = ev->get<std::string>();
        return judgment;
    };
}

ElementJudge make_table_judge(std::map<std::string, std::vector<std::string>> table) {
    return [table = std::move(table)](const QuestionContext& ctx, const StudentAnswer& answer,
                                      int element_index) {
        auto it = table.find(answer.id);
        if (it == table.end())
            throw ValidationError("judge table has no entry for answer " + answer.id);
        if (static_cast<int>(it->second.size()) != ctx.element_count())
            throw ValidationError("judge table entry for answer " + answer.id + " has " +
                                  std::to_string(it->second.size()) + " elements, expected " +
                                  std::to_string(ctx.element_count()));
        const std::string& cell = it->second[static_cast<size_t>(element_index)];
        ElementJudgment judgment;
        judgment.element_index = element_index;
        if (cell == "0") judgment.plausible = Plausible::Absent;
        else if (cell == "1") judgment.plausible = Plausible::Present;
        else if (cell == "01") judgment.plausible = Plausible::Either;
        else
            throw ValidationError("judge table entry for answer " + answer.id + ", element " +
                                  std::to_string(element_index) + ": \"" + cell +
                                  "\" is not 0, 1, or 01");
        return judgment;
    };
}

ElementJudge load_table_judge(const std::string& path) {
    json doc = json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ParseError("malformed judge table: " + path);
    if (!doc.is_object()) throw ParseError(path + ": expected an object of answer_id entries");
    std::map<std::string, std::vector<std::string>> table;
    for (const auto& [answer_id, cells] : doc.items()) {
        if (!cells.is_array()) throw ParseError(path + ": entry " + answer_id + " is not an array");
        std::vector<std::string> row;
        for (const auto& cell : cells) row.push_back(cell.get<std::string>());
        table.emplace(answer_id, std::move(row));
    }
    return make_table_judge(std::move(table));
}

}  // namespace dars
