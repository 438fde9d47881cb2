#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dars/llm_gateway.hpp"
#include "dars/thought_tree.hpp"

namespace dars {

/// Judge that asks a chat endpoint whether each element is covered and parses
/// a JSON decision of present/absent/unsure.
ElementJudge make_llm_judge(std::shared_ptr<ChatGateway> gateway, GenerationProfile profile);

/// Judge driven by a fixed table: answer_id to one entry per element, each
/// "0" (absent), "1" (present), or "01" (either).
ElementJudge make_table_judge(std::map<std::string, std::vector<std::string>> table);

/// Table judge from a JSON file of the same shape.
ElementJudge load_table_judge(const std::string& path);

}  // namespace dars
