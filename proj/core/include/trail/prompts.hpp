#pragma once

#include <map>
#include <string>
#include <string_view>

namespace trail::prompts {

// Templates are versioned text files under core/prompts/, embedded at build
// time. Each declares its expected reply grammar in its final lines.
std::string_view topic_extraction();
std::string_view seed_selection();
std::string_view next_edge_selection();
std::string_view candidate_generation();
std::string_view stringent_judging();
std::string_view reevaluation();
std::string_view aggregation();
std::string_view answer_synthesis();

// Replaces every {{key}} with vars.at(key); unknown placeholders are left
// verbatim so a missing binding is visible in the prompt.
std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars);

} // namespace trail::prompts
