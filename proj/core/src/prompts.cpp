#include "trail/prompts.hpp"

namespace trail::prompts {

namespace {
#include "prompt_data.inc"
} // namespace

std::string_view topic_extraction() { return k_topic_extraction; }
std::string_view seed_selection() { return k_seed_selection; }
std::string_view next_edge_selection() { return k_next_edge_selection; }
std::string_view candidate_generation() { return k_candidate_generation; }
std::string_view stringent_judging() { return k_stringent_judging; }
std::string_view reevaluation() { return k_reevaluation; }
std::string_view aggregation() { return k_aggregation; }
std::string_view answer_synthesis() { return k_answer_synthesis; }

std::string render(std::string_view tpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        const std::size_t open = tpl.find("{{", pos);
        if (open == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        const std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string_view::npos) {
            out.append(tpl.substr(pos));
            break;
        }
        out.append(tpl.substr(pos, open - pos));
        const std::string key(tpl.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it != vars.end()) {
            out.append(it->second);
        } else {
            out.append(tpl.substr(open, close + 2 - open));
        }
        pos = close + 2;
    }
    return out;
}

} // namespace trail::prompts
