#pragma once

#include <string_view>

namespace debateqd::embedded {

extern const std::string_view debater_template;
extern const std::string_view judge_template;
extern const std::string_view persuasion_mutator_template;
extern const std::string_view truth_mutator_template;
extern const std::string_view staticgen_template;
extern const std::string_view seed_prompts_json;

}  // namespace debateqd::embedded
