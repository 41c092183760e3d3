#include "mpr/prompts.hpp"

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

namespace {

// Shared requirement blocks.
constexpr const char* kAnswerRequirements =
    "Requirements:\n"
    "1. your answer should be as concise as possible, commonly in a few words.\n"
    "2. if the answer is a date, please output it in YYYY-MM-DD format.\n"
    "3. if the answer is a number, please do not include commas. If the numerical answer has "
    "units, please indicate them in parentheses, such as 5 (USD).\n"
    "You should only output the answer in one line (no code block), without any other "
    "descriptions.";

constexpr const char* kThoughtRequirements =
    "Requirements:\n"
    "1. Your thoughts should be concise but informative sentences.\n"
    "2. You should only output the thoughts in one line (no code block).";

std::vector<PromptTemplate> make_templates() {
    std::vector<PromptTemplate> t;

    t.push_back({"nr_explicit",
                 std::string("Please help me answer the following question based on the given "
                             "information.\n"
                             "Information: [Retrieved References]\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotReferences, kSlotQuestion},
                 true});

    t.push_back({"nr_implicit",
                 std::string("Please help me answer the following question.\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotQuestion},
                 true});

    t.push_back({"sr_start_explicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "The current step is 1, and you should provide the final answer at "
                             "step [Max Steps].\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to the given information.\n"
                             "Information: [Retrieved References]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotMaxSteps, kSlotReferences, kSlotQuestion},
                 true});

    t.push_back({"sr_think_explicit",
                 std::string("To better answer the following questions, let's think step by step.\n"
                             "The current step is [Current Step], and you should provide the "
                             "final answer at step [Max Steps].\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to the given information and your previous thought.\n"
                             "Information: [Retrieved References]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotCurrentStep, kSlotMaxSteps, kSlotReferences, kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"sr_answer_explicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please help me generate the answer to the question based on the "
                             "given information and your previous thoughts.\n"
                             "Information: [Retrieved References]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotReferences, kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"sr_start_implicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "The current step is 1, and you should provide the final answer at "
                             "step [Max Steps].\n"
                             "Please generate your thoughts for the current step.\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotMaxSteps, kSlotQuestion},
                 true});

    t.push_back({"sr_think_implicit",
                 std::string("To better answer the following questions, let's think step by step.\n"
                             "The current step is [Current Step], and you should provide the "
                             "final answer at step [Max Steps].\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to your previous thought.\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotCurrentStep, kSlotMaxSteps, kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"sr_answer_implicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please help me generate the answer to the question based on your "
                             "previous thoughts.\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"mr_start_explicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to the given information.\n"
                             "Information: [Retrieved References]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotReferences, kSlotQuestion},
                 true});

    t.push_back({"mr_think_explicit",
                 std::string("To better answer the following questions, let's think step by step.\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to the given information and your previous thoughts.\n"
                             "Information: [Retrieved References]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotReferences, kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"mr_answer_explicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please help me generate the answer to the question based on the "
                             "given information and your previous thoughts.\n"
                             "Information: [Retrieved References]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotReferences, kSlotPreviousThought, kSlotQuestion},
                 true});

    t.push_back({"mr_start_implicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please generate your thoughts for the current step.\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotQuestion},
                 true});

    t.push_back({"mr_think_implicit",
                 std::string("To better answer the following questions, let's think step by step.\n"
                             "Please generate your thoughts for the current step, and you may "
                             "refer to your previous thoughts.\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kThoughtRequirements,
                 {kSlotPreviousThought, kSlotQuestion},
                 true});

    // Unlike the other implicit variants this one carries an Information
    // slot; callers fill it with the (possibly empty) retrieval join.
    t.push_back({"mr_answer_implicit",
                 std::string("To better answer the following question, let's think step by step.\n"
                             "Please help me generate the answer to the question based on your "
                             "previous thoughts.\n"
                             "Information: [Retrieved References]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Question: [Question]\n") +
                     kAnswerRequirements,
                 {kSlotReferences, kSlotPreviousThought, kSlotQuestion},
                 true});

    const std::string divide_body =
        std::string("To better answer the following question, please break it down into several "
                    "sub-questions.\n"
                    "Question: [Question]\n"
                    "Requirements:\n"
                    "1. The sub-questions should be concise.\n"
                    "2. Each sub-questions is on a separate line, without any other descriptions.\n"
                    "3. You can decompose the problem into 1 to [Max Sub-question] sub-questions, "
                    "and any content beyond 5 lines will be ignored.");
    t.push_back({"dr_divide_explicit", divide_body, {kSlotQuestion, kSlotMaxSubquestion}, true});
    t.push_back({"dr_divide_implicit", divide_body, {kSlotQuestion, kSlotMaxSubquestion}, true});

    t.push_back({"dr_solve_explicit",
                 std::string("In order to better answer the following question, we have decomposed "
                             "them into several sub-questions.\n"
                             "Please help me generate the answer to the current sub-question based "
                             "on the given information.\n"
                             "Question: [Question]\n"
                             "Sub-questions: [Current State]\n"
                             "Current Sub-question: [Current Sub-question]\n"
                             "Information: [Retrieved References]\n"
                             "Requirements:\n"
                             "1. The answer should be concise but informative.\n"
                             "2. You should only output the answer in one line (no code block), "
                             "without any other descriptions."),
                 {kSlotQuestion, kSlotCurrentState, kSlotCurrentSubquestion, kSlotReferences},
                 true});

    t.push_back({"dr_merge_explicit",
                 std::string("In order to better answer the following question, we have decomposed "
                             "them into several sub-questions and answered them separately.\n"
                             "Please help me generate the final answer to the question based on "
                             "the sub-questions and the given information.\n"
                             "Question: [Question]\n"
                             "Sub-questions and Answers: [Current State]\n"
                             "Information: [Retrieved References]\n") +
                     kAnswerRequirements,
                 {kSlotQuestion, kSlotCurrentState, kSlotReferences},
                 true});

    t.push_back({"dr_solve_implicit",
                 std::string("In order to better answer the following question, we have decomposed "
                             "them into several sub-questions.\n"
                             "Please help me generate the answer to the current sub-question.\n"
                             "Question: [Question]\n"
                             "Sub-questions: [Current State]\n"
                             "Current Sub-question: [Current Sub-question]\n"
                             "Requirements:\n"
                             "1. The answer should be concise but informative.\n"
                             "2. You should only output the answer in one line (no code block), "
                             "without any other descriptions."),
                 {kSlotQuestion, kSlotCurrentState, kSlotCurrentSubquestion},
                 true});

    t.push_back({"dr_merge_implicit",
                 std::string("In order to better answer the following question, we have decomposed "
                             "them into several sub-questions and answered them separately.\n"
                             "Please help me generate the final answer to the question based on "
                             "the sub-questions.\n"
                             "Question: [Question]\n"
                             "Sub-questions and Answers: [Current State]\n") +
                     kAnswerRequirements,
                 {kSlotQuestion, kSlotCurrentState},
                 true});

    // Workbench-own chain selection prompt for multi-path reasoning.
    t.push_back({"mr_select",
                 std::string("We are reasoning step by step to answer a question.\n"
                             "Question: [Question]\n"
                             "Previous Thoughts: [Previous Thought]\n"
                             "Candidate next thoughts:\n"
                             "[Candidate Thoughts]\n"
                             "Which candidate is the most promising continuation? Reply with its "
                             "number only, in one line."),
                 {kSlotQuestion, kSlotPreviousThought, kSlotCandidates},
                 false});

    return t;
}

}  // namespace

const std::vector<PromptTemplate>& prompt_templates() {
    static const std::vector<PromptTemplate> templates = make_templates();
    return templates;
}

const PromptTemplate& prompt_template(const std::string& id) {
    for (const PromptTemplate& t : prompt_templates()) {
        if (t.id == id) return t;
    }
    fail("ConfigInvalid", "unknown prompt template '" + id + "'");
}

std::string render_prompt(const std::string& template_id, const SlotMap& slots) {
    const PromptTemplate& t = prompt_template(template_id);
    std::string out = t.body;
    for (const std::string& slot : t.slots) {
        auto it = slots.find(slot);
        if (it == slots.end()) {
            fail("MissingSlot", "template '" + template_id + "' requires slot '" + slot + "'");
        }
        const std::string placeholder = "[" + slot + "]";
        std::size_t pos = 0;
        while ((pos = out.find(placeholder, pos)) != std::string::npos) {
            out.replace(pos, placeholder.size(), it->second);
            pos += it->second.size();
        }
    }
    return out;
}

std::string format_thoughts(const std::vector<std::string>& thoughts) {
    std::vector<std::string> lines;
    lines.reserve(thoughts.size());
    for (std::size_t i = 0; i < thoughts.size(); ++i) {
        lines.push_back("Step " + std::to_string(i + 1) + ": " + thoughts[i]);
    }
    return join(lines, "\n");
}

std::string format_references(const std::vector<std::string>& texts) {
    return join(texts, "\n");
}

}  // namespace mpr
