#pragma once

#include <map>
#include <string>
#include <vector>

namespace mpr {

// Slot names used across the prompt bodies.
inline constexpr const char* kSlotQuestion = "Question";
inline constexpr const char* kSlotReferences = "Retrieved References";
inline constexpr const char* kSlotPreviousThought = "Previous Thought";
inline constexpr const char* kSlotCurrentStep = "Current Step";
inline constexpr const char* kSlotMaxSteps = "Max Steps";
inline constexpr const char* kSlotCurrentState = "Current State";
inline constexpr const char* kSlotCurrentSubquestion = "Current Sub-question";
inline constexpr const char* kSlotMaxSubquestion = "Max Sub-question";
inline constexpr const char* kSlotCandidates = "Candidate Thoughts";

struct PromptTemplate {
    std::string id;
    std::string body;
    std::vector<std::string> slots;  // placeholders the body requires
    bool fixture = true;             // false for workbench-own templates
};

// All reasoning-structure prompt templates, keyed by id:
//   nr_{explicit,implicit}
//   sr_{start,think,answer}_{explicit,implicit}
//   mr_{start,think,answer}_{explicit,implicit}
//   dr_{divide,solve,merge}_{explicit,implicit}
// plus mr_select (candidate picking, not a fixture template).
const std::vector<PromptTemplate>& prompt_templates();
const PromptTemplate& prompt_template(const std::string& id);

using SlotMap = std::map<std::string, std::string>;

// Substitutes every [Slot] placeholder; throws MissingSlot when a required
// slot is absent from the map.
std::string render_prompt(const std::string& template_id, const SlotMap& slots);

// "Step 1: ...\nStep 2: ..." — the joining format for prior thoughts.
std::string format_thoughts(const std::vector<std::string>& thoughts);

// Retrieved reference texts joined by newlines.
std::string format_references(const std::vector<std::string>& texts);

}  // namespace mpr
