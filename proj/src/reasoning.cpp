#include "mpr/reasoning.hpp"

#include <nlohmann/json.hpp>

#include "mpr/errors.hpp"
#include "mpr/text.hpp"

namespace mpr {

using nlohmann::json;

std::string to_string(Structure s) {
    switch (s) {
        case Structure::NR: return "NR";
        case Structure::SR: return "SR";
        case Structure::MR: return "MR";
        case Structure::DR: return "DR";
    }
    return "NR";
}

Structure structure_from_string(const std::string& s) {
    if (s == "NR") return Structure::NR;
    if (s == "SR") return Structure::SR;
    if (s == "MR") return Structure::MR;
    if (s == "DR") return Structure::DR;
    fail("ConfigInvalid", "unknown reasoning structure '" + s + "'");
}

json StepRecord::to_json() const {
    json jslots = json::object();
    for (const auto& [k, v] : slots) jslots[k] = v;
    return {{"step_tag", step_tag},
            {"template_id", template_id},
            {"slots", jslots},
            {"retrieved_ids", retrieved_ids},
            {"retrieved_scores", retrieved_scores},
            {"model", model},
            {"prompt", prompt},
            {"response", response},
            {"parsed", parsed},
            {"latency_ms", latency_ms},
            {"tokens_in", tokens_in},
            {"tokens_out", tokens_out},
            {"flagged", flagged},
            {"flag", flag}};
}

StepRecord StepRecord::from_json(const json& j) {
    StepRecord r;
    r.step_tag = j.at("step_tag").get<std::string>();
    r.template_id = j.at("template_id").get<std::string>();
    for (auto it = j.at("slots").begin(); it != j.at("slots").end(); ++it) {
        r.slots[it.key()] = it.value().get<std::string>();
    }
    r.retrieved_ids = j.at("retrieved_ids").get<std::vector<std::string>>();
    r.retrieved_scores = j.at("retrieved_scores").get<std::vector<double>>();
    r.model = j.at("model").get<std::string>();
    r.prompt = j.at("prompt").get<std::string>();
    r.response = j.at("response").get<std::string>();
    r.parsed = j.at("parsed").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<double>();
    r.tokens_in = j.at("tokens_in").get<long>();
    r.tokens_out = j.at("tokens_out").get<long>();
    r.flagged = j.at("flagged").get<bool>();
    r.flag = j.at("flag").get<std::string>();
    return r;
}

double ReasoningTrace::total_latency_ms() const {
    double total = 0.0;
    for (const StepRecord& s : steps) total += s.latency_ms;
    return total;
}

long ReasoningTrace::total_tokens_in() const {
    long total = 0;
    for (const StepRecord& s : steps) total += s.tokens_in;
    return total;
}

long ReasoningTrace::total_tokens_out() const {
    long total = 0;
    for (const StepRecord& s : steps) total += s.tokens_out;
    return total;
}

json ReasoningTrace::to_json() const {
    json jsteps = json::array();
    for (const StepRecord& s : steps) jsteps.push_back(s.to_json());
    return {{"task_id", task_id},
            {"structure", structure},
            {"steps", jsteps},
            {"final_answer", final_answer}};
}

ReasoningTrace ReasoningTrace::from_json(const json& j) {
    ReasoningTrace t;
    t.task_id = j.at("task_id").get<std::string>();
    t.structure = j.at("structure").get<std::string>();
    for (const auto& js : j.at("steps")) t.steps.push_back(StepRecord::from_json(js));
    t.final_answer = j.at("final_answer").get<std::string>();
    return t;
}

std::string extract_answer_line(const std::string& response) {
    std::string last;
    for (const std::string& raw : split_lines(response)) {
        std::string line = trim(raw);
        if (line.empty() || starts_with(line, "```")) continue;
        last = line;
    }
    return last;
}

namespace {

struct CallContext {
    Provider& provider;
    const ReasoningConfig& config;
    const AdapterRouter& router;
    const std::string& task_id;
    ReasoningTrace& trace;
};

std::vector<std::string> retrieved_texts(const std::vector<RetrievedStatement>& retrieved) {
    std::vector<std::string> texts;
    texts.reserve(retrieved.size());
    for (const auto& r : retrieved) texts.push_back(r.text);
    return texts;
}

// One provider call; the step record lands on the trace. The returned
// reference is only valid until the next issue() on the same trace.
StepRecord& issue(CallContext& ctx, const std::string& template_id, const SlotMap& slots,
                  const std::vector<RetrievedStatement>& retrieved, const std::string& step_tag) {
    StepRecord rec;
    rec.step_tag = step_tag;
    rec.template_id = template_id;
    rec.slots = slots;
    for (const auto& r : retrieved) {
        rec.retrieved_ids.push_back(r.id);
        rec.retrieved_scores.push_back(r.score);
    }
    rec.prompt = render_prompt(template_id, slots);
    rec.model = ctx.router ? ctx.router(retrieved) : ctx.config.model;

    CompletionRequest req;
    req.model = rec.model;
    req.messages = {{"user", rec.prompt}};
    req.temperature = ctx.config.temperature;
    req.max_tokens = ctx.config.max_tokens;
    req.task_id = ctx.task_id;
    req.step_tag = step_tag;
    CompletionResult result = ctx.provider.complete(req);

    rec.response = result.text;
    rec.latency_ms = result.latency_ms;
    rec.tokens_in = result.usage.prompt_tokens;
    rec.tokens_out = result.usage.completion_tokens;
    ctx.trace.steps.push_back(std::move(rec));
    return ctx.trace.steps.back();
}

// Thoughts so far, then the question, newline-joined: the step-wise
// retrieval query o_1 || ... || o_{i-1} || q.
std::string stepwise_query(const std::vector<std::string>& thoughts, const std::string& question) {
    std::string query;
    for (const std::string& t : thoughts) {
        query += t;
        query += '\n';
    }
    query += question;
    return query;
}

std::string take_thought(StepRecord& rec) {
    std::string thought = extract_answer_line(rec.response);
    if (thought.empty()) {
        thought = "(no thought)";
        rec.flagged = true;
        rec.flag = "EmptyThought";
    }
    rec.parsed = thought;
    return thought;
}

int parse_candidate_pick(const std::string& response, int branches) {
    std::size_t i = 0;
    while (i < response.size() && !std::isdigit(static_cast<unsigned char>(response[i]))) ++i;
    if (i == response.size()) return -1;
    int value = 0;
    while (i < response.size() && std::isdigit(static_cast<unsigned char>(response[i]))) {
        value = value * 10 + (response[i] - '0');
        if (value > branches) return -1;
        ++i;
    }
    return (value >= 1 && value <= branches) ? value : -1;
}

}  // namespace

RunResult run_naive(const std::string& question, const MemoryView& memory, Provider& provider,
                    const ReasoningConfig& config, const AdapterRouter& router,
                    const std::string& task_id) {
    RunResult out;
    out.trace.task_id = task_id;
    out.trace.structure = "NR";
    CallContext ctx{provider, config, router, task_id, out.trace};

    auto retrieved = memory.retrieve(question);
    SlotMap slots{{kSlotQuestion, question}};
    std::string tid = "nr_implicit";
    if (!retrieved.empty()) {
        tid = "nr_explicit";
        slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
    }
    StepRecord& rec = issue(ctx, tid, slots, retrieved, "answer");
    rec.parsed = extract_answer_line(rec.response);
    out.answer = rec.parsed;
    out.trace.final_answer = out.answer;
    return out;
}

RunResult run_sequential(const std::string& question, const MemoryView& memory, Provider& provider,
                         const ReasoningConfig& config, const AdapterRouter& router,
                         const std::string& task_id) {
    if (config.max_steps < 1) fail("ConfigInvalid", "sequential reasoning needs max_steps >= 1");
    RunResult out;
    out.trace.task_id = task_id;
    out.trace.structure = "SR";
    CallContext ctx{provider, config, router, task_id, out.trace};
    const int l = config.max_steps;

    std::vector<std::string> thoughts;
    for (int step = 1; step <= l - 1; ++step) {
        auto retrieved = memory.retrieve(stepwise_query(thoughts, question));
        bool implicit = retrieved.empty();
        SlotMap slots{{kSlotQuestion, question}, {kSlotMaxSteps, std::to_string(l)}};
        if (!implicit) slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
        std::string tid;
        if (step == 1) {
            tid = implicit ? "sr_start_implicit" : "sr_start_explicit";
        } else {
            tid = implicit ? "sr_think_implicit" : "sr_think_explicit";
            slots[kSlotCurrentStep] = std::to_string(step);
            slots[kSlotPreviousThought] = format_thoughts(thoughts);
        }
        StepRecord& rec = issue(ctx, tid, slots, retrieved, "think-" + std::to_string(step));
        thoughts.push_back(take_thought(rec));
    }

    auto retrieved = memory.retrieve(stepwise_query(thoughts, question));
    bool implicit = retrieved.empty();
    SlotMap slots{{kSlotQuestion, question}, {kSlotPreviousThought, format_thoughts(thoughts)}};
    if (!implicit) slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
    StepRecord& rec =
        issue(ctx, implicit ? "sr_answer_implicit" : "sr_answer_explicit", slots, retrieved, "answer");
    rec.parsed = extract_answer_line(rec.response);
    out.answer = rec.parsed;
    out.trace.final_answer = out.answer;
    return out;
}

RunResult run_multipath(const std::string& question, const MemoryView& memory, Provider& provider,
                        const ReasoningConfig& config, const AdapterRouter& router,
                        const std::string& task_id) {
    if (config.max_steps < 1) fail("ConfigInvalid", "multi-path reasoning needs max_steps >= 1");
    if (config.branches < 2) fail("ConfigInvalid", "multi-path reasoning needs branches >= 2");
    RunResult out;
    out.trace.task_id = task_id;
    out.trace.structure = "MR";
    CallContext ctx{provider, config, router, task_id, out.trace};
    const int l = config.max_steps;
    const int b = config.branches;

    std::vector<std::string> thoughts;
    for (int step = 1; step <= l - 1; ++step) {
        // one retrieval shared by all branch candidates of this step
        auto retrieved = memory.retrieve(stepwise_query(thoughts, question));
        bool implicit = retrieved.empty();
        SlotMap slots{{kSlotQuestion, question}};
        if (!implicit) slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
        std::string tid;
        if (step == 1) {
            tid = implicit ? "mr_start_implicit" : "mr_start_explicit";
        } else {
            tid = implicit ? "mr_think_implicit" : "mr_think_explicit";
            slots[kSlotPreviousThought] = format_thoughts(thoughts);
        }
        std::vector<std::string> candidates;
        for (int branch = 1; branch <= b; ++branch) {
            StepRecord& rec = issue(ctx, tid, slots, retrieved,
                                    "think-" + std::to_string(step) + "-b" + std::to_string(branch));
            candidates.push_back(take_thought(rec));
        }
        std::vector<std::string> numbered;
        for (int i = 0; i < b; ++i) {
            numbered.push_back(std::to_string(i + 1) + ". " + candidates[static_cast<std::size_t>(i)]);
        }
        SlotMap select_slots{{kSlotQuestion, question},
                             {kSlotPreviousThought, format_thoughts(thoughts)},
                             {kSlotCandidates, join(numbered, "\n")}};
        StepRecord& sel = issue(ctx, "mr_select", select_slots, retrieved,
                                "select-" + std::to_string(step));
        int pick = parse_candidate_pick(extract_answer_line(sel.response), b);
        if (pick < 1) {
            pick = 1;
            sel.flagged = true;
            sel.flag = "SelectionUnparseable";
        }
        sel.parsed = std::to_string(pick);
        thoughts.push_back(candidates[static_cast<std::size_t>(pick - 1)]);
    }

    auto retrieved = memory.retrieve(stepwise_query(thoughts, question));
    bool implicit = retrieved.empty();
    SlotMap slots{{kSlotQuestion, question},
                  {kSlotPreviousThought, format_thoughts(thoughts)},
                  // the implicit answering template also carries this slot
                  {kSlotReferences, format_references(retrieved_texts(retrieved))}};
    StepRecord& rec =
        issue(ctx, implicit ? "mr_answer_implicit" : "mr_answer_explicit", slots, retrieved, "answer");
    rec.parsed = extract_answer_line(rec.response);
    out.answer = rec.parsed;
    out.trace.final_answer = out.answer;
    return out;
}

RunResult run_decomposition(const std::string& question, const MemoryView& memory,
                            Provider& provider, const ReasoningConfig& config,
                            const AdapterRouter& router, const std::string& task_id) {
    if (config.max_subquestions < 1) {
        fail("ConfigInvalid", "decomposition reasoning needs max_subquestions >= 1");
    }
    RunResult out;
    out.trace.task_id = task_id;
    out.trace.structure = "DR";
    CallContext ctx{provider, config, router, task_id, out.trace};

    bool implicit_memory = memory.kind() == "ignoramus";
    SlotMap divide_slots{{kSlotQuestion, question},
                         {kSlotMaxSubquestion, std::to_string(config.max_subquestions)}};
    StepRecord& divide = issue(ctx, implicit_memory ? "dr_divide_implicit" : "dr_divide_explicit",
                               divide_slots, {}, "divide");
    std::vector<std::string> subquestions;
    for (const std::string& raw : split_lines(divide.response)) {
        std::string line = trim(raw);
        if (line.empty() || starts_with(line, "```")) continue;
        subquestions.push_back(line);
        if (static_cast<int>(subquestions.size()) == config.max_subquestions) break;
    }
    divide.parsed = join(subquestions, " | ");

    if (subquestions.empty()) {
        divide.flagged = true;
        divide.flag = "NoSubquestions";
        RunResult naive = run_naive(question, memory, provider, config, router, task_id);
        for (StepRecord& s : naive.trace.steps) out.trace.steps.push_back(std::move(s));
        out.answer = naive.answer;
        out.trace.final_answer = out.answer;
        return out;
    }

    std::vector<std::string> numbered;
    for (std::size_t i = 0; i < subquestions.size(); ++i) {
        numbered.push_back(std::to_string(i + 1) + ". " + subquestions[i]);
    }
    std::string sub_state = join(numbered, "\n");

    std::vector<std::string> answers;
    for (std::size_t i = 0; i < subquestions.size(); ++i) {
        auto retrieved = memory.retrieve(subquestions[i]);
        bool implicit = retrieved.empty();
        SlotMap slots{{kSlotQuestion, question},
                      {kSlotCurrentState, sub_state},
                      {kSlotCurrentSubquestion, subquestions[i]}};
        if (!implicit) slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
        StepRecord& rec = issue(ctx, implicit ? "dr_solve_implicit" : "dr_solve_explicit", slots,
                                retrieved, "solve-" + std::to_string(i + 1));
        rec.parsed = extract_answer_line(rec.response);
        answers.push_back(rec.parsed);
    }

    std::vector<std::string> solved;
    for (std::size_t i = 0; i < subquestions.size(); ++i) {
        solved.push_back(std::to_string(i + 1) + ". " + subquestions[i] + " Answer: " + answers[i]);
    }
    auto retrieved = memory.retrieve(question);
    bool implicit = retrieved.empty();
    SlotMap slots{{kSlotQuestion, question}, {kSlotCurrentState, join(solved, "\n")}};
    if (!implicit) slots[kSlotReferences] = format_references(retrieved_texts(retrieved));
    StepRecord& rec =
        issue(ctx, implicit ? "dr_merge_implicit" : "dr_merge_explicit", slots, retrieved, "merge");
    rec.parsed = extract_answer_line(rec.response);
    out.answer = rec.parsed;
    out.trace.final_answer = out.answer;
    return out;
}

RunResult run_structure(const std::string& question, const MemoryView& memory, Provider& provider,
                        const ReasoningConfig& config, const AdapterRouter& router,
                        const std::string& task_id) {
    switch (config.structure) {
        case Structure::NR: return run_naive(question, memory, provider, config, router, task_id);
        case Structure::SR: return run_sequential(question, memory, provider, config, router, task_id);
        case Structure::MR: return run_multipath(question, memory, provider, config, router, task_id);
        case Structure::DR: return run_decomposition(question, memory, provider, config, router, task_id);
    }
    fail("ConfigInvalid", "unhandled reasoning structure");
}

}  // namespace mpr
