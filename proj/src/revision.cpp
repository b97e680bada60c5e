#include "sosecure/revision.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <thread>

namespace sosecure::revision {

namespace {

constexpr std::string_view kBaseInstruction =
    "Review the code for security flaws. If issues are found, fix them while keeping original "
    "functionality.";

constexpr std::string_view kEntrySeparator = "\n---\n";

std::string render_entry(const kb::KbEntry& entry) {
    std::string out = entry.body_clean;
    out += "\n\nComments:\n";
    for (const auto& comment : entry.comments) {
        out += "- ";
        out += comment;
        out += '\n';
    }
    return out;
}

std::string render_context_suffix(const PromptVariant& variant, std::size_t entry_count) {
    switch (variant.kind) {
        case VariantKind::base:
            return "";
        case VariantKind::cwe:
            return "\nCWE: " + variant.cwe_id + "\n";
        case VariantKind::cwe_plus:
            return "\nCWE: " + variant.cwe_id + "\nDescription: " + variant.cwe_description + "\n";
        case VariantKind::sosecure: {
            std::string out = "\nRetrieved related SO context:\n";
            for (std::size_t i = 0; i < entry_count; ++i) {
                if (i > 0) out += kEntrySeparator;
                out += render_entry(variant.context[i]);
            }
            return out;
        }
    }
    return "";
}

}  // namespace

std::string to_string(VariantKind kind) {
    switch (kind) {
        case VariantKind::base: return "base";
        case VariantKind::cwe: return "cwe";
        case VariantKind::cwe_plus: return "cweplus";
        case VariantKind::sosecure: return "sosecure";
    }
    return "base";
}

VariantKind variant_from_string(std::string_view name) {
    if (name == "base") return VariantKind::base;
    if (name == "cwe") return VariantKind::cwe;
    if (name == "cweplus" || name == "cwe_plus" || name == "cwe+") return VariantKind::cwe_plus;
    if (name == "sosecure") return VariantKind::sosecure;
    throw std::invalid_argument("unknown prompt variant: " + std::string(name));
}

PromptVariant PromptVariant::base() {
    return {};
}

PromptVariant PromptVariant::with_cwe(std::string cwe_id) {
    PromptVariant v;
    v.kind = VariantKind::cwe;
    v.cwe_id = std::move(cwe_id);
    return v;
}

PromptVariant PromptVariant::with_cwe_description(std::string cwe_id, std::string description) {
    PromptVariant v;
    v.kind = VariantKind::cwe_plus;
    v.cwe_id = std::move(cwe_id);
    v.cwe_description = std::move(description);
    return v;
}

PromptVariant PromptVariant::with_context(std::vector<kb::KbEntry> context) {
    PromptVariant v;
    v.kind = VariantKind::sosecure;
    v.context = std::move(context);
    return v;
}

void LlmConfig::validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0))
        throw std::invalid_argument("llm: temperature must be in [0,2]");
    if (retry_budget < 0) throw std::invalid_argument("llm: retry budget must be >= 0");
    if (parallel < 1) throw std::invalid_argument("llm: parallel limit must be >= 1");
}

RenderedPrompt render_prompt(std::string_view code, const PromptVariant& variant,
                             int max_context_tokens, const text::TokenEstimator& estimator) {
    if (code.empty()) throw std::invalid_argument("render_prompt: code must not be empty");
    if (variant.kind == VariantKind::sosecure && variant.context.empty())
        throw std::invalid_argument("render_prompt: sosecure variant requires retrieved context");

    RenderedPrompt prompt;
    std::size_t entries = variant.context.size();
    prompt.context_suffix = render_context_suffix(variant, entries);
    if (variant.kind == VariantKind::sosecure && max_context_tokens > 0) {
        while (entries > 1 &&
               estimator(prompt.context_suffix) > static_cast<std::size_t>(max_context_tokens)) {
            --entries;
            prompt.truncated = true;
            prompt.context_suffix = render_context_suffix(variant, entries);
        }
    }

    prompt.full = std::string(kBaseInstruction);
    prompt.full += "\n\n";
    prompt.full += llm::fence_code(code);
    prompt.full += '\n';
    prompt.full += prompt.context_suffix;
    return prompt;
}

std::string normalize_trailing_whitespace(std::string_view code) {
    std::string out;
    out.reserve(code.size());
    std::size_t pos = 0;
    while (pos <= code.size()) {
        const auto eol = std::min(code.find('\n', pos), code.size());
        std::string_view line = code.substr(pos, eol - pos);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.remove_suffix(1);
        out += line;
        if (eol >= code.size()) break;
        out += '\n';
        pos = eol + 1;
    }
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

RevisionResult revise(std::string_view code, const PromptVariant& variant, const LlmConfig& cfg,
                      llm::ChatClient& client, const text::TokenEstimator& estimator) {
    cfg.validate();
    const auto prompt = render_prompt(code, variant, cfg.max_context_tokens, estimator);

    llm::ChatRequest request;
    request.model = cfg.model;
    request.temperature = cfg.temperature;
    request.max_tokens = cfg.max_tokens;
    request.messages = {{"user", prompt.full}};

    llm::ChatReply reply;
    int attempt = 0;
    while (true) {
        try {
            reply = client.complete(request);
            break;
        } catch (const llm::TransportError& e) {
            if (attempt >= cfg.retry_budget)
                throw RevisionError("revision failed after " + std::to_string(attempt + 1) +
                                    " attempts: " + e.what());
            const auto delay = std::chrono::milliseconds(cfg.backoff_ms) * (1 << attempt);
            std::this_thread::sleep_for(delay);
            ++attempt;
        }
    }

    RevisionResult result;
    result.original_code = std::string(code);
    result.variant = variant.kind;
    for (const auto& entry : variant.context) result.retrieved_context_ids.push_back(entry.answer_id);
    result.prompt_tokens_estimate = estimator(prompt.full);
    result.context_tokens_estimate = estimator(prompt.context_suffix);
    result.truncated_context = prompt.truncated;

    const auto trimmed_reply = normalize_trailing_whitespace(reply.content);
    if (trimmed_reply.empty()) {
        result.revised_code = result.original_code;
        result.warning = true;
        result.warning_reason = "empty reply";
    } else if (auto block = llm::extract_first_fenced_block(reply.content)) {
        result.revised_code = std::move(*block);
    } else {
        result.revised_code = result.original_code;
        result.warning = true;
        result.warning_reason = "reply carried no code fence";
    }

    const std::string norm_original = normalize_trailing_whitespace(result.original_code);
    const std::string norm_revised = normalize_trailing_whitespace(result.revised_code);
    result.changed = norm_original != norm_revised;
    result.similarity = result.changed ? text::similarity_ratio(norm_original, norm_revised) : 1.0;
    return result;
}

std::vector<RevisionResult> revise_many(const std::vector<std::pair<std::string, PromptVariant>>& items,
                                        const LlmConfig& cfg, llm::ChatClient& client,
                                        const text::TokenEstimator& estimator) {
    cfg.validate();
    std::vector<RevisionResult> results(items.size());
    std::vector<std::exception_ptr> errors(items.size());
    std::size_t next = 0;
    std::mutex mu;

    auto worker = [&] {
        while (true) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= items.size()) return;
                i = next++;
            }
            try {
                results[i] = revise(items[i].first, items[i].second, cfg, client, estimator);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const std::size_t n_threads = std::min<std::size_t>(cfg.parallel, std::max<std::size_t>(items.size(), 1));
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return results;
}

}  // namespace sosecure::revision
