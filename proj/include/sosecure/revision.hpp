#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sosecure/kb.hpp"
#include "sosecure/llm_client.hpp"
#include "sosecure/text_metrics.hpp"

namespace sosecure::revision {

enum class VariantKind { base, cwe, cwe_plus, sosecure };

std::string to_string(VariantKind kind);
VariantKind variant_from_string(std::string_view name);  // throws std::invalid_argument

struct PromptVariant {
    VariantKind kind = VariantKind::base;
    std::string cwe_id;                // cwe / cwe_plus
    std::string cwe_description;       // cwe_plus
    std::vector<kb::KbEntry> context;  // sosecure, in retrieval-rank order

    static PromptVariant base();
    static PromptVariant with_cwe(std::string cwe_id);
    static PromptVariant with_cwe_description(std::string cwe_id, std::string description);
    static PromptVariant with_context(std::vector<kb::KbEntry> context);
};

struct LlmConfig {
    std::string base_url;
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    int max_tokens = 0;
    int timeout_seconds = 60;
    int retry_budget = 3;  // attempts on transport errors
    int backoff_ms = 250;  // doubles per retry
    int parallel = 4;      // in-flight request limit for batches
    int max_context_tokens = 0;  // 0 = no truncation

    void validate() const;  // throws std::invalid_argument
};

class RevisionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RenderedPrompt {
    std::string full;
    std::string context_suffix;  // variant-specific tail, "" for base
    bool truncated = false;      // context entries dropped to fit the budget
};

/// Instruction + fenced code + variant-specific context. Throws
/// std::invalid_argument for empty code or a sosecure variant without
/// context. max_context_tokens > 0 drops whole context entries from the tail
/// until the suffix fits, using the given estimator.
RenderedPrompt render_prompt(std::string_view code, const PromptVariant& variant,
                             int max_context_tokens = 0,
                             const text::TokenEstimator& estimator = text::estimate_tokens);

struct RevisionResult {
    std::string original_code;
    VariantKind variant = VariantKind::base;
    std::vector<std::int64_t> retrieved_context_ids;
    std::string revised_code;
    bool changed = false;
    double similarity = 1.0;
    std::size_t prompt_tokens_estimate = 0;
    std::size_t context_tokens_estimate = 0;
    bool warning = false;  // reply was empty or carried no code fence
    std::string warning_reason;
    bool truncated_context = false;
};

/// One review round trip: render, complete (retrying transport errors with
/// exponential backoff), extract the first fenced block of the reply. A reply
/// with no fence or no text counts as "no change requested". Comparison and
/// similarity ignore trailing whitespace.
RevisionResult revise(std::string_view code, const PromptVariant& variant, const LlmConfig& cfg,
                      llm::ChatClient& client,
                      const text::TokenEstimator& estimator = text::estimate_tokens);

/// Batch form; at most cfg.parallel requests in flight, results in submission
/// order.
std::vector<RevisionResult> revise_many(const std::vector<std::pair<std::string, PromptVariant>>& items,
                                        const LlmConfig& cfg, llm::ChatClient& client,
                                        const text::TokenEstimator& estimator = text::estimate_tokens);

/// Trailing whitespace stripped per line; trailing newlines dropped.
std::string normalize_trailing_whitespace(std::string_view code);

}  // namespace sosecure::revision
