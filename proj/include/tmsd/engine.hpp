#pragma once

#include <cstdint>
#include <vector>

#include "tmsd/lm.hpp"
#include "tmsd/token_map.hpp"
#include "tmsd/trace.hpp"

namespace tmsd {

struct EngineConfig {
    std::uint32_t max_candidates_per_step = 3;
    std::uint32_t max_draft_len = 64;
    std::uint32_t max_output_len = 448;
    /// AR tokens emitted after a lookup miss before the map is consulted again.
    std::uint32_t fallback_ar_steps = 1;

    void validate() const;
};

/**
 * Speculative decoding with token-map drafting.
 *
 * Each round looks up candidate continuations for the current context. If any
 * exist, every candidate is verified against the model, the one with the
 * longest accepted prefix wins (ties to the higher-ranked candidate), and the
 * accepted prefix plus the model's token at the first mismatch — or the bonus
 * token after a full acceptance — is appended. On a miss the engine falls back
 * to plain AR steps before retrying. Decoding stops at EOS or max_output_len.
 *
 * Every appended token equals the model's greedy choice at its position, so
 * the output is token-identical to autoregressive_decode over the same model.
 */
DecodeTrace speculative_decode(const MainModel& model, const TokenMap& map, const TokenSeq& prompt,
                               const EngineConfig& config = {});

/// Element-wise speculative_decode; failures carry the item index.
std::vector<DecodeTrace> batch_decode(const MainModel& model, const TokenMap& map,
                                      const std::vector<TokenSeq>& prompts,
                                      const EngineConfig& config = {});

}  // namespace tmsd
