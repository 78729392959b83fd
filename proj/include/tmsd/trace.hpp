#pragma once

#include <cstdint>
#include <vector>

#include "tmsd/vocab.hpp"

namespace tmsd {

enum class StepKind { kDraft, kAr };

/**
 * One verification event. A draft step covers every candidate verified at
 * that position: `proposed` sums their lengths and batch_size is proposed+1,
 * while `accepted` / `winner_proposed` describe the winning candidate only.
 * An AR step is a single-token forward pass (batch 1).
 */
struct StepRecord {
    StepKind kind = StepKind::kAr;
    std::uint32_t proposed = 0;
    std::uint32_t winner_proposed = 0;
    std::uint32_t accepted = 0;
    std::uint32_t emitted = 0;              // tokens appended to the output by this step
    std::int32_t candidate_index = -1;      // -1 for AR steps
    std::uint32_t candidates_verified = 0;  // 0 for AR steps
    std::uint32_t batch_size = 1;
};

struct DecodeTrace {
    std::vector<StepRecord> steps;
    TokenSeq output;  // prompt followed by everything generated

    std::size_t forward_passes() const { return steps.size(); }

    /// Checks the per-step bookkeeping against the output. Used by tests.
    bool consistent_with(std::size_t prompt_len) const {
        std::size_t emitted = 0;
        for (const StepRecord& s : steps) {
            emitted += s.emitted;
            if (s.accepted > s.winner_proposed || s.winner_proposed > s.proposed) return false;
            if (s.kind == StepKind::kAr) {
                if (s.batch_size != 1 || s.proposed != 0 || s.emitted != 1) return false;
                if (s.candidate_index != -1 || s.candidates_verified != 0) return false;
            } else {
                if (s.batch_size != s.proposed + 1 || s.candidates_verified < 1) return false;
                if (s.candidate_index < 0) return false;
                if (s.emitted != s.accepted && s.emitted != s.accepted + 1) return false;
            }
        }
        return prompt_len <= output.size() && emitted == output.size() - prompt_len;
    }
};

}  // namespace tmsd
