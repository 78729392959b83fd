#include "tmsd/engine.hpp"

#include <algorithm>

#include "tmsd/error.hpp"

namespace tmsd {

void EngineConfig::validate() const {
    if (max_candidates_per_step < 1 || max_draft_len < 1 || max_output_len < 1 ||
        fallback_ar_steps < 1) {
        throw InvalidConfigError("engine config fields must all be >= 1");
    }
}

DecodeTrace speculative_decode(const MainModel& model, const TokenMap& map, const TokenSeq& prompt,
                               const EngineConfig& config) {
    config.validate();
    if (prompt.empty() || prompt.front() != kSot) {
        throw InvalidConfigError("prompt must begin with SOT");
    }
    if (map.vocab.size() != model.vocab_size()) {
        throw VocabMismatchError(map.vocab.size(), model.vocab_size());
    }

    DecodeTrace trace;
    trace.output = prompt;
    std::size_t generated = 0;
    bool done = false;

    while (!done && generated < config.max_output_len) {
        std::size_t budget = config.max_output_len - generated;

        // Collect drafts. A trailing EOS is stripped: if the model agrees the
        // sentence ends there it re-emits EOS as the correction/bonus token,
        // and the model is never queried on a context that already contains
        // EOS. Drafts are also capped so a step never overruns the budget.
        std::vector<TokenSeq> drafts;
        for (const Candidate& cand : map.lookup(trace.output)) {
            if (drafts.size() == config.max_candidates_per_step) break;
            std::size_t len = cand.continuation.size();
            if (len > 0 && cand.continuation.back() == kEos) --len;
            len = std::min<std::size_t>({len, config.max_draft_len, budget - 1});
            if (len == 0) continue;
            drafts.emplace_back(cand.continuation.begin(),
                                cand.continuation.begin() + static_cast<std::ptrdiff_t>(len));
        }

        if (drafts.empty()) {
            for (std::uint32_t i = 0; i < config.fallback_ar_steps && generated < config.max_output_len;
                 ++i) {
                Token t = model.greedy_next(trace.output);
                trace.output.push_back(t);
                ++generated;
                StepRecord step;
                step.kind = StepKind::kAr;
                step.emitted = 1;
                trace.steps.push_back(step);
                if (t == kEos) {
                    done = true;
                    break;
                }
            }
            continue;
        }

        std::uint32_t proposed_total = 0;
        std::size_t best_index = 0;
        std::size_t best_accepted = 0;
        std::vector<Token> best_verify;
        for (std::size_t c = 0; c < drafts.size(); ++c) {
            const TokenSeq& draft = drafts[c];
            proposed_total += static_cast<std::uint32_t>(draft.size());
            std::vector<Token> verify = model.verify_draft(trace.output, draft);
            std::size_t accepted = 0;
            while (accepted < draft.size() && draft[accepted] == verify[accepted]) ++accepted;
            if (c == 0 || accepted > best_accepted) {
                best_index = c;
                best_accepted = accepted;
                best_verify = std::move(verify);
            }
        }

        // accepted prefix plus the correction (or bonus) token; drafts are
        // EOS-free, so only that final token can end the decode
        TokenSeq emit(drafts[best_index].begin(),
                      drafts[best_index].begin() + static_cast<std::ptrdiff_t>(best_accepted));
        emit.push_back(best_verify[best_accepted]);

        trace.output.insert(trace.output.end(), emit.begin(), emit.end());
        generated += emit.size();
        if (emit.back() == kEos) done = true;

        StepRecord step;
        step.kind = StepKind::kDraft;
        step.proposed = proposed_total;
        step.winner_proposed = static_cast<std::uint32_t>(drafts[best_index].size());
        step.accepted = static_cast<std::uint32_t>(best_accepted);
        step.emitted = static_cast<std::uint32_t>(emit.size());
        step.candidate_index = static_cast<std::int32_t>(best_index);
        step.candidates_verified = static_cast<std::uint32_t>(drafts.size());
        step.batch_size = proposed_total + 1;
        trace.steps.push_back(step);
    }
    return trace;
}

std::vector<DecodeTrace> batch_decode(const MainModel& model, const TokenMap& map,
                                      const std::vector<TokenSeq>& prompts,
                                      const EngineConfig& config) {
    if (prompts.empty()) throw InvalidConfigError("batch_decode needs at least one prompt");
    std::vector<DecodeTrace> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        try {
            out.push_back(speculative_decode(model, map, prompts[i], config));
        } catch (const Error& e) {
            throw BatchItemError(i, e.what());
        }
    }
    return out;
}

}  // namespace tmsd
