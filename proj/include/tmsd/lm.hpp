#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "tmsd/hash.hpp"
#include "tmsd/trace.hpp"
#include "tmsd/vocab.hpp"

namespace tmsd {

/**
 * The autoregressive main model seen by the speculative engine: a
 * deterministic greedy next-token oracle plus batched draft verification.
 *
 * verify_draft(ctx, d) returns |d|+1 tokens where element i is the greedy
 * token given ctx + d[0..i). Element 0 therefore equals greedy_next(ctx),
 * and the final element is the "bonus" token available when the whole draft
 * is accepted. The default implementation evaluates the prefixes one by one;
 * the engine's cost model treats the call as a single batched forward pass.
 */
class MainModel {
public:
    virtual ~MainModel() = default;

    virtual Token greedy_next(const TokenSeq& context) const = 0;

    virtual std::vector<Token> verify_draft(const TokenSeq& context, const TokenSeq& draft) const;

    virtual std::size_t vocab_size() const = 0;
};

/**
 * Backoff n-gram table over a tokenized corpus, standing in for a neural
 * decoder. Greedy choice is the argmax of stupid-backoff scores (factor 0.4),
 * ties broken toward the smallest token id; a context with no mass anywhere
 * yields EOS. Immutable after construction.
 */
class CorpusLM : public MainModel {
public:
    static constexpr double kBackoff = 0.4;

    CorpusLM(const std::vector<TokenSeq>& sequences, std::size_t vocab_size, std::uint32_t order = 4);

    Token greedy_next(const TokenSeq& context) const override;
    std::size_t vocab_size() const override { return vocab_size_; }
    std::uint32_t order() const { return order_; }

private:
    struct Dist {
        std::vector<std::pair<Token, std::uint32_t>> counts;  // sorted by token id
        std::uint64_t total = 0;
    };

    std::unordered_map<TokenSeq, Dist, TokenSeqHash> table_;
    std::size_t vocab_size_;
    std::uint32_t order_;
};

/**
 * Deterministic noise wrapper modelling main/draft mismatch: with rate
 * `deviation_rate` the greedy token is replaced by a pseudo-random non-SOT
 * token. The decision is a pure function of (seed, context), so results are
 * reproducible and independent of call order.
 */
class NoisyLM : public MainModel {
public:
    NoisyLM(const MainModel& inner, double deviation_rate, std::uint64_t seed);

    Token greedy_next(const TokenSeq& context) const override;
    std::size_t vocab_size() const override { return inner_.vocab_size(); }

private:
    const MainModel& inner_;
    double deviation_rate_;
    std::uint64_t seed_;
};

/// Plain greedy decoding: one forward pass per generated token, stopping at
/// EOS or after max_len generated tokens. The prompt must begin with SOT.
DecodeTrace autoregressive_decode(const MainModel& model, const TokenSeq& prompt,
                                  std::size_t max_len);

}  // namespace tmsd
