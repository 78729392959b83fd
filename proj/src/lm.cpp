#include "tmsd/lm.hpp"

#include <algorithm>

#include "tmsd/error.hpp"

namespace tmsd {

std::vector<Token> MainModel::verify_draft(const TokenSeq& context, const TokenSeq& draft) const {
    std::vector<Token> out;
    out.reserve(draft.size() + 1);
    TokenSeq ctx = context;
    for (std::size_t i = 0; i <= draft.size(); ++i) {
        out.push_back(greedy_next(ctx));
        if (i < draft.size()) ctx.push_back(draft[i]);
    }
    return out;
}

CorpusLM::CorpusLM(const std::vector<TokenSeq>& sequences, std::size_t vocab_size,
                   std::uint32_t order)
    : vocab_size_(vocab_size), order_(order) {
    if (order < 1) throw InvalidConfigError("CorpusLM order must be >= 1");

    std::unordered_map<TokenSeq, std::unordered_map<Token, std::uint32_t>, TokenSeqHash> raw;
    for (const TokenSeq& seq : sequences) {
        TokenSeq s;
        s.reserve(seq.size() + 1);
        s.push_back(kSot);
        s.insert(s.end(), seq.begin(), seq.end());
        for (std::size_t i = 1; i < s.size(); ++i) {
            std::uint32_t max_ctx = std::min<std::uint32_t>(order_ - 1, static_cast<std::uint32_t>(i));
            for (std::uint32_t len = 0; len <= max_ctx; ++len) {
                TokenSeq ctx(s.begin() + static_cast<std::ptrdiff_t>(i - len),
                             s.begin() + static_cast<std::ptrdiff_t>(i));
                raw[ctx][s[i]] += 1;
            }
        }
    }
    table_.reserve(raw.size());
    for (auto& [ctx, counts] : raw) {
        Dist d;
        d.counts.assign(counts.begin(), counts.end());
        std::sort(d.counts.begin(), d.counts.end());
        for (const auto& [tok, c] : d.counts) d.total += c;
        table_.emplace(ctx, std::move(d));
    }
}

Token CorpusLM::greedy_next(const TokenSeq& context) const {
    std::uint32_t max_ctx =
        std::min<std::uint32_t>(order_ - 1, static_cast<std::uint32_t>(context.size()));

    double best_score = -1.0;
    Token best_tok = kEos;
    std::vector<bool> scored(vocab_size_, false);

    double multiplier = 1.0;
    for (std::uint32_t len = max_ctx;; --len) {
        TokenSeq ctx(context.end() - len, context.end());
        auto it = table_.find(ctx);
        if (it != table_.end()) {
            const Dist& d = it->second;
            for (const auto& [tok, count] : d.counts) {
                if (tok < vocab_size_ && scored[tok]) continue;
                if (tok < vocab_size_) scored[tok] = true;
                double score = multiplier * static_cast<double>(count) / static_cast<double>(d.total);
                if (score > best_score || (score == best_score && tok < best_tok)) {
                    best_score = score;
                    best_tok = tok;
                }
            }
        }
        multiplier *= kBackoff;
        // deeper levels score at most `multiplier`, so they can no longer win
        if (multiplier < best_score) break;
        if (len == 0) break;
    }
    return best_tok;
}

NoisyLM::NoisyLM(const MainModel& inner, double deviation_rate, std::uint64_t seed)
    : inner_(inner), deviation_rate_(deviation_rate), seed_(seed) {
    if (deviation_rate < 0.0 || deviation_rate > 1.0) {
        throw InvalidConfigError("deviation_rate must be in [0, 1]");
    }
}

Token NoisyLM::greedy_next(const TokenSeq& context) const {
    Token t = inner_.greedy_next(context);
    if (deviation_rate_ <= 0.0) return t;

    std::uint64_t h = splitmix64(fnv1a_tokens(context) ^ splitmix64(seed_));
    double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    if (u >= deviation_rate_) return t;

    std::size_t v = vocab_size();
    if (v <= 2) return t;
    // any non-SOT token different from the inner choice
    Token alt = 1 + static_cast<Token>(splitmix64(h) % (v - 1));
    if (alt == t) alt = 1 + static_cast<Token>(alt % (v - 1));
    return alt == t ? t : alt;
}

DecodeTrace autoregressive_decode(const MainModel& model, const TokenSeq& prompt,
                                  std::size_t max_len) {
    if (prompt.empty() || prompt.front() != kSot) {
        throw InvalidConfigError("prompt must begin with SOT");
    }
    if (max_len < 1) throw InvalidConfigError("max_len must be >= 1");

    DecodeTrace trace;
    trace.output = prompt;
    for (std::size_t generated = 0; generated < max_len; ++generated) {
        Token t = model.greedy_next(trace.output);
        trace.output.push_back(t);
        StepRecord step;
        step.kind = StepKind::kAr;
        step.emitted = 1;
        trace.steps.push_back(step);
        if (t == kEos) break;
    }
    return trace;
}

}  // namespace tmsd
