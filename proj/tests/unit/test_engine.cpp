#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "tmsd/engine.hpp"
#include "tmsd/error.hpp"
#include "tmsd/token_map.hpp"

using namespace tmsd;

namespace {

struct Pipeline {
    Vocab vocab;
    std::vector<TokenSeq> sequences;
    TokenMap map;

    explicit Pipeline(const std::vector<std::string>& corpus, std::uint32_t max_n = 3,
                      PruneConfig prune_config = {}) {
        vocab = Vocab::build(corpus);
        for (const auto& line : corpus) sequences.push_back(tokenize(line, vocab));
        map = prune(build_raw_map(sequences, max_n, vocab), prune_config);
    }
};

}  // namespace

TEST_CASE("a fully accepted candidate finishes the sentence in one pass") {
    Pipeline p({"a b c d e"});
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenSeq prompt{kSot, p.vocab.id_of("a")};

    DecodeTrace sd = speculative_decode(lm, p.map, prompt);
    DecodeTrace ar = autoregressive_decode(lm, prompt, EngineConfig{}.max_output_len);

    CHECK(sd.output == ar.output);
    CHECK(sd.forward_passes() == 1);
    CHECK(ar.forward_passes() == 5);
    REQUIRE(sd.steps.size() == 1);
    const StepRecord& step = sd.steps[0];
    CHECK(step.kind == StepKind::kDraft);
    // candidate [b c d e EOS] proposes 4 tokens once its EOS is stripped;
    // the bonus token brings the EOS back
    CHECK(step.proposed == 4);
    CHECK(step.accepted == 4);
    CHECK(step.emitted == 5);
    CHECK(step.batch_size == 5);
    CHECK(sd.consistent_with(prompt.size()));
}

TEST_CASE("an empty map degenerates to autoregressive decoding") {
    Pipeline p({"a b c d"});
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenMap empty;
    empty.vocab = p.vocab;
    TokenSeq prompt{kSot, p.vocab.id_of("a")};

    DecodeTrace sd = speculative_decode(lm, empty, prompt);
    DecodeTrace ar = autoregressive_decode(lm, prompt, EngineConfig{}.max_output_len);
    CHECK(sd.output == ar.output);
    CHECK(sd.forward_passes() == ar.forward_passes());
    for (const StepRecord& step : sd.steps) CHECK(step.kind == StepKind::kAr);
}

TEST_CASE("a deviating model gets corrected and the output still matches AR") {
    Pipeline p({"a b c d e f g h"});
    CorpusLM inner(p.sequences, p.vocab.size());
    // pick a seed that actually deviates inside the drafted region
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        NoisyLM noisy(inner, 0.2, seed);
        TokenSeq prompt{kSot, p.vocab.id_of("a")};
        DecodeTrace sd = speculative_decode(noisy, p.map, prompt);
        DecodeTrace ar = autoregressive_decode(noisy, prompt, EngineConfig{}.max_output_len);
        CHECK(sd.output == ar.output);
        CHECK(sd.consistent_with(prompt.size()));
    }
}

TEST_CASE("an EOS-only candidate falls back to an AR step") {
    Pipeline p({"a"});  // key [a] -> candidate [EOS], empty once stripped
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenSeq prompt{kSot, p.vocab.id_of("a")};
    DecodeTrace sd = speculative_decode(lm, p.map, prompt);
    REQUIRE(sd.steps.size() == 1);
    CHECK(sd.steps[0].kind == StepKind::kAr);
    CHECK(sd.output.back() == kEos);
    CHECK(sd.output == autoregressive_decode(lm, prompt, EngineConfig{}.max_output_len).output);
}

TEST_CASE("speculative_decode rejects mismatched vocab sizes") {
    Pipeline p({"a b c"});
    CorpusLM lm(p.sequences, p.vocab.size() + 2);
    CHECK_THROWS_AS(speculative_decode(lm, p.map, {kSot, 3}), VocabMismatchError);
}

TEST_CASE("speculative_decode validates prompt and config") {
    Pipeline p({"a b c"});
    CorpusLM lm(p.sequences, p.vocab.size());
    CHECK_THROWS_AS(speculative_decode(lm, p.map, {3}), InvalidConfigError);
    EngineConfig config;
    config.max_draft_len = 0;
    CHECK_THROWS_AS(speculative_decode(lm, p.map, {kSot, 3}, config), InvalidConfigError);
}

TEST_CASE("max_output_len caps speculative decoding exactly like AR") {
    Pipeline p({"a b c d e f g h i j k l"});
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenSeq prompt{kSot, p.vocab.id_of("a")};
    for (std::uint32_t cap : {1u, 2u, 3u, 5u, 7u}) {
        EngineConfig config;
        config.max_output_len = cap;
        DecodeTrace sd = speculative_decode(lm, p.map, prompt, config);
        DecodeTrace ar = autoregressive_decode(lm, prompt, cap);
        CHECK(sd.output == ar.output);
        CHECK(sd.output.size() == prompt.size() + cap);
        CHECK(sd.consistent_with(prompt.size()));
    }
}

TEST_CASE("the candidate with the longest accepted prefix wins") {
    Pipeline p({"a b c"});
    CorpusLM lm(p.sequences, p.vocab.size());
    Token a = p.vocab.id_of("a"), b = p.vocab.id_of("b"), c = p.vocab.id_of("c");

    // rank order puts the longer (wrong) candidate first; the shorter one
    // matches the model and must win
    TokenMap map;
    map.vocab = p.vocab;
    std::vector<Candidate> cands = {{{c, c, c, c}, 1}, {{b, c}, 1}};
    std::sort(cands.begin(), cands.end(), candidate_less);
    REQUIRE(cands[0].continuation.size() == 4);
    map.entries.emplace(NgramKey{a}, cands);

    DecodeTrace sd = speculative_decode(lm, map, {kSot, a});
    REQUIRE(!sd.steps.empty());
    const StepRecord& step = sd.steps[0];
    CHECK(step.kind == StepKind::kDraft);
    CHECK(step.candidate_index == 1);
    CHECK(step.candidates_verified == 2);
    CHECK(step.proposed == 6);
    CHECK(step.batch_size == 7);
    CHECK(step.winner_proposed == 2);
    CHECK(step.accepted == 2);
    CHECK(sd.output == autoregressive_decode(lm, {kSot, a}, EngineConfig{}.max_output_len).output);
}

TEST_CASE("acceptance-length ties go to the higher-ranked candidate") {
    Pipeline p({"a b c"});
    CorpusLM lm(p.sequences, p.vocab.size());
    Token a = p.vocab.id_of("a"), c = p.vocab.id_of("c");

    // both candidates are rejected at the first position
    TokenMap map;
    map.vocab = p.vocab;
    std::vector<Candidate> cands = {{{c, c}, 1}, {{c}, 1}};
    map.entries.emplace(NgramKey{a}, cands);

    DecodeTrace sd = speculative_decode(lm, map, {kSot, a});
    REQUIRE(!sd.steps.empty());
    CHECK(sd.steps[0].candidate_index == 0);
    CHECK(sd.steps[0].accepted == 0);
    CHECK(sd.steps[0].emitted == 1);  // just the correction token
    CHECK(sd.output == autoregressive_decode(lm, {kSot, a}, EngineConfig{}.max_output_len).output);
}

TEST_CASE("max_draft_len truncates proposals") {
    Pipeline p({"a b c d e f g h"});
    CorpusLM lm(p.sequences, p.vocab.size());
    EngineConfig config;
    config.max_draft_len = 2;
    TokenSeq prompt{kSot, p.vocab.id_of("a")};
    DecodeTrace sd = speculative_decode(lm, p.map, prompt, config);
    DecodeTrace ar = autoregressive_decode(lm, prompt, config.max_output_len);
    CHECK(sd.output == ar.output);
    for (const StepRecord& step : sd.steps) {
        if (step.kind == StepKind::kDraft) CHECK(step.winner_proposed <= 2);
    }
}

TEST_CASE("per-step output is the accepted prefix plus one correction token") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        auto corpus = oracle::random_corpus(rng, 3 + rng() % 30, 6, 8);
        Pipeline p(corpus);
        CorpusLM inner(p.sequences, p.vocab.size(), 1 + rng() % 4);
        NoisyLM model(inner, static_cast<double>(rng() % 75) / 250.0, rng());

        TokenSeq prompt{kSot};
        std::size_t len = rng() % 3;
        for (std::size_t i = 0; i < len; ++i) {
            prompt.push_back(3 + static_cast<Token>(rng() % (p.vocab.size() - 3)));
        }
        EngineConfig config;
        config.max_output_len = 48;
        DecodeTrace sd = speculative_decode(model, p.map, prompt, config);
        CHECK(sd.consistent_with(prompt.size()));

        // replaying the trace reproduces the generated tokens one step at a time
        std::size_t pos = prompt.size();
        for (const StepRecord& step : sd.steps) {
            pos += step.emitted;
            CHECK(pos <= sd.output.size());
        }
        CHECK(pos == sd.output.size());
    }
}

TEST_CASE("losslessness holds over random corpora, noise and configs") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 40; ++trial) {
        auto corpus = oracle::random_corpus(rng, 3 + rng() % 40, 7, 9);
        PruneConfig prune_config;
        prune_config.max_candidates = 1 + rng() % 3;
        std::uint32_t len1 = 1 + rng() % 2;
        prune_config.min_len_by_count = {
            {1, len1}, {2, len1 + rng() % 8}, {3, len1 + 4 + rng() % 12}};
        Pipeline p(corpus, 1 + rng() % 4, prune_config);

        CorpusLM inner(p.sequences, p.vocab.size(), 1 + rng() % 5);
        NoisyLM model(inner, static_cast<double>(rng() % 75) / 250.0, rng());

        EngineConfig config;
        config.max_candidates_per_step = 1 + rng() % 4;
        config.max_draft_len = 1 + rng() % 12;
        config.max_output_len = 1 + rng() % 40;
        config.fallback_ar_steps = 1 + rng() % 3;

        TokenSeq prompt{kSot};
        std::size_t len = rng() % 4;
        for (std::size_t i = 0; i < len; ++i) {
            prompt.push_back(3 + static_cast<Token>(rng() % (p.vocab.size() - 3)));
        }

        DecodeTrace sd = speculative_decode(model, p.map, prompt, config);
        DecodeTrace ar = autoregressive_decode(model, prompt, config.max_output_len);
        CHECK(sd.output == ar.output);
        CHECK(sd.forward_passes() <= ar.forward_passes());
    }
}

TEST_CASE("batch_decode maps element-wise and preserves order") {
    Pipeline p({"a b c d", "b c d a"});
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenSeq p1{kSot, p.vocab.id_of("a")};
    TokenSeq p2{kSot, p.vocab.id_of("b")};

    auto traces = batch_decode(lm, p.map, {p1, p2});
    REQUIRE(traces.size() == 2);
    CHECK(traces[0].output == speculative_decode(lm, p.map, p1).output);
    CHECK(traces[1].output == speculative_decode(lm, p.map, p2).output);

    auto twice = batch_decode(lm, p.map, {p1, p1});
    CHECK(twice[0].output == twice[1].output);
}

TEST_CASE("batch_decode rejects an empty prompt list") {
    Pipeline p({"a b"});
    CorpusLM lm(p.sequences, p.vocab.size());
    CHECK_THROWS_AS(batch_decode(lm, p.map, {}), InvalidConfigError);
}

TEST_CASE("batch_decode attaches the failing item index") {
    Pipeline p({"a b"});
    CorpusLM lm(p.sequences, p.vocab.size());
    TokenSeq good{kSot, p.vocab.id_of("a")};
    TokenSeq bad{p.vocab.id_of("a")};  // missing SOT
    try {
        batch_decode(lm, p.map, {good, bad});
        FAIL("expected BatchItemError");
    } catch (const BatchItemError& e) {
        CHECK(e.index == 1);
    }
}
