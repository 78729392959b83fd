#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "tmsd/bench.hpp"
#include "tmsd/error.hpp"
#include "tmsd/synth.hpp"
#include "tmsd/token_map.hpp"

using namespace tmsd;

namespace {

StepRecord draft_step(std::uint32_t proposed, std::uint32_t winner_proposed,
                      std::uint32_t accepted, std::uint32_t candidates) {
    StepRecord s;
    s.kind = StepKind::kDraft;
    s.proposed = proposed;
    s.winner_proposed = winner_proposed;
    s.accepted = accepted;
    s.emitted = accepted + 1;
    s.candidate_index = 0;
    s.candidates_verified = candidates;
    s.batch_size = proposed + 1;
    return s;
}

StepRecord ar_step() {
    StepRecord s;
    s.kind = StepKind::kAr;
    s.emitted = 1;
    return s;
}

DecodeTrace trace_of(std::vector<StepRecord> steps) {
    DecodeTrace t;
    t.steps = std::move(steps);
    return t;
}

}  // namespace

TEST_CASE("acceptance rate is 100 when every proposed token is accepted") {
    std::vector<DecodeTrace> sd = {trace_of({draft_step(6, 6, 6, 1), draft_step(4, 4, 4, 1)})};
    std::vector<DecodeTrace> ar = {trace_of({ar_step()})};
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
    CHECK(report.acceptance_rate == doctest::Approx(100.0).epsilon(1e-12));
    CHECK_FALSE(report.no_drafts);
}

TEST_CASE("zero proposals reports A_r = 0 with the no_drafts flag") {
    std::vector<DecodeTrace> sd = {trace_of({ar_step(), ar_step()})};
    std::vector<DecodeTrace> ar = {trace_of({ar_step(), ar_step()})};
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
    CHECK(report.acceptance_rate == 0.0);
    CHECK(report.no_drafts);
    CHECK(report.speedup == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metric formulas match hand-computed values") {
    // one utterance: a draft step verifying two candidates (4 and 2 tokens,
    // the 4-token one fully accepted) followed by one AR step
    std::vector<DecodeTrace> sd = {trace_of({draft_step(6, 4, 4, 2), ar_step()})};
    std::vector<DecodeTrace> ar = {trace_of(std::vector<StepRecord>(6, ar_step()))};

    CostModel cost{2.0, 0.5, 3.0};
    // t_sd = (2 + 0.5*6 + 3*1) + 2 = 10; t_ar = 6*2 = 12
    BenchReport report = compute_metrics(sd, ar, cost);
    CHECK(std::abs(report.t_speculative - 10.0) <= 1e-9 * 10.0);
    CHECK(std::abs(report.t_baseline - 12.0) <= 1e-9 * 12.0);
    CHECK(std::abs(report.speedup - 1.2) <= 1e-9 * 1.2);
    CHECK(std::abs(report.acceptance_rate - 400.0 / 6.0) <= 1e-9 * (400.0 / 6.0));
    CHECK(std::abs(report.avg_acceptance_length - 4.0) <= 1e-9 * 4.0);

    BenchReport winner =
        compute_metrics(sd, ar, cost, ArDenominator::kWinnerOnly);
    CHECK(std::abs(winner.acceptance_rate - 100.0) <= 1e-9 * 100.0);
}

TEST_CASE("single draft step accepting 4 of 6 yields A_r 66.7 and A_l 4") {
    std::vector<DecodeTrace> sd = {trace_of({draft_step(6, 6, 4, 1)})};
    std::vector<DecodeTrace> ar = {trace_of(std::vector<StepRecord>(5, ar_step()))};
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
    CHECK(std::abs(report.acceptance_rate - 200.0 / 3.0) <= 1e-9 * (200.0 / 3.0));
    CHECK(std::abs(report.avg_acceptance_length - 4.0) <= 1e-9 * 4.0);
}

TEST_CASE("A_l divides by the number of sequences") {
    std::vector<DecodeTrace> sd = {trace_of({draft_step(5, 5, 3, 1)}),
                                   trace_of({draft_step(5, 5, 5, 1)})};
    std::vector<DecodeTrace> ar = {trace_of({ar_step()}), trace_of({ar_step()})};
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
    CHECK(std::abs(report.avg_acceptance_length - 4.0) <= 1e-12);
}

TEST_CASE("compute_metrics rejects mismatched trace lists") {
    std::vector<DecodeTrace> sd = {trace_of({ar_step()})};
    std::vector<DecodeTrace> ar = {};
    CHECK_THROWS_AS(compute_metrics(sd, ar, CostModel{}), LengthMismatchError);
}

TEST_CASE("forward-pass speedup equals the pass-count ratio exactly") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<DecodeTrace> sd, ar;
        std::size_t utts = 1 + rng() % 5;
        for (std::size_t u = 0; u < utts; ++u) {
            std::vector<StepRecord> steps;
            std::size_t n = 1 + rng() % 10;
            for (std::size_t i = 0; i < n; ++i) {
                if (rng() % 2 == 0) {
                    std::uint32_t prop = 1 + static_cast<std::uint32_t>(rng() % 8);
                    steps.push_back(draft_step(prop, prop, rng() % (prop + 1),
                                               1 + static_cast<std::uint32_t>(rng() % 3)));
                } else {
                    steps.push_back(ar_step());
                }
            }
            sd.push_back(trace_of(std::move(steps)));
            ar.push_back(trace_of(std::vector<StepRecord>(1 + rng() % 20, ar_step())));
        }
        BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
        CHECK(report.speedup == static_cast<double>(report.ar_forward_passes) /
                                    static_cast<double>(report.sd_forward_passes));
    }
}

TEST_CASE("report serialization is deterministic") {
    std::vector<DecodeTrace> sd = {trace_of({draft_step(6, 4, 4, 2), ar_step()})};
    std::vector<DecodeTrace> ar = {trace_of(std::vector<StepRecord>(6, ar_step()))};
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("paper-fit"));
    CHECK(report_to_csv(report) == report_to_csv(report));
    CHECK(report_to_json(report) == report_to_json(report));

    auto doc = nlohmann::json::parse(report_to_json(report));
    CHECK(doc["summary"]["S"].get<double>() == doctest::Approx(report.speedup));
    CHECK(doc["rows"].size() == 1);

    std::string csv = report_to_csv(report);
    CHECK(csv.rfind("row,utt,tokens", 0) == 0);
    CHECK(csv.find("\nsummary,") != std::string::npos);
}

TEST_CASE("free batching makes one candidate profitable from length 1") {
    std::vector<std::uint32_t> ks = {1};
    auto result = sweep_candidates_vs_length(CostModel{1.0, 0.0, 0.0}, ks, 8, 100);
    REQUIRE(result.crossovers.size() == 1);
    CHECK(result.crossovers[0].second == 1);
}

TEST_CASE("huge candidate overhead means no crossover at all") {
    std::vector<std::uint32_t> ks = {2, 3};
    auto result = sweep_candidates_vs_length(CostModel{1.0, 0.0, 1e9}, ks, 32, 100);
    for (const auto& [k, crossover] : result.crossovers) {
        CHECK_FALSE(crossover.has_value());
    }
}

TEST_CASE("the paper-fit preset crosses over at 9 and 16") {
    std::vector<std::uint32_t> ks = {1, 2, 3};
    auto result =
        sweep_candidates_vs_length(CostModel::preset("paper-fit"), ks, 32, 100);
    REQUIRE(result.crossovers.size() == 3);
    CHECK(result.crossovers[0].second == 1);
    CHECK(result.crossovers[1].second == 9);
    CHECK(result.crossovers[2].second == 16);
}

TEST_CASE("sweep rows serialize with the documented header") {
    std::vector<std::uint32_t> ks = {2};
    auto result = sweep_candidates_vs_length(CostModel::preset("paper-fit"), ks, 4, 100);
    std::string csv = sweep_to_csv(result.rows);
    CHECK(csv.rfind("param,value,S,A_r,A_l,crossover\n", 0) == 0);
    CHECK(csv.find("K=2,1,") != std::string::npos);
}

TEST_CASE("ngram sweep is S=1 when lookups never hit") {
    std::vector<std::string> train = {"a b c d"};
    Vocab vocab = Vocab::build(train);
    std::vector<TokenSeq> sequences = {tokenize(train[0], vocab)};
    CorpusLM model(sequences, vocab.size());
    // UNK-only prompt: reserved tokens never form keys, so every step is AR
    std::vector<TokenSeq> prompts = {{kSot, kUnk}};
    auto points = sweep_ngram_order(sequences, vocab, prompts, model,
                                    CostModel::preset("forward-pass"), 1, 3);
    REQUIRE(points.size() == 3);
    for (const auto& point : points) {
        CHECK(point.report.speedup == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(point.report.no_drafts);
    }
}

TEST_CASE("ngram sweep is deterministic and ordered by N") {
    std::mt19937_64 rng(33);
    auto corpus = oracle::random_corpus(rng, 30, 6, 8);
    Vocab vocab = Vocab::build(corpus);
    std::vector<TokenSeq> sequences;
    for (const auto& line : corpus) sequences.push_back(tokenize(line, vocab));
    CorpusLM model(sequences, vocab.size());
    std::vector<TokenSeq> prompts;
    for (std::size_t i = 0; i < 5; ++i) {
        prompts.push_back({kSot, sequences[i][0]});
    }
    auto a = sweep_ngram_order(sequences, vocab, prompts, model,
                               CostModel::preset("forward-pass"), 1, 4);
    auto b = sweep_ngram_order(sequences, vocab, prompts, model,
                               CostModel::preset("forward-pass"), 1, 4);
    REQUIRE(a.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].max_n == i + 1);
        CHECK(a[i].report.speedup == b[i].report.speedup);
        CHECK(a[i].report.sd_forward_passes == b[i].report.sd_forward_passes);
    }
}

TEST_CASE("in-corpus prompts with a noise-free model accept every drafted token") {
    // test utterances drawn from the training corpus itself: on the bundled
    // corpus the pruned candidates are conservative shared prefixes, the model
    // confirms every one of them, and A_r lands at exactly 100
    std::vector<std::string> train = generate_corpus(CorpusKind::kMaintenance, 1000, 1);
    std::vector<std::string> test(train.begin(), train.begin() + 50);

    Vocab vocab = Vocab::build(train);
    std::vector<TokenSeq> sequences;
    for (const auto& line : train) sequences.push_back(tokenize(line, vocab));
    TokenMap map = prune(build_raw_map(sequences, 3, vocab), PruneConfig{});
    CorpusLM model(sequences, vocab.size(), 4);

    EngineConfig config;
    std::vector<DecodeTrace> sd, ar;
    for (const auto& line : test) {
        TokenSeq seq = tokenize(line, vocab);
        TokenSeq prompt{kSot, seq[0], seq[1]};
        sd.push_back(speculative_decode(model, map, prompt, config));
        ar.push_back(autoregressive_decode(model, prompt, config.max_output_len));
    }
    BenchReport report = compute_metrics(sd, ar, CostModel::preset("forward-pass"));
    CHECK_FALSE(report.no_drafts);
    CHECK(report.acceptance_rate == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(report.speedup > 1.0);
}

TEST_CASE("cost presets reject unknown names") {
    CHECK_THROWS_AS(CostModel::preset("warp-speed"), InvalidConfigError);
}

TEST_CASE("thread_limit honors TOKENMAP_SD_THREADS") {
    CHECK(thread_limit() >= 1);
    setenv("TOKENMAP_SD_THREADS", "1", 1);
    CHECK(thread_limit() == 1);
    setenv("TOKENMAP_SD_THREADS", "0", 1);
    CHECK(thread_limit() >= 1);  // 0 means auto
    setenv("TOKENMAP_SD_THREADS", "not-a-number", 1);
    CHECK(thread_limit() >= 1);
    unsetenv("TOKENMAP_SD_THREADS");
}
