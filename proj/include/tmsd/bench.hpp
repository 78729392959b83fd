#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tmsd/engine.hpp"
#include "tmsd/trace.hpp"

namespace tmsd {

/**
 * Deterministic decode-time model. A forward pass over a batch of b positions
 * costs base_latency + per_token_latency * (b - 1); a step that verified k
 * candidates pays candidate_overhead for each one beyond the first.
 */
struct CostModel {
    double base_latency = 1.0;
    double per_token_latency = 0.0;
    double candidate_overhead = 0.0;

    double forward_cost(std::uint32_t batch) const {
        return base_latency + per_token_latency * static_cast<double>(batch - 1);
    }

    double step_cost(const StepRecord& step) const {
        std::uint32_t extra = step.candidates_verified > 1 ? step.candidates_verified - 1 : 0;
        return forward_cost(step.batch_size) + candidate_overhead * static_cast<double>(extra);
    }

    double trace_cost(const DecodeTrace& trace) const;

    /// "forward-pass": pass counting only. "paper-fit": constants fitted so the
    /// candidates sweep crosses over at 9 tokens for K=2 and 16 for K=3.
    static CostModel preset(std::string_view name);
};

/// Which proposals count in the acceptance-rate denominator.
enum class ArDenominator { kAllCandidates, kWinnerOnly };

struct UtteranceRow {
    std::size_t index = 0;
    std::size_t output_tokens = 0;
    std::size_t ar_passes = 0;
    std::size_t sd_passes = 0;
    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    double t_baseline = 0.0;
    double t_speculative = 0.0;
    double speedup = 0.0;
};

struct BenchReport {
    double speedup = 0.0;
    double acceptance_rate = 0.0;      // percent
    double avg_acceptance_length = 0.0;
    double t_baseline = 0.0;
    double t_speculative = 0.0;
    std::size_t ar_forward_passes = 0;
    std::size_t sd_forward_passes = 0;
    bool no_drafts = false;  // no tokens were proposed anywhere
    ArDenominator denominator = ArDenominator::kAllCandidates;
    std::vector<UtteranceRow> rows;

    // optional wall-clock measurements (opt-in; excluded from determinism checks)
    std::optional<double> wall_t_baseline;
    std::optional<double> wall_t_speculative;
};

/// Aggregates speedup, acceptance rate and acceptance length from paired
/// speculative/baseline traces of the same utterances in the same order.
/// Throws LengthMismatchError when the two lists disagree in length.
BenchReport compute_metrics(std::span<const DecodeTrace> sd_traces,
                            std::span<const DecodeTrace> ar_traces, const CostModel& cost,
                            ArDenominator denominator = ArDenominator::kAllCandidates);

std::string report_to_csv(const BenchReport& report);
std::string report_to_json(const BenchReport& report);

struct SweepRow {
    std::string param;
    std::int64_t value = 0;
    double speedup = 0.0;
    double acceptance_rate = 0.0;
    double avg_acceptance_length = 0.0;
    std::optional<std::int64_t> crossover;
};

/// Sweep rows serialize as CSV with header param,value,S,A_r,A_l,crossover.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

struct CandidateSweepResult {
    std::vector<SweepRow> rows;
    /// crossover[k] = smallest draft length at which SD beats AR for k candidates
    std::vector<std::pair<std::uint32_t, std::optional<std::uint32_t>>> crossovers;
};

/**
 * Simulated decode-time comparison for K fully-accepted candidates of fixed
 * length L against plain AR over the same token count. Every draft step
 * verifies K drafts of length L (one batch of K*L+1 positions plus the
 * per-candidate overhead) and advances L+1 tokens, the last step fewer.
 */
CandidateSweepResult sweep_candidates_vs_length(const CostModel& cost,
                                                std::span<const std::uint32_t> candidate_counts,
                                                std::uint32_t max_len,
                                                std::uint32_t tokens_per_sequence = 100);

/// One grid point of the n-gram sweep.
struct NgramSweepPoint {
    std::uint32_t max_n = 0;
    BenchReport report;
};

/**
 * Builds a token map per N over the training corpus and benchmarks
 * speculative against baseline decoding on the test prompts. Grid points are
 * independent and may run in parallel (TOKENMAP_SD_THREADS caps the thread
 * count); results always come back in N order.
 */
std::vector<NgramSweepPoint> sweep_ngram_order(const std::vector<TokenSeq>& train_sequences,
                                               const Vocab& vocab,
                                               const std::vector<TokenSeq>& test_prompts,
                                               const MainModel& model, const CostModel& cost,
                                               std::uint32_t n_from, std::uint32_t n_to,
                                               const PruneConfig& prune_config = {},
                                               const EngineConfig& engine_config = {});

/// Thread cap from TOKENMAP_SD_THREADS (0 or unset means hardware concurrency).
std::size_t thread_limit();

}  // namespace tmsd
