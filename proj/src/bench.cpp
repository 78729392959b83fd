#include "tmsd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <thread>

#include <json.hpp>

#include "tmsd/error.hpp"

namespace tmsd {

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

double CostModel::trace_cost(const DecodeTrace& trace) const {
    double t = 0.0;
    for (const StepRecord& step : trace.steps) t += step_cost(step);
    return t;
}

CostModel CostModel::preset(std::string_view name) {
    if (name == "forward-pass") {
        return CostModel{1.0, 0.0, 0.0};
    }
    if (name == "paper-fit") {
        // Fitted by grid search over the 100-token workload so that the
        // candidates sweep crosses over at exactly 9 (K=2) and 16 (K=3).
        return CostModel{1.0, 0.02, 7.2};
    }
    throw InvalidConfigError("unknown cost preset: " + std::string(name));
}

BenchReport compute_metrics(std::span<const DecodeTrace> sd_traces,
                            std::span<const DecodeTrace> ar_traces, const CostModel& cost,
                            ArDenominator denominator) {
    if (sd_traces.size() != ar_traces.size()) {
        throw LengthMismatchError("speculative and baseline trace lists differ in length");
    }

    BenchReport report;
    report.denominator = denominator;

    std::uint64_t proposed_total = 0;
    std::uint64_t accepted_total = 0;

    for (std::size_t i = 0; i < sd_traces.size(); ++i) {
        const DecodeTrace& sd = sd_traces[i];
        const DecodeTrace& ar = ar_traces[i];

        UtteranceRow row;
        row.index = i;
        row.ar_passes = ar.forward_passes();
        row.sd_passes = sd.forward_passes();
        row.t_baseline = cost.trace_cost(ar);
        row.t_speculative = cost.trace_cost(sd);
        std::size_t emitted = 0;
        for (const StepRecord& step : sd.steps) {
            emitted += step.emitted;
            if (step.kind != StepKind::kDraft) continue;
            row.proposed += denominator == ArDenominator::kAllCandidates ? step.proposed
                                                                         : step.winner_proposed;
            row.accepted += step.accepted;
        }
        row.output_tokens = emitted;
        row.speedup = row.t_speculative > 0.0 ? row.t_baseline / row.t_speculative : 0.0;

        proposed_total += row.proposed;
        accepted_total += row.accepted;
        report.t_baseline += row.t_baseline;
        report.t_speculative += row.t_speculative;
        report.ar_forward_passes += row.ar_passes;
        report.sd_forward_passes += row.sd_passes;
        report.rows.push_back(row);
    }

    report.no_drafts = proposed_total == 0;
    report.acceptance_rate =
        report.no_drafts ? 0.0
                         : 100.0 * static_cast<double>(accepted_total) /
                               static_cast<double>(proposed_total);
    report.avg_acceptance_length =
        sd_traces.empty() ? 0.0
                          : static_cast<double>(accepted_total) /
                                static_cast<double>(sd_traces.size());
    report.speedup = report.t_speculative > 0.0 ? report.t_baseline / report.t_speculative : 0.0;
    return report;
}

std::string report_to_csv(const BenchReport& report) {
    std::string out =
        "row,utt,tokens,ar_passes,sd_passes,proposed,accepted,"
        "t_baseline,t_speculative,speedup,A_r,A_l,no_drafts\n";
    std::size_t tokens_total = 0;
    std::uint64_t proposed_total = 0;
    std::uint64_t accepted_total = 0;
    for (const UtteranceRow& r : report.rows) {
        tokens_total += r.output_tokens;
        proposed_total += r.proposed;
        accepted_total += r.accepted;
        out += "utterance," + std::to_string(r.index) + ',' + std::to_string(r.output_tokens) +
               ',' + std::to_string(r.ar_passes) + ',' + std::to_string(r.sd_passes) + ',' +
               std::to_string(r.proposed) + ',' + std::to_string(r.accepted) + ',' +
               fmt(r.t_baseline) + ',' + fmt(r.t_speculative) + ',' + fmt(r.speedup) + ",,,\n";
    }
    out += "summary,," + std::to_string(tokens_total) + ',' +
           std::to_string(report.ar_forward_passes) + ',' +
           std::to_string(report.sd_forward_passes) + ',' + std::to_string(proposed_total) + ',' +
           std::to_string(accepted_total) + ',' + fmt(report.t_baseline) + ',' +
           fmt(report.t_speculative) + ',' + fmt(report.speedup) + ',' +
           fmt(report.acceptance_rate) + ',' + fmt(report.avg_acceptance_length) + ',' +
           (report.no_drafts ? "true" : "false") + '\n';
    return out;
}

std::string report_to_json(const BenchReport& report) {
    nlohmann::ordered_json doc;
    nlohmann::ordered_json summary;
    summary["S"] = report.speedup;
    summary["A_r"] = report.acceptance_rate;
    summary["A_l"] = report.avg_acceptance_length;
    summary["t_baseline"] = report.t_baseline;
    summary["t_speculative"] = report.t_speculative;
    summary["ar_forward_passes"] = report.ar_forward_passes;
    summary["sd_forward_passes"] = report.sd_forward_passes;
    summary["no_drafts"] = report.no_drafts;
    summary["ar_denominator"] =
        report.denominator == ArDenominator::kAllCandidates ? "all_candidates" : "winner_only";
    if (report.wall_t_baseline) summary["wall_t_baseline_ns"] = *report.wall_t_baseline;
    if (report.wall_t_speculative) summary["wall_t_speculative_ns"] = *report.wall_t_speculative;
    doc["summary"] = summary;

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const UtteranceRow& r : report.rows) {
        nlohmann::ordered_json row;
        row["utt"] = r.index;
        row["tokens"] = r.output_tokens;
        row["ar_passes"] = r.ar_passes;
        row["sd_passes"] = r.sd_passes;
        row["proposed"] = r.proposed;
        row["accepted"] = r.accepted;
        row["t_baseline"] = r.t_baseline;
        row["t_speculative"] = r.t_speculative;
        row["speedup"] = r.speedup;
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    return doc.dump(1, '\t') + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::string out = "param,value,S,A_r,A_l,crossover\n";
    for (const SweepRow& r : rows) {
        out += r.param + ',' + std::to_string(r.value) + ',' + fmt(r.speedup) + ',' +
               fmt(r.acceptance_rate) + ',' + fmt(r.avg_acceptance_length) + ',' +
               (r.crossover ? std::to_string(*r.crossover) : std::string()) + '\n';
    }
    return out;
}

CandidateSweepResult sweep_candidates_vs_length(const CostModel& cost,
                                                std::span<const std::uint32_t> candidate_counts,
                                                std::uint32_t max_len,
                                                std::uint32_t tokens_per_sequence) {
    if (max_len < 1 || tokens_per_sequence < 1) {
        throw InvalidConfigError("sweep ranges must be >= 1");
    }
    CandidateSweepResult result;
    const double ar_time = static_cast<double>(tokens_per_sequence) * cost.forward_cost(1);

    for (std::uint32_t k : candidate_counts) {
        if (k < 1) throw InvalidConfigError("candidate count must be >= 1");
        std::optional<std::uint32_t> crossover;
        std::vector<SweepRow> k_rows;
        for (std::uint32_t len = 1; len <= max_len; ++len) {
            // idealized workload: the winner is always fully accepted, so each
            // step costs one batch over all K drafts and advances len+1 tokens
            double t = 0.0;
            std::uint64_t accepted = 0;
            std::uint32_t produced = 0;
            std::size_t steps = 0;
            while (produced < tokens_per_sequence) {
                t += cost.forward_cost(k * len + 1) +
                     cost.candidate_overhead * static_cast<double>(k - 1);
                std::uint32_t advance =
                    std::min<std::uint32_t>(len + 1, tokens_per_sequence - produced);
                accepted += advance > 0 ? advance - 1 : 0;
                produced += advance;
                ++steps;
            }
            if (!crossover && t < ar_time) crossover = len;

            SweepRow row;
            row.param = "K=" + std::to_string(k);
            row.value = len;
            row.speedup = t > 0.0 ? ar_time / t : 0.0;
            row.acceptance_rate = 100.0;  // every proposed token is accepted in this workload
            row.avg_acceptance_length = static_cast<double>(accepted);
            k_rows.push_back(std::move(row));
        }
        for (SweepRow& row : k_rows) {
            if (crossover) row.crossover = *crossover;
            result.rows.push_back(std::move(row));
        }
        result.crossovers.emplace_back(k, crossover);
    }
    return result;
}

std::size_t thread_limit() {
    std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    const char* env = std::getenv("TOKENMAP_SD_THREADS");
    if (!env || !*env) return hw;
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end == env || *end != '\0') return hw;
    return v == 0 ? hw : std::min<std::size_t>(hw, v);
}

namespace {

// Runs fn(i) for i in [0, n) across up to thread_limit() threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::size_t threads = std::min(thread_limit(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (std::thread& th : pool) th.join();
}

}  // namespace

std::vector<NgramSweepPoint> sweep_ngram_order(const std::vector<TokenSeq>& train_sequences,
                                               const Vocab& vocab,
                                               const std::vector<TokenSeq>& test_prompts,
                                               const MainModel& model, const CostModel& cost,
                                               std::uint32_t n_from, std::uint32_t n_to,
                                               const PruneConfig& prune_config,
                                               const EngineConfig& engine_config) {
    if (n_from < 1 || n_from > n_to) throw InvalidConfigError("invalid n-gram range");

    // baseline decodes are independent of N
    std::vector<DecodeTrace> ar_traces;
    ar_traces.reserve(test_prompts.size());
    for (const TokenSeq& prompt : test_prompts) {
        ar_traces.push_back(autoregressive_decode(model, prompt, engine_config.max_output_len));
    }

    std::vector<NgramSweepPoint> points(n_to - n_from + 1);
    parallel_for(points.size(), [&](std::size_t i) {
        std::uint32_t n = n_from + static_cast<std::uint32_t>(i);
        TokenMap map = prune(build_raw_map(train_sequences, n, vocab), prune_config);
        std::vector<DecodeTrace> sd_traces;
        sd_traces.reserve(test_prompts.size());
        for (const TokenSeq& prompt : test_prompts) {
            sd_traces.push_back(speculative_decode(model, map, prompt, engine_config));
        }
        points[i].max_n = n;
        points[i].report = compute_metrics(sd_traces, ar_traces, cost);
    });
    return points;
}

}  // namespace tmsd
