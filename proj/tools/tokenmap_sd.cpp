// tokenmap-sd: build token maps from domain corpora, decode with map-drafted
// speculation against a corpus language model, and benchmark the result under
// a deterministic cost model.
//
// Exit codes: 0 ok, 1 I/O failure, 2 invalid configuration, 3 vocab mismatch.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "tmsd/bench.hpp"
#include "tmsd/engine.hpp"
#include "tmsd/error.hpp"
#include "tmsd/lm.hpp"
#include "tmsd/synth.hpp"
#include "tmsd/token_map.hpp"
#include "tmsd/vocab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitVocabMismatch = 3;

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string format = "json";
    bool quiet = false;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw tmsd::IoError("cannot open output file: " + path);
    file << content;
    if (!file) throw tmsd::IoError("error writing output file: " + path);
}

std::pair<std::uint32_t, std::uint32_t> parse_range(const std::string& text) {
    auto sep = text.find("..");
    if (sep == std::string::npos) {
        throw tmsd::InvalidConfigError("range must look like A..B, got: " + text);
    }
    try {
        unsigned long a = std::stoul(text.substr(0, sep));
        unsigned long b = std::stoul(text.substr(sep + 2));
        if (a < 1 || b < a) throw tmsd::InvalidConfigError("range is empty or reversed: " + text);
        return {static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
    } catch (const std::logic_error&) {
        throw tmsd::InvalidConfigError("range must look like A..B, got: " + text);
    }
}

std::vector<tmsd::TokenSeq> tokenize_all(const std::vector<std::string>& corpus,
                                         const tmsd::Vocab& vocab) {
    std::vector<tmsd::TokenSeq> out;
    out.reserve(corpus.size());
    for (const std::string& line : corpus) out.push_back(tmsd::tokenize(line, vocab));
    return out;
}

// Decode prompts for benchmarking: SOT plus the first few tokens of each
// utterance, standing in for the external conditioning a real decoder gets.
std::vector<tmsd::TokenSeq> make_prompts(const std::vector<tmsd::TokenSeq>& sequences,
                                         std::size_t prompt_tokens) {
    std::vector<tmsd::TokenSeq> prompts;
    prompts.reserve(sequences.size());
    for (const tmsd::TokenSeq& seq : sequences) {
        tmsd::TokenSeq prompt{tmsd::kSot};
        for (std::size_t i = 0; i < seq.size() && i < prompt_tokens; ++i) {
            if (seq[i] == tmsd::kEos) break;
            prompt.push_back(seq[i]);
        }
        prompts.push_back(std::move(prompt));
    }
    return prompts;
}

// The language model tokenizes its corpus with the map's vocab so the two
// sides agree on token ids; the mismatch check compares vocabulary sizes.
tmsd::CorpusLM build_model(const std::vector<std::string>& model_corpus,
                           const tmsd::TokenMap& map, std::uint32_t order) {
    tmsd::Vocab model_vocab = tmsd::Vocab::build(model_corpus);
    if (model_vocab.size() != map.vocab.size()) {
        throw tmsd::VocabMismatchError(map.vocab.size(), model_vocab.size());
    }
    return tmsd::CorpusLM(tokenize_all(model_corpus, map.vocab), map.vocab.size(), order);
}

int cmd_build_map(const GlobalOpts& g, const std::string& corpus_path, const std::string& out_path,
                  std::uint32_t max_n, std::uint32_t max_candidates, std::uint32_t min_len_2,
                  std::uint32_t min_len_3, std::uint32_t min_freq) {
    if (max_n < 1) throw tmsd::InvalidConfigError("--max-n must be >= 1");
    tmsd::PruneConfig config;
    config.max_candidates = max_candidates;
    config.min_frequency = min_freq;
    config.min_len_by_count = {{1, 1}, {2, min_len_2}, {3, min_len_3}};
    for (std::uint32_t count = 4; count <= max_candidates; ++count) {
        config.min_len_by_count[count] = min_len_3;
    }
    config.validate();

    std::vector<std::string> corpus = tmsd::load_corpus(corpus_path);
    tmsd::Vocab vocab = tmsd::Vocab::build(corpus);
    tmsd::TokenMap raw = tmsd::build_raw_map(tokenize_all(corpus, vocab), max_n, vocab);
    tmsd::TokenMap pruned = tmsd::prune(raw, config);
    tmsd::save_map(pruned, out_path);

    if (!g.quiet) {
        std::printf("keys=%zu candidates=%zu raw_keys=%zu raw_candidates=%zu pruned_keys=%zu "
                    "pruned_candidates=%zu\n",
                    pruned.entries.size(), pruned.total_candidates(), raw.entries.size(),
                    raw.total_candidates(), raw.entries.size() - pruned.entries.size(),
                    raw.total_candidates() - pruned.total_candidates());
    }
    return kExitOk;
}

int cmd_decode(const GlobalOpts& g, const std::string& map_path, const std::string& model_corpus,
               const std::string& prompt_text, double noise, std::uint32_t max_len,
               std::uint32_t model_order) {
    tmsd::TokenMap map = tmsd::load_map(map_path);
    tmsd::CorpusLM corpus_lm = build_model(tmsd::load_corpus(model_corpus), map, model_order);
    tmsd::NoisyLM noisy(corpus_lm, noise, g.seed);
    const tmsd::MainModel& model =
        noise > 0.0 ? static_cast<const tmsd::MainModel&>(noisy) : corpus_lm;

    tmsd::TokenSeq prompt{tmsd::kSot};
    for (tmsd::Token t : tmsd::tokenize(prompt_text, map.vocab)) {
        if (t != tmsd::kEos) prompt.push_back(t);
    }

    tmsd::EngineConfig config;
    config.max_output_len = max_len;
    tmsd::DecodeTrace trace = tmsd::speculative_decode(model, map, prompt, config);

    std::uint64_t proposed = 0;
    std::uint64_t accepted = 0;
    for (const tmsd::StepRecord& step : trace.steps) {
        proposed += step.proposed;
        accepted += step.accepted;
    }
    std::printf("%s\n", tmsd::detokenize(trace.output, map.vocab).c_str());
    if (!g.quiet) {
        std::printf("forward_passes=%zu accepted=%llu proposed=%llu generated=%zu\n",
                    trace.forward_passes(), static_cast<unsigned long long>(accepted),
                    static_cast<unsigned long long>(proposed),
                    trace.output.size() - prompt.size());
    }
    return kExitOk;
}

int cmd_bench(const GlobalOpts& g, const std::string& map_path, const std::string& model_corpus,
              const std::string& test_path, double noise, const std::string& cost_preset,
              const std::string& out_path, std::uint32_t max_len, std::size_t prompt_tokens,
              std::uint32_t model_order, const std::string& denominator_name, bool wall_clock) {
    tmsd::TokenMap map = tmsd::load_map(map_path);
    tmsd::CorpusLM corpus_lm = build_model(tmsd::load_corpus(model_corpus), map, model_order);
    tmsd::NoisyLM noisy(corpus_lm, noise, g.seed);
    const tmsd::MainModel& model =
        noise > 0.0 ? static_cast<const tmsd::MainModel&>(noisy) : corpus_lm;

    tmsd::ArDenominator denominator;
    if (denominator_name == "all") {
        denominator = tmsd::ArDenominator::kAllCandidates;
    } else if (denominator_name == "winner") {
        denominator = tmsd::ArDenominator::kWinnerOnly;
    } else {
        throw tmsd::InvalidConfigError("--ar-denominator must be all or winner");
    }

    std::vector<tmsd::TokenSeq> test_sequences =
        tokenize_all(tmsd::load_corpus(test_path), map.vocab);
    std::vector<tmsd::TokenSeq> prompts = make_prompts(test_sequences, prompt_tokens);

    tmsd::EngineConfig config;
    config.max_output_len = max_len;

    using Clock = std::chrono::steady_clock;
    std::vector<tmsd::DecodeTrace> ar_traces;
    ar_traces.reserve(prompts.size());
    auto ar_start = Clock::now();
    for (const tmsd::TokenSeq& prompt : prompts) {
        ar_traces.push_back(tmsd::autoregressive_decode(model, prompt, config.max_output_len));
    }
    auto ar_elapsed = Clock::now() - ar_start;

    auto sd_start = Clock::now();
    std::vector<tmsd::DecodeTrace> sd_traces = tmsd::batch_decode(model, map, prompts, config);
    auto sd_elapsed = Clock::now() - sd_start;

    tmsd::BenchReport report = tmsd::compute_metrics(sd_traces, ar_traces,
                                                     tmsd::CostModel::preset(cost_preset),
                                                     denominator);
    if (wall_clock) {
        report.wall_t_baseline = static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(ar_elapsed).count());
        report.wall_t_speculative = static_cast<double>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(sd_elapsed).count());
    }

    write_file(out_path, g.format == "csv" ? tmsd::report_to_csv(report)
                                           : tmsd::report_to_json(report));
    if (!g.quiet) {
        std::printf("S=%.4f A_r=%.2f A_l=%.4f utterances=%zu%s\n", report.speedup,
                    report.acceptance_rate, report.avg_acceptance_length, report.rows.size(),
                    report.no_drafts ? " no_drafts" : "");
    }
    return kExitOk;
}

int cmd_sweep_ngram(const GlobalOpts& g, const std::string& train_path,
                    const std::string& test_path, const std::string& range_text,
                    const std::string& cost_preset, const std::string& out_path,
                    std::size_t prompt_tokens, std::uint32_t model_order) {
    auto [n_from, n_to] = parse_range(range_text);
    if (n_to > 8) throw tmsd::InvalidConfigError("n-gram range must stay within 1..8");

    std::vector<std::string> train = tmsd::load_corpus(train_path);
    tmsd::Vocab vocab = tmsd::Vocab::build(train);
    std::vector<tmsd::TokenSeq> train_sequences = tokenize_all(train, vocab);
    tmsd::CorpusLM model(train_sequences, vocab.size(), model_order);

    std::vector<tmsd::TokenSeq> test_sequences =
        tokenize_all(tmsd::load_corpus(test_path), vocab);
    std::vector<tmsd::TokenSeq> prompts = make_prompts(test_sequences, prompt_tokens);

    std::vector<tmsd::NgramSweepPoint> points =
        tmsd::sweep_ngram_order(train_sequences, vocab, prompts, model,
                                tmsd::CostModel::preset(cost_preset), n_from, n_to);

    std::vector<tmsd::SweepRow> rows;
    const tmsd::NgramSweepPoint* best = nullptr;
    for (const tmsd::NgramSweepPoint& point : points) {
        tmsd::SweepRow row;
        row.param = "N";
        row.value = point.max_n;
        row.speedup = point.report.speedup;
        row.acceptance_rate = point.report.acceptance_rate;
        row.avg_acceptance_length = point.report.avg_acceptance_length;
        rows.push_back(std::move(row));
        if (!best || point.report.speedup > best->report.speedup) best = &point;
    }
    write_file(out_path, tmsd::sweep_to_csv(rows));
    if (!g.quiet && best) {
        std::printf("best N=%u S=%.4f\n", best->max_n, best->report.speedup);
    }
    return kExitOk;
}

int cmd_sweep_candidates(const GlobalOpts& g, const std::string& k_range_text,
                         const std::string& len_range_text, std::uint32_t tokens,
                         const std::string& cost_preset, const std::string& out_path) {
    auto [k_from, k_to] = parse_range(k_range_text);
    auto [len_from, len_to] = parse_range(len_range_text);
    if (len_from != 1) throw tmsd::InvalidConfigError("--len-range must start at 1");

    std::vector<std::uint32_t> ks;
    for (std::uint32_t k = k_from; k <= k_to; ++k) ks.push_back(k);
    tmsd::CandidateSweepResult result = tmsd::sweep_candidates_vs_length(
        tmsd::CostModel::preset(cost_preset), ks, len_to, tokens);

    write_file(out_path, tmsd::sweep_to_csv(result.rows));
    if (!g.quiet) {
        for (const auto& [k, crossover] : result.crossovers) {
            if (crossover) {
                std::printf("K=%u crossover=%u\n", k, *crossover);
            } else {
                std::printf("K=%u crossover=none\n", k);
            }
        }
    }
    return kExitOk;
}

int cmd_demo_corpus(const GlobalOpts& g, const std::string& kind_name, std::size_t sentences,
                    const std::string& out_path) {
    std::vector<std::string> corpus =
        tmsd::generate_corpus(tmsd::corpus_kind_from_name(kind_name), sentences, g.seed);
    std::string content;
    for (const std::string& line : corpus) {
        content += line;
        content += '\n';
    }
    write_file(out_path, content);
    if (!g.quiet) std::printf("sentences=%zu\n", corpus.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"model-free speculative decoding with token-map drafting"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "seed for noise models and corpus generation");
    app.add_option("--format", g.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--quiet", g.quiet, "suppress summary lines on stdout");

    auto* build = app.add_subcommand("build-map", "mine an n-gram token map from a corpus");
    std::string corpus_path, out_path;
    std::uint32_t max_n = 3, max_candidates = 3, min_len_2 = 9, min_len_3 = 16, min_freq = 1;
    build->add_option("--corpus", corpus_path, "training corpus, one sentence per line")
        ->required();
    build->add_option("--out", out_path, "output map file")->required();
    build->add_option("--max-n", max_n, "maximum n-gram key length");
    build->add_option("--max-candidates", max_candidates, "candidates kept per key");
    build->add_option("--min-len-2", min_len_2, "minimum continuation length at 2 candidates");
    build->add_option("--min-len-3", min_len_3, "minimum continuation length at 3 candidates");
    build->add_option("--min-freq", min_freq, "minimum candidate frequency");

    auto* decode = app.add_subcommand("decode", "speculatively decode one prompt");
    std::string map_path, model_corpus, prompt_text;
    double noise = 0.0;
    std::uint32_t max_len = 448, model_order = 4;
    decode->add_option("--map", map_path, "token map file")->required();
    decode->add_option("--model-corpus", model_corpus, "corpus the main model is built from")
        ->required();
    decode->add_option("--prompt", prompt_text, "prompt text")->required();
    decode->add_option("--noise", noise, "main-model deviation rate")
        ->check(CLI::Range(0.0, 1.0));
    decode->add_option("--max-len", max_len, "maximum generated tokens");
    decode->add_option("--model-order", model_order, "backoff order of the corpus model");

    auto* bench = app.add_subcommand("bench", "benchmark speculative against baseline decoding");
    std::string test_path, cost_preset = "paper-fit", denominator = "all";
    std::size_t prompt_tokens = 2;
    bool wall_clock = false;
    bench->add_option("--map", map_path, "token map file")->required();
    bench->add_option("--model-corpus", model_corpus, "corpus the main model is built from")
        ->required();
    bench->add_option("--test", test_path, "test utterances, one per line")->required();
    bench->add_option("--noise", noise, "main-model deviation rate")
        ->check(CLI::Range(0.0, 1.0));
    bench->add_option("--cost-preset", cost_preset, "cost model preset")
        ->check(CLI::IsMember({"paper-fit", "forward-pass"}));
    bench->add_option("--out", out_path, "report output path")->required();
    bench->add_option("--max-len", max_len, "maximum generated tokens");
    bench->add_option("--prompt-tokens", prompt_tokens, "utterance tokens used as the prompt");
    bench->add_option("--model-order", model_order, "backoff order of the corpus model");
    bench->add_option("--ar-denominator", denominator,
                      "count proposals from all candidates or the winner only")
        ->check(CLI::IsMember({"all", "winner"}));
    bench->add_flag("--wall-clock", wall_clock, "also record wall-clock times");

    auto* sweep = app.add_subcommand("sweep", "parameter sweeps over N or candidate count");
    std::string mode, range_text = "1..6", k_range_text = "1..4", len_range_text = "1..32";
    std::string train_path, sweep_cost_preset;
    std::uint32_t sweep_tokens = 100;
    sweep->add_option("--mode", mode, "ngram or candidates")
        ->required()
        ->check(CLI::IsMember({"ngram", "candidates"}));
    sweep->add_option("--train", train_path, "training corpus (ngram mode)");
    sweep->add_option("--test", test_path, "test corpus (ngram mode)");
    sweep->add_option("--range", range_text, "n-gram length range A..B (ngram mode)");
    sweep->add_option("--k-range", k_range_text, "candidate count range A..B (candidates mode)");
    sweep->add_option("--len-range", len_range_text, "draft length range 1..B (candidates mode)");
    sweep->add_option("--tokens", sweep_tokens, "tokens per simulated sequence (candidates mode)");
    sweep->add_option("--cost-preset", sweep_cost_preset, "cost model preset")
        ->check(CLI::IsMember({"paper-fit", "forward-pass"}));
    sweep->add_option("--out", out_path, "sweep table output path")->required();
    sweep->add_option("--prompt-tokens", prompt_tokens, "utterance tokens used as the prompt");
    sweep->add_option("--model-order", model_order, "backoff order of the corpus model");

    auto* demo = app.add_subcommand("demo-corpus", "generate a synthetic corpus");
    std::string kind_name = "maintenance";
    std::size_t sentences = 1000;
    demo->add_option("--kind", kind_name, "maintenance or random")
        ->check(CLI::IsMember({"maintenance", "random"}));
    demo->add_option("--sentences", sentences, "number of sentences");
    demo->add_option("--out", out_path, "corpus output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (build->parsed()) {
            return cmd_build_map(g, corpus_path, out_path, max_n, max_candidates, min_len_2,
                                 min_len_3, min_freq);
        }
        if (decode->parsed()) {
            return cmd_decode(g, map_path, model_corpus, prompt_text, noise, max_len, model_order);
        }
        if (bench->parsed()) {
            return cmd_bench(g, map_path, model_corpus, test_path, noise, cost_preset, out_path,
                             max_len, prompt_tokens, model_order, denominator, wall_clock);
        }
        if (sweep->parsed()) {
            if (mode == "ngram") {
                if (train_path.empty() || test_path.empty()) {
                    throw tmsd::InvalidConfigError("ngram sweep needs --train and --test");
                }
                return cmd_sweep_ngram(g, train_path, test_path, range_text,
                                       sweep_cost_preset.empty() ? "forward-pass"
                                                                 : sweep_cost_preset,
                                       out_path, prompt_tokens, model_order);
            }
            return cmd_sweep_candidates(g, k_range_text, len_range_text, sweep_tokens,
                                        sweep_cost_preset.empty() ? "paper-fit"
                                                                  : sweep_cost_preset,
                                        out_path);
        }
        if (demo->parsed()) {
            return cmd_demo_corpus(g, kind_name, sentences, out_path);
        }
        return kExitConfig;
    } catch (const tmsd::VocabMismatchError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitVocabMismatch;
    } catch (const tmsd::InvalidConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const tmsd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
}
