#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "tmsd/hash.hpp"
#include "tmsd/vocab.hpp"

namespace tmsd {

/// An n-gram key: 1..max_n non-reserved token ids.
using NgramKey = TokenSeq;

/**
 * One continuation mined from the corpus: the token sequence that followed
 * the key at some position (running to end of sentence, EOS included), plus
 * how many times that exact (key, continuation) pair was observed.
 */
struct Candidate {
    TokenSeq continuation;
    std::uint32_t frequency = 1;

    bool operator==(const Candidate&) const = default;
};

/// Total order used to rank candidates within an entry:
/// longer first, then more frequent, then lexicographically smaller tokens.
bool candidate_less(const Candidate& a, const Candidate& b);

/**
 * Pruning thresholds. min_len_by_count[k] is the minimum continuation length
 * every candidate must reach for an entry to keep k candidates; it must be
 * defined for 1..max_candidates and non-decreasing. The defaults encode the
 * measured decode-time crossovers: a second candidate only pays for itself
 * from 9 tokens, a third from 16.
 */
struct PruneConfig {
    std::uint32_t max_candidates = 3;
    std::map<std::uint32_t, std::uint32_t> min_len_by_count = {{1, 1}, {2, 9}, {3, 16}};
    std::uint32_t min_frequency = 1;

    std::uint32_t min_len_for(std::uint32_t candidate_count) const;

    /// Throws InvalidConfigError if the invariants above do not hold.
    void validate() const;

    bool operator==(const PruneConfig&) const = default;
};

/**
 * The n-gram -> ranked-candidates dictionary driving draft proposals.
 * Immutable once built (or loaded); lookups are safe from any thread.
 */
class TokenMap {
public:
    using Entries = std::unordered_map<NgramKey, std::vector<Candidate>, TokenSeqHash>;

    std::uint32_t max_n = 3;
    PruneConfig prune_config;
    Vocab vocab;
    Entries entries;

    /// Candidates of the longest n-gram key matching the tail of `context`
    /// (reserved tokens are skipped when forming keys). Empty when nothing matches.
    std::span<const Candidate> lookup(const TokenSeq& context) const;

    std::size_t total_candidates() const;

    bool operator==(const TokenMap& other) const;
};

/**
 * Mines every (n-gram, suffix) pair from the sequences: for each position p
 * and each n in 1..max_n with p >= n, the n tokens ending at p key the full
 * remaining suffix (EOS included). Key windows containing reserved tokens are
 * skipped, since lookup never forms such keys. Duplicate (key, continuation)
 * pairs aggregate their frequency; each entry ends up sorted by candidate_less.
 */
TokenMap build_raw_map(const std::vector<TokenSeq>& sequences, std::uint32_t max_n,
                       Vocab vocab = Vocab());

/// Merges two candidates of the same key into their longest common prefix with
/// summed frequency. Throws EmptyMergeError when the prefix is empty.
Candidate merge_candidates(const Candidate& a, const Candidate& b);

/**
 * Per key: drop candidates below min_frequency, rank, truncate to
 * max_candidates, then repeatedly merge the nearest pair (longest common
 * prefix, ties by rank) while the surviving set violates the length floor for
 * its size, dropping the lower-ranked candidate of a pair that shares no
 * prefix. Keys left without candidates disappear.
 */
TokenMap prune(const TokenMap& map, const PruneConfig& config);

/// Convenience: tokenize a corpus, build the raw map and prune it.
TokenMap build_map_from_corpus(const std::vector<std::string>& corpus, std::uint32_t max_n,
                               const PruneConfig& config);

/// Versioned JSON serialization. load_map throws IoError,
/// SchemaVersionMismatchError or CorruptMapError; load(save(m)) == m.
void save_map(const TokenMap& map, const std::filesystem::path& path);
TokenMap load_map(const std::filesystem::path& path);

}  // namespace tmsd
