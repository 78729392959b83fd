#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tmsd {

enum class CorpusKind {
    /// Templated maintenance commands: a device name followed by measurement
    /// phrases and values. Low perplexity, with value statistics that depend
    /// on the device mentioned earlier in the sentence.
    kMaintenance,
    /// Uniform random tokens over a flat vocabulary. High perplexity.
    kRandom,
};

CorpusKind corpus_kind_from_name(const std::string& name);

/// Deterministic corpus generator: same (kind, sentences, seed) always yields
/// the same lines, independent of platform.
std::vector<std::string> generate_corpus(CorpusKind kind, std::size_t sentences,
                                         std::uint64_t seed);

}  // namespace tmsd
