#include "tmsd/token_map.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "tmsd/error.hpp"

namespace tmsd {

namespace {
constexpr int kSchemaVersion = 1;

std::size_t common_prefix_len(const TokenSeq& a, const TokenSeq& b) {
    std::size_t n = std::min(a.size(), b.size());
    std::size_t i = 0;
    while (i < n && a[i] == b[i]) ++i;
    return i;
}
}  // namespace

bool candidate_less(const Candidate& a, const Candidate& b) {
    if (a.continuation.size() != b.continuation.size()) {
        return a.continuation.size() > b.continuation.size();
    }
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.continuation < b.continuation;
}

std::uint32_t PruneConfig::min_len_for(std::uint32_t candidate_count) const {
    auto it = min_len_by_count.find(candidate_count);
    if (it == min_len_by_count.end()) {
        throw InvalidConfigError("min_len_by_count has no entry for count " +
                                 std::to_string(candidate_count));
    }
    return it->second;
}

void PruneConfig::validate() const {
    if (max_candidates < 1) throw InvalidConfigError("max_candidates must be >= 1");
    if (min_frequency < 1) throw InvalidConfigError("min_frequency must be >= 1");
    std::uint32_t prev = 0;
    for (std::uint32_t count = 1; count <= max_candidates; ++count) {
        auto it = min_len_by_count.find(count);
        if (it == min_len_by_count.end()) {
            throw InvalidConfigError("min_len_by_count missing count " + std::to_string(count));
        }
        if (it->second < prev) {
            throw InvalidConfigError("min_len_by_count must be non-decreasing");
        }
        prev = it->second;
    }
}

std::span<const Candidate> TokenMap::lookup(const TokenSeq& context) const {
    NgramKey tail;
    for (auto it = context.rbegin(); it != context.rend() && tail.size() < max_n; ++it) {
        if (!is_reserved(*it)) tail.push_back(*it);
    }
    std::reverse(tail.begin(), tail.end());
    // longest key first
    for (std::size_t n = tail.size(); n >= 1; --n) {
        NgramKey key(tail.end() - n, tail.end());
        auto it = entries.find(key);
        if (it != entries.end()) return {it->second.data(), it->second.size()};
        if (n == 1) break;
    }
    return {};
}

std::size_t TokenMap::total_candidates() const {
    std::size_t n = 0;
    for (const auto& [key, cands] : entries) n += cands.size();
    return n;
}

bool TokenMap::operator==(const TokenMap& other) const {
    return max_n == other.max_n && prune_config == other.prune_config && vocab == other.vocab &&
           entries == other.entries;
}

TokenMap build_raw_map(const std::vector<TokenSeq>& sequences, std::uint32_t max_n, Vocab vocab) {
    if (max_n < 1) throw InvalidConfigError("max_n must be >= 1");
    TokenMap map;
    map.max_n = max_n;
    map.vocab = std::move(vocab);

    for (const TokenSeq& tokens : sequences) {
        if (tokens.empty()) continue;
        for (std::size_t p = 1; p + 1 <= tokens.size(); ++p) {
            // suffix from p is non-empty; p itself may be the final EOS slot,
            // in which case the candidate is just [EOS]
            for (std::uint32_t n = 1; n <= max_n && n <= p; ++n) {
                bool reserved_in_key = false;
                for (std::size_t k = p - n; k < p; ++k) {
                    if (is_reserved(tokens[k])) {
                        reserved_in_key = true;
                        break;
                    }
                }
                if (reserved_in_key) continue;
                NgramKey key(tokens.begin() + static_cast<std::ptrdiff_t>(p - n),
                             tokens.begin() + static_cast<std::ptrdiff_t>(p));
                TokenSeq continuation(tokens.begin() + static_cast<std::ptrdiff_t>(p), tokens.end());
                auto& cands = map.entries[key];
                auto found = std::find_if(cands.begin(), cands.end(), [&](const Candidate& c) {
                    return c.continuation == continuation;
                });
                if (found != cands.end()) {
                    found->frequency += 1;
                } else {
                    cands.push_back(Candidate{std::move(continuation), 1});
                }
            }
        }
    }
    for (auto& [key, cands] : map.entries) {
        std::sort(cands.begin(), cands.end(), candidate_less);
    }
    return map;
}

Candidate merge_candidates(const Candidate& a, const Candidate& b) {
    std::size_t lcp = common_prefix_len(a.continuation, b.continuation);
    if (lcp == 0) throw EmptyMergeError{};
    Candidate merged;
    merged.continuation.assign(a.continuation.begin(),
                               a.continuation.begin() + static_cast<std::ptrdiff_t>(lcp));
    merged.frequency = a.frequency + b.frequency;
    return merged;
}

namespace {

// Inserts a candidate into a ranked list, folding it into an existing one
// with the same continuation so the total order stays tie-free.
void insert_ranked(std::vector<Candidate>& cands, Candidate c) {
    for (auto& existing : cands) {
        if (existing.continuation == c.continuation) {
            existing.frequency += c.frequency;
            std::sort(cands.begin(), cands.end(), candidate_less);
            return;
        }
    }
    cands.push_back(std::move(c));
    std::sort(cands.begin(), cands.end(), candidate_less);
}

bool satisfies_length_floor(const std::vector<Candidate>& cands, const PruneConfig& config) {
    std::uint32_t floor = config.min_len_for(static_cast<std::uint32_t>(cands.size()));
    return std::all_of(cands.begin(), cands.end(), [&](const Candidate& c) {
        return c.continuation.size() >= floor;
    });
}

std::vector<Candidate> prune_entry(std::vector<Candidate> cands, const PruneConfig& config) {
    std::erase_if(cands, [&](const Candidate& c) { return c.frequency < config.min_frequency; });
    std::sort(cands.begin(), cands.end(), candidate_less);
    if (cands.size() > config.max_candidates) cands.resize(config.max_candidates);

    while (!cands.empty() && !satisfies_length_floor(cands, config)) {
        if (cands.size() == 1) {
            // a lone candidate below the floor cannot be rescued by merging
            cands.clear();
            break;
        }
        // nearest pair: the longest common prefix; ties go to the
        // highest-ranked pair, which is the first one found in rank order
        std::size_t best_i = 0, best_j = 1, best_lcp = 0;
        for (std::size_t i = 0; i + 1 < cands.size(); ++i) {
            for (std::size_t j = i + 1; j < cands.size(); ++j) {
                std::size_t lcp = common_prefix_len(cands[i].continuation, cands[j].continuation);
                if (lcp > best_lcp) {
                    best_lcp = lcp;
                    best_i = i;
                    best_j = j;
                }
            }
        }
        if (best_lcp == 0) {
            // nothing shares a prefix; drop the lower-ranked of the pair
            cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(best_j));
        } else {
            Candidate merged = merge_candidates(cands[best_i], cands[best_j]);
            cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(best_j));
            cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(best_i));
            insert_ranked(cands, std::move(merged));
        }
    }
    return cands;
}

}  // namespace

TokenMap prune(const TokenMap& map, const PruneConfig& config) {
    config.validate();
    TokenMap out;
    out.max_n = map.max_n;
    out.vocab = map.vocab;
    out.prune_config = config;
    for (const auto& [key, cands] : map.entries) {
        std::vector<Candidate> kept = prune_entry(cands, config);
        if (!kept.empty()) out.entries.emplace(key, std::move(kept));
    }
    return out;
}

TokenMap build_map_from_corpus(const std::vector<std::string>& corpus, std::uint32_t max_n,
                               const PruneConfig& config) {
    Vocab vocab = Vocab::build(corpus);
    std::vector<TokenSeq> sequences;
    sequences.reserve(corpus.size());
    for (const std::string& sentence : corpus) {
        sequences.push_back(tokenize(sentence, vocab));
    }
    TokenMap raw = build_raw_map(sequences, max_n, std::move(vocab));
    return prune(raw, config);
}

void save_map(const TokenMap& map, const std::filesystem::path& path) {
    nlohmann::ordered_json doc;
    doc["version"] = kSchemaVersion;
    doc["max_n"] = map.max_n;
    doc["entry_count"] = map.entries.size();
    doc["candidate_count"] = map.total_candidates();

    nlohmann::ordered_json pc;
    pc["max_candidates"] = map.prune_config.max_candidates;
    pc["min_frequency"] = map.prune_config.min_frequency;
    nlohmann::ordered_json lens = nlohmann::ordered_json::object();
    for (const auto& [count, len] : map.prune_config.min_len_by_count) {
        lens[std::to_string(count)] = len;
    }
    pc["min_len_by_count"] = lens;
    doc["prune_config"] = pc;

    doc["vocab"] = map.vocab.strings();

    // canonical key order so identical maps serialize byte-identically
    std::vector<const NgramKey*> keys;
    keys.reserve(map.entries.size());
    for (const auto& [key, cands] : map.entries) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(),
              [](const NgramKey* a, const NgramKey* b) { return *a < *b; });

    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const NgramKey* key : keys) {
        nlohmann::ordered_json entry;
        entry["key"] = *key;
        nlohmann::ordered_json cands = nlohmann::ordered_json::array();
        for (const Candidate& c : map.entries.at(*key)) {
            cands.push_back({{"c", c.continuation}, {"f", c.frequency}});
        }
        entry["candidates"] = cands;
        entries.push_back(std::move(entry));
    }
    doc["entries"] = std::move(entries);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open map file for writing: " + path.string());
    file << doc.dump(1, '\t') << '\n';
    if (!file) throw IoError("error writing map file: " + path.string());
}

TokenMap load_map(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open map file: " + path.string());

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(file);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptMapError("map file is not valid JSON: " + std::string(e.what()));
    }

    try {
        if (!doc.contains("version") || !doc["version"].is_number_integer()) {
            throw CorruptMapError("map file has no version field");
        }
        int version = doc["version"].get<int>();
        if (version != kSchemaVersion) throw SchemaVersionMismatchError(version);

        TokenMap map;
        map.max_n = doc.at("max_n").get<std::uint32_t>();
        if (map.max_n < 1) throw CorruptMapError("max_n out of range");

        const auto& pc = doc.at("prune_config");
        map.prune_config.max_candidates = pc.at("max_candidates").get<std::uint32_t>();
        map.prune_config.min_frequency = pc.at("min_frequency").get<std::uint32_t>();
        map.prune_config.min_len_by_count.clear();
        for (const auto& [count_str, len] : pc.at("min_len_by_count").items()) {
            map.prune_config.min_len_by_count.emplace(
                static_cast<std::uint32_t>(std::stoul(count_str)), len.get<std::uint32_t>());
        }

        map.vocab = Vocab::from_strings(doc.at("vocab").get<std::vector<std::string>>());

        std::size_t candidate_count = 0;
        const auto check_ids = [&](const TokenSeq& tokens) {
            for (Token t : tokens) {
                if (t >= map.vocab.size()) throw CorruptMapError("token id outside the vocab");
            }
        };
        for (const auto& entry : doc.at("entries")) {
            NgramKey key = entry.at("key").get<NgramKey>();
            if (key.empty() || key.size() > map.max_n) {
                throw CorruptMapError("entry key length out of range");
            }
            check_ids(key);
            std::vector<Candidate> cands;
            for (const auto& jc : entry.at("candidates")) {
                Candidate c;
                c.continuation = jc.at("c").get<TokenSeq>();
                c.frequency = jc.at("f").get<std::uint32_t>();
                if (c.continuation.empty() || c.frequency < 1) {
                    throw CorruptMapError("candidate fails its invariants");
                }
                check_ids(c.continuation);
                cands.push_back(std::move(c));
            }
            if (cands.empty()) throw CorruptMapError("entry without candidates");
            candidate_count += cands.size();
            if (!map.entries.emplace(std::move(key), std::move(cands)).second) {
                throw CorruptMapError("duplicate entry key");
            }
        }
        if (doc.at("entry_count").get<std::size_t>() != map.entries.size() ||
            doc.at("candidate_count").get<std::size_t>() != candidate_count) {
            throw CorruptMapError("entry/candidate counts do not match the header");
        }
        return map;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptMapError("map file schema error: " + std::string(e.what()));
    } catch (const std::invalid_argument&) {
        throw CorruptMapError("map file schema error: bad numeric field");
    }
}

}  // namespace tmsd
