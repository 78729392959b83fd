#include "tmsd/synth.hpp"

#include <random>

#include "tmsd/error.hpp"

namespace tmsd {

namespace {

// mt19937_64 output is specified by the standard; taking values modulo small
// ranges keeps generation portable, unlike std::uniform_int_distribution.
std::size_t pick(std::mt19937_64& rng, std::size_t n) { return rng() % n; }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

const std::vector<std::string> kDevices = {
    "compressor", "pump",     "valve",    "turbine",  "regulator",
    "manifold",   "fan",      "gearbox",  "injector", "bearing",
};

struct Measure {
    const char* name;
    const char* unit;
};

const std::vector<Measure> kMeasures = {
    {"pressure", "psi"},   {"temperature", "celsius"}, {"vibration", "hertz"},
    {"voltage", "volts"},  {"flow", "liters"},
};

const std::vector<std::string> kValues = {
    "ten", "twenty", "thirty", "forty", "fifty", "sixty", "eighty", "hundred",
};

// Values correlate with the device, which sits several tokens before the
// value slot, while "fifty" stays the most common value overall.
std::string pick_value(std::mt19937_64& rng, std::size_t device) {
    double u = unit(rng);
    if (u < 0.55) return kValues[device % kValues.size()];
    if (u < 0.85) return "fifty";
    return kValues[pick(rng, kValues.size())];
}

std::string maintenance_sentence(std::mt19937_64& rng) {
    std::size_t dev = pick(rng, kDevices.size());
    const Measure& m = kMeasures[pick(rng, kMeasures.size())];
    const std::string& device = kDevices[dev];

    switch (pick(rng, 12)) {
        case 0:
        case 1:
        case 2:
        case 3:
            return "check " + device + " status " + m.name + " reading " + pick_value(rng, dev) +
                   " " + m.unit;
        case 4:
        case 5:
        case 6:
            return "inspect " + device + " assembly then record " + m.name + " level " +
                   pick_value(rng, dev) + " " + m.unit;
        case 7:
        case 8:
            return "routine service on " + device + " completed " + m.name + " steady at " +
                   pick_value(rng, dev) + " " + m.unit;
        case 9:
        case 10:
            return "replace " + device + " filter and confirm " + m.name + " reading " +
                   pick_value(rng, dev) + " " + m.unit + " after test";
        default:
            return "shutdown " + device + " for safety review";
    }
}

std::string random_sentence(std::mt19937_64& rng) {
    std::size_t len = 5 + pick(rng, 5);  // 5..9 tokens
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (i > 0) out += ' ';
        std::size_t w = pick(rng, 64);
        out += 'w';
        out += static_cast<char>('0' + w / 10);
        out += static_cast<char>('0' + w % 10);
    }
    return out;
}

}  // namespace

CorpusKind corpus_kind_from_name(const std::string& name) {
    if (name == "maintenance") return CorpusKind::kMaintenance;
    if (name == "random") return CorpusKind::kRandom;
    throw InvalidConfigError("unknown corpus kind: " + name);
}

std::vector<std::string> generate_corpus(CorpusKind kind, std::size_t sentences,
                                         std::uint64_t seed) {
    if (sentences == 0) throw InvalidConfigError("corpus must have at least one sentence");
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    out.reserve(sentences);
    for (std::size_t i = 0; i < sentences; ++i) {
        out.push_back(kind == CorpusKind::kMaintenance ? maintenance_sentence(rng)
                                                       : random_sentence(rng));
    }
    return out;
}

}  // namespace tmsd
