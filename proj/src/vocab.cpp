#include "tmsd/vocab.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "tmsd/error.hpp"

namespace tmsd {
namespace {

constexpr const char* kReservedNames[kReservedCount] = {"<sot>", "<eos>", "<unk>"};

// Decodes one UTF-8 codepoint starting at `i`; advances `i` past it.
// Returns 0xFFFFFFFF on malformed input.
std::uint32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char b0 = byte(i);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    std::uint32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFFFFFF;
    }
    if (i + len > s.size()) {
        i = s.size();
        return 0xFFFFFFFF;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char b = byte(i + k);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFFFFFF;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += len;
    // overlong forms and surrogates
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
        return 0xFFFFFFFF;
    }
    return cp;
}

bool is_space_cp(std::uint32_t cp) {
    switch (cp) {
        case ' ':
        case '\t':
        case '\n':
        case '\r':
        case '\v':
        case '\f':
        case 0x00A0:  // no-break space
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

}  // namespace

bool is_valid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        if (next_codepoint(bytes, i) == 0xFFFFFFFF) return false;
    }
    return true;
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    std::size_t word_start = 0;
    bool in_word = false;
    while (i < text.size()) {
        std::size_t cp_start = i;
        std::uint32_t cp = next_codepoint(text, i);
        if (is_space_cp(cp)) {
            if (in_word) {
                words.emplace_back(text.substr(word_start, cp_start - word_start));
                in_word = false;
            }
        } else if (!in_word) {
            word_start = cp_start;
            in_word = true;
        }
    }
    if (in_word) words.emplace_back(text.substr(word_start));
    return words;
}

Vocab::Vocab() {
    for (const char* name : kReservedNames) {
        id_to_string_.emplace_back(name);
    }
    // Reserved names intentionally left out of string_to_id_: a corpus word
    // spelled like one maps to its own id, never to a reserved id.
}

void Vocab::add_word(std::string word) {
    if (string_to_id_.contains(word)) return;
    Token id = static_cast<Token>(id_to_string_.size());
    string_to_id_.emplace(word, id);
    id_to_string_.push_back(std::move(word));
}

Vocab Vocab::build(const std::vector<std::string>& corpus) {
    if (corpus.empty()) throw EmptyCorpusError{};
    Vocab v;
    for (const std::string& sentence : corpus) {
        for (std::string& word : split_words(sentence)) {
            v.add_word(std::move(word));
        }
    }
    return v;
}

Vocab Vocab::from_strings(std::vector<std::string> id_to_string) {
    if (id_to_string.size() < kReservedCount) {
        throw CorruptMapError("vocab table shorter than the reserved range");
    }
    for (Token i = 0; i < kReservedCount; ++i) {
        if (id_to_string[i] != kReservedNames[i]) {
            throw CorruptMapError("vocab table reserved entries are wrong");
        }
    }
    Vocab v;
    v.id_to_string_ = std::move(id_to_string);
    for (Token id = kReservedCount; id < v.id_to_string_.size(); ++id) {
        v.string_to_id_.emplace(v.id_to_string_[id], id);
    }
    return v;
}

Token Vocab::id_of(std::string_view word) const {
    auto it = string_to_id_.find(std::string(word));
    return it == string_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocab::text_of(Token id) const {
    if (id >= id_to_string_.size()) {
        throw Error("token id " + std::to_string(id) + " out of range");
    }
    return id_to_string_[id];
}

TokenSeq tokenize(std::string_view sentence, const Vocab& vocab) {
    TokenSeq out;
    for (const std::string& word : split_words(sentence)) {
        out.push_back(vocab.id_of(word));
    }
    out.push_back(kEos);
    return out;
}

std::string detokenize(const TokenSeq& tokens, const Vocab& vocab) {
    std::string out;
    for (Token t : tokens) {
        if (is_reserved(t)) continue;
        if (!out.empty()) out += ' ';
        out += vocab.text_of(t);
    }
    return out;
}

std::vector<std::string> load_corpus(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open corpus file: " + path.string());
    std::ostringstream buf;
    buf << file.rdbuf();
    if (file.bad()) throw IoError("error reading corpus file: " + path.string());
    std::string all = buf.str();
    if (!is_valid_utf8(all)) throw EncodingError("corpus file is not valid UTF-8: " + path.string());

    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= all.size()) {
        std::size_t end = all.find('\n', start);
        if (end == std::string::npos) end = all.size();
        std::string_view line(all.data() + start, end - start);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.remove_suffix(1);
        }
        if (!line.empty()) lines.emplace_back(line);
        if (end == all.size()) break;
        start = end + 1;
    }
    return lines;
}

}  // namespace tmsd
