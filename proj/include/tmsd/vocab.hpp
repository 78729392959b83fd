#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tmsd {

using Token = std::uint32_t;
using TokenSeq = std::vector<Token>;

inline constexpr Token kSot = 0;  ///< start-of-transcript, prepended at decode time only
inline constexpr Token kEos = 1;  ///< end-of-sequence
inline constexpr Token kUnk = 2;  ///< out-of-vocabulary word
inline constexpr Token kReservedCount = 3;

constexpr bool is_reserved(Token t) { return t < kReservedCount; }

/**
 * Bidirectional token/string mapping with fixed reserved ids.
 *
 * Ids 0..2 are SOT/EOS/UNK; corpus words get ids from 3 upward in
 * first-appearance order, which makes vocab construction deterministic.
 */
class Vocab {
public:
    Vocab();

    /// Builds a vocab from corpus sentences. Throws EmptyCorpusError on an empty corpus.
    static Vocab build(const std::vector<std::string>& corpus);

    /// Reconstructs a vocab from a serialized id->string table (map files).
    /// Throws CorruptMapError if the reserved entries are wrong.
    static Vocab from_strings(std::vector<std::string> id_to_string);

    /// Word id, or kUnk if the word is unknown.
    Token id_of(std::string_view word) const;

    const std::string& text_of(Token id) const;

    std::size_t size() const { return id_to_string_.size(); }

    const std::vector<std::string>& strings() const { return id_to_string_; }

    bool operator==(const Vocab& other) const { return id_to_string_ == other.id_to_string_; }

private:
    // If a corpus word collides with a reserved display string ("<sot>" etc.)
    // it still gets its own id >= 3; string_to_id_ then resolves the word to
    // the corpus id. The inverse property is only promised for ids >= 3.
    std::vector<std::string> id_to_string_;
    std::unordered_map<std::string, Token> string_to_id_;

    void add_word(std::string word);
};

/// Splits on whitespace, maps each piece to its id (UNK when absent) and appends EOS.
/// Pure: identical input always yields the identical sequence.
TokenSeq tokenize(std::string_view sentence, const Vocab& vocab);

/// Joins the non-reserved token strings with single spaces.
std::string detokenize(const TokenSeq& tokens, const Vocab& vocab);

/// Reads a UTF-8 corpus file, one sentence per line. Blank lines are skipped,
/// trailing whitespace (including CR) is trimmed. Throws IoError / EncodingError.
std::vector<std::string> load_corpus(const std::filesystem::path& path);

/// Whitespace split shared by tokenize and build. Handles the common Unicode
/// space codepoints in addition to ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);

/// True when the bytes form valid UTF-8.
bool is_valid_utf8(std::string_view bytes);

}  // namespace tmsd
