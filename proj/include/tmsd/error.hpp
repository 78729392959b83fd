#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tmsd {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : Error {
    using Error::Error;
};

struct EncodingError : Error {
    using Error::Error;
};

struct EmptyCorpusError : Error {
    EmptyCorpusError() : Error("corpus contains no sentences") {}
};

struct InvalidConfigError : Error {
    using Error::Error;
};

struct SchemaVersionMismatchError : Error {
    explicit SchemaVersionMismatchError(int found)
        : Error("unsupported map schema version " + std::to_string(found)) {}
};

struct CorruptMapError : Error {
    using Error::Error;
};

struct VocabMismatchError : Error {
    VocabMismatchError(std::size_t map_size, std::size_t model_size)
        : Error("token map vocab size " + std::to_string(map_size) +
                " does not match model vocab size " + std::to_string(model_size)) {}
};

struct LengthMismatchError : Error {
    using Error::Error;
};

/// Raised by merge_candidates when the two continuations share no prefix.
struct EmptyMergeError : Error {
    EmptyMergeError() : Error("candidates share no common prefix") {}
};

/// Wraps a per-item failure inside batch_decode with the item index.
struct BatchItemError : Error {
    std::size_t index;
    BatchItemError(std::size_t i, const std::string& what)
        : Error("item " + std::to_string(i) + ": " + what), index(i) {}
};

}  // namespace tmsd
