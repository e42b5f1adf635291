#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace structfile {

// Every failure mode of the library, one code each. The CLI maps these to
// exit statuses; tests match on them.
enum class Errc {
    // type system / type language
    UnknownTypeName,
    ValidationError,
    LexError,
    ParseError,
    VariableSize,
    // data access
    WrongType,
    NoSuchField,
    FieldNotPresent,
    InactiveUnionField,
    IndexOutOfRange,
    FixedSize,
    OutOfRange,
    ShapeMismatch,
    StringTooLong,
    LossyRead,
    TypeMismatch,
    NullHandle,
    NotOptional,
    ReadOnly,
    // tree cursor
    AtEnd,
    NoChildren,
    AtRoot,
    // path expressions
    PathSyntax,
    // any-type
    UnboundAny,
    AlreadyBound,
    NotAnyType,
    // text data
    TextSyntaxError,
    TypeMismatchInData,
    // file header / binary stream
    BadMagic,
    UnsupportedVersion,
    UnknownFlag,
    WrongMode,
    Truncated,
    BadOptionalTag,
    BadUnionSelector,
    NegativeCount,
    CountOverflow,
    AnyTypeParseError,
    NotSeekable,
    CursorOrderViolation,
    WriteOnlySession,
    IncompletePrefix,
    IoError,
    // block store
    BlockLocked,
    BadAddress,
    StoreCorrupt,
    DoubleRelease,
    UnsetReference,
    // type descriptors
    BadDescriptor,
};

const char* errcName(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(errcName(code)) + ": " + message), code_(code) {}
    Error(Errc code, const std::string& message, std::uint64_t offset)
        : std::runtime_error(std::string(errcName(code)) + ": " + message +
                             " (at byte offset " + std::to_string(offset) + ")"),
          code_(code),
          offset_(offset) {}

    Errc code() const { return code_; }
    // Byte offset into the input for decode/scan errors, when known.
    const std::optional<std::uint64_t>& offset() const { return offset_; }

private:
    Errc code_;
    std::optional<std::uint64_t> offset_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }
[[noreturn]] inline void failAt(Errc code, const std::string& message, std::uint64_t offset) {
    throw Error(code, message, offset);
}

}  // namespace structfile
