#include "structfile/error.hpp"

namespace structfile {

const char* errcName(Errc c) {
    switch (c) {
        case Errc::UnknownTypeName: return "UnknownTypeName";
        case Errc::ValidationError: return "ValidationError";
        case Errc::LexError: return "LexError";
        case Errc::ParseError: return "ParseError";
        case Errc::VariableSize: return "VariableSize";
        case Errc::WrongType: return "WrongType";
        case Errc::NoSuchField: return "NoSuchField";
        case Errc::FieldNotPresent: return "FieldNotPresent";
        case Errc::InactiveUnionField: return "InactiveUnionField";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::FixedSize: return "FixedSize";
        case Errc::OutOfRange: return "OutOfRange";
        case Errc::ShapeMismatch: return "ShapeMismatch";
        case Errc::StringTooLong: return "StringTooLong";
        case Errc::LossyRead: return "LossyRead";
        case Errc::TypeMismatch: return "TypeMismatch";
        case Errc::NullHandle: return "NullHandle";
        case Errc::NotOptional: return "NotOptional";
        case Errc::ReadOnly: return "ReadOnly";
        case Errc::AtEnd: return "AtEnd";
        case Errc::NoChildren: return "NoChildren";
        case Errc::AtRoot: return "AtRoot";
        case Errc::PathSyntax: return "PathSyntax";
        case Errc::UnboundAny: return "UnboundAny";
        case Errc::AlreadyBound: return "AlreadyBound";
        case Errc::NotAnyType: return "NotAnyType";
        case Errc::TextSyntaxError: return "TextSyntaxError";
        case Errc::TypeMismatchInData: return "TypeMismatchInData";
        case Errc::BadMagic: return "BadMagic";
        case Errc::UnsupportedVersion: return "UnsupportedVersion";
        case Errc::UnknownFlag: return "UnknownFlag";
        case Errc::WrongMode: return "WrongMode";
        case Errc::Truncated: return "Truncated";
        case Errc::BadOptionalTag: return "BadOptionalTag";
        case Errc::BadUnionSelector: return "BadUnionSelector";
        case Errc::NegativeCount: return "NegativeCount";
        case Errc::CountOverflow: return "CountOverflow";
        case Errc::AnyTypeParseError: return "AnyTypeParseError";
        case Errc::NotSeekable: return "NotSeekable";
        case Errc::CursorOrderViolation: return "CursorOrderViolation";
        case Errc::WriteOnlySession: return "WriteOnlySession";
        case Errc::IncompletePrefix: return "IncompletePrefix";
        case Errc::IoError: return "IoError";
        case Errc::BlockLocked: return "BlockLocked";
        case Errc::BadAddress: return "BadAddress";
        case Errc::StoreCorrupt: return "StoreCorrupt";
        case Errc::DoubleRelease: return "DoubleRelease";
        case Errc::UnsetReference: return "UnsetReference";
        case Errc::BadDescriptor: return "BadDescriptor";
    }
    return "UnknownError";
}

}  // namespace structfile
