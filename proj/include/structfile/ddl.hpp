#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "structfile/types.hpp"

namespace structfile {

// Textual type language:
//
//   unit      := { typedef } type [';']
//   typedef   := 'typedef' ident '=' type ';'
//   type      := numtype | strtype | structtype | arraytype | 'type' ident | 'any'
//   numtype   := ('integer'|'real') ['*' INT] [dims]
//   dims      := '[' dim {',' dim} ']' ;  dim := INT | '.'
//   strtype   := ('string'|'opaque') ['*' INT]
//   structtype:= ('struct'|'union') '{' { field } '}'
//   field     := ['optional'] ident ':' type ';'
//   arraytype := 'array' ['[' dim ']'] 'of' type
//
// 'array of T' without a bracket means a free size. The semicolon after the
// last field of a struct and after the root type may be omitted on input.

struct Token {
    enum class Kind { Word, Integer, Punct, Dot, End };
    Kind kind = Kind::End;
    std::string text;       // word spelling or punctuation character
    std::int64_t value = 0; // for Integer
    int line = 1;
    int column = 1;
};

// Splits the type language into tokens; throws LexError on illegal input.
std::vector<Token> tokenize(std::string_view src);

enum class TypeHead { Num, String, StructOrUnion, Array, Named, Any };

// Pure one-token lookahead: which production will parse the construct that
// starts at this token. Throws ParseError when no type can start here.
TypeHead typeHeadOf(const Token& t);

// Parses a complete unit and validates the resulting environment.
EnvPtr parseTypeText(std::string_view src);

}  // namespace structfile
