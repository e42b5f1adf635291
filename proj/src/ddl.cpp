#include "structfile/ddl.hpp"

#include <cctype>

namespace structfile {

namespace {

bool isIdentStart(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool isIdentCont(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string atPos(const Token& t) {
    return " at line " + std::to_string(t.line) + ", column " + std::to_string(t.column);
}

[[noreturn]] void parseFail(const Token& t, const std::string& expected) {
    std::string got = t.kind == Token::Kind::End ? "end of input" : "'" + t.text + "'";
    fail(Errc::ParseError, "expected " + expected + ", got " + got + atPos(t));
}

}  // namespace

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k) {
            if (src[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (isIdentStart(c)) {
            std::size_t j = i + 1;
            while (j < src.size() && isIdentCont(src[j])) ++j;
            t.kind = Token::Kind::Word;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            std::int64_t v = 0;
            bool overflow = false;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) {
                int d = src[j] - '0';
                if (v > (INT64_MAX - d) / 10) overflow = true;
                if (!overflow) v = v * 10 + d;
                ++j;
            }
            if (overflow)
                fail(Errc::LexError, "integer literal too large" + atPos(t));
            t.kind = Token::Kind::Integer;
            t.text = std::string(src.substr(i, j - i));
            t.value = v;
            advance(j - i);
        } else if (c == '.') {
            t.kind = Token::Kind::Dot;
            t.text = ".";
            advance(1);
        } else if (std::string_view("{}[]()*,:;=").find(c) != std::string_view::npos) {
            t.kind = Token::Kind::Punct;
            t.text = std::string(1, c);
            advance(1);
        } else {
            fail(Errc::LexError, "illegal character '" + std::string(1, c) + "' at line " +
                                     std::to_string(line) + ", column " + std::to_string(col));
        }
        out.push_back(std::move(t));
    }
    Token end;
    end.kind = Token::Kind::End;
    end.line = line;
    end.column = col;
    out.push_back(std::move(end));
    return out;
}

TypeHead typeHeadOf(const Token& t) {
    if (t.kind == Token::Kind::Word) {
        if (t.text == "integer" || t.text == "real") return TypeHead::Num;
        if (t.text == "string" || t.text == "opaque") return TypeHead::String;
        if (t.text == "struct" || t.text == "union") return TypeHead::StructOrUnion;
        if (t.text == "array") return TypeHead::Array;
        if (t.text == "type") return TypeHead::Named;
        if (t.text == "any") return TypeHead::Any;
    }
    parseFail(t, "a type");
}

namespace {

constexpr int kMaxNestingDepth = 256;

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(tokenize(src)) {}

    EnvPtr parseUnit() {
        std::map<std::string, TypePtr, std::less<>> defs;
        while (peek().kind == Token::Kind::Word && peek().text == "typedef") {
            next();
            Token name = expectWord("type name");
            expectPunct("=");
            TypePtr body = parseType(0);
            // The terminating semicolon is commonly omitted after a closing
            // brace; accept both forms.
            tryPunct(";");
            if (!defs.emplace(name.text, std::move(body)).second)
                fail(Errc::ParseError, "duplicate typedef '" + name.text + "'" + atPos(name));
        }
        TypePtr root = parseType(0);
        if (peek().kind == Token::Kind::Punct && peek().text == ";") next();
        if (peek().kind != Token::Kind::End) parseFail(peek(), "end of input");
        return TypeEnv::make(std::move(root), std::move(defs));
    }

private:
    const Token& peek(std::size_t ahead = 0) const {
        std::size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    Token expectWord(const std::string& what) {
        if (peek().kind != Token::Kind::Word) parseFail(peek(), what);
        return next();
    }
    void expectPunct(const std::string& p) {
        if (peek().kind != Token::Kind::Punct || peek().text != p) parseFail(peek(), "'" + p + "'");
        next();
    }
    bool tryPunct(const std::string& p) {
        if (peek().kind == Token::Kind::Punct && peek().text == p) {
            next();
            return true;
        }
        return false;
    }

    Dim parseDim() {
        if (peek().kind == Token::Kind::Dot) {
            next();
            return Dim::free();
        }
        if (peek().kind == Token::Kind::Integer) {
            Token t = next();
            if (t.value < 1)
                fail(Errc::ValidationError, "dimension must be >= 1" + atPos(t));
            if (t.value > 0x7fffffff)
                fail(Errc::ValidationError, "dimension exceeds 2^31-1" + atPos(t));
            return Dim::fixed(t.value);
        }
        parseFail(peek(), "a dimension (integer or '.')");
    }

    TypePtr parseType(int depth) {
        if (depth > kMaxNestingDepth)
            fail(Errc::ParseError, "type nesting exceeds " + std::to_string(kMaxNestingDepth) +
                                       " levels" + atPos(peek()));
        switch (typeHeadOf(peek())) {
            case TypeHead::Num: return parseNum();
            case TypeHead::String: return parseString();
            case TypeHead::StructOrUnion: return parseStruct(depth);
            case TypeHead::Array: return parseArray(depth);
            case TypeHead::Named: {
                next();
                Token name = expectWord("a type name after 'type'");
                return makeNamed(name.text);
            }
            case TypeHead::Any: next(); return makeAny();
        }
        parseFail(peek(), "a type");
    }

    TypePtr parseNum() {
        Token head = next();
        bool isReal = head.text == "real";
        std::int64_t width = isReal ? 8 : 4;  // defaults when '*N' is omitted
        if (tryPunct("*")) {
            if (peek().kind != Token::Kind::Integer) parseFail(peek(), "a width after '*'");
            Token w = next();
            width = w.value;
            bool ok = isReal ? (width == 4 || width == 8 || width == 16)
                             : (width == 1 || width == 2 || width == 4 || width == 8);
            if (!ok)
                fail(Errc::ValidationError,
                     "illegal " + head.text + " width " + std::to_string(width) + atPos(w));
        }
        NumKind kind;
        if (isReal)
            kind = width == 4 ? NumKind::F4 : width == 8 ? NumKind::F8 : NumKind::F16;
        else
            kind = width == 1   ? NumKind::I1
                   : width == 2 ? NumKind::I2
                   : width == 4 ? NumKind::I4
                                : NumKind::I8;
        std::vector<Dim> dims;
        if (tryPunct("[")) {
            dims.push_back(parseDim());
            while (tryPunct(",")) dims.push_back(parseDim());
            expectPunct("]");
        }
        return makeNum(kind, std::move(dims));
    }

    TypePtr parseString() {
        Token head = next();
        bool opaque = head.text == "opaque";
        Dim size = Dim::free();
        if (tryPunct("*")) {
            if (peek().kind != Token::Kind::Integer) parseFail(peek(), "a size after '*'");
            Token s = next();
            if (s.value < 1)
                fail(Errc::ValidationError, "string size must be >= 1" + atPos(s));
            if (s.value > 0x7fffffff)
                fail(Errc::ValidationError, "string size exceeds 2^31-1" + atPos(s));
            size = Dim::fixed(s.value);
        }
        return makeString(size, opaque);
    }

    TypePtr parseStruct(int depth) {
        Token head = next();
        bool isUnion = head.text == "union";
        expectPunct("{");
        std::vector<Field> fields;
        while (!(peek().kind == Token::Kind::Punct && peek().text == "}")) {
            Field f;
            // 'optional' starts a specifier unless it is itself the field
            // name (next token would then be ':').
            if (peek().kind == Token::Kind::Word && peek().text == "optional" &&
                !(peek(1).kind == Token::Kind::Punct && peek(1).text == ":")) {
                next();
                f.optional = true;
                if (isUnion)
                    fail(Errc::ValidationError, "optional field not allowed in union" + atPos(head));
            }
            Token name = expectWord("a field name");
            f.name = name.text;
            expectPunct(":");
            f.type = parseType(depth + 1);
            fields.push_back(std::move(f));
            // The semicolon may be omitted before the closing brace.
            if (!tryPunct(";")) {
                if (!(peek().kind == Token::Kind::Punct && peek().text == "}"))
                    parseFail(peek(), "';' or '}'");
            }
        }
        next();  // '}'
        return makeStruct(std::move(fields), isUnion);
    }

    TypePtr parseArray(int depth) {
        next();  // 'array'
        Dim size = Dim::free();
        if (tryPunct("[")) {
            size = parseDim();
            expectPunct("]");
        }
        if (!(peek().kind == Token::Kind::Word && peek().text == "of"))
            parseFail(peek(), "'of'");
        next();
        return makeArray(size, parseType(depth + 1));
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

}  // namespace

EnvPtr parseTypeText(std::string_view src) { return Parser(src).parseUnit(); }

}  // namespace structfile
