#include "structfile/textdata.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

#include "data_internal.hpp"
#include "structfile/ddl.hpp"

namespace structfile {

// ---------------------------------------------------------------------------
// Printing

namespace {

const char* kHexDigits = "0123456789abcdef";

void appendHexByte(std::string& out, std::uint8_t b) {
    out += kHexDigits[b >> 4];
    out += kHexDigits[b & 0xf];
}

void appendQuoted(std::string& out, std::string_view s) {
    out += '"';
    for (char c : s) {
        auto u = std::uint8_t(c);
        if (c == '"')
            out += "\\\"";
        else if (c == '\\')
            out += "\\\\";
        else if (c == '\n')
            out += "\\n";
        else if (u < 0x20 || u >= 0x7f) {
            out += "\\x";
            appendHexByte(out, u);
        } else {
            out += c;
        }
    }
    out += '"';
}

void appendHexString(std::string& out, std::string_view bytes) {
    out += "x\"";
    for (char c : bytes) appendHexByte(out, std::uint8_t(c));
    out += '"';
}

void appendDouble(std::string& out, double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

void appendFloat(std::string& out, float v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, p);
}

void appendCell(std::string& out, const MatrixValue& m, std::uint64_t i) {
    NumKind k = m.kind();
    switch (k) {
        case NumKind::F16: {
            std::byte raw[16];
            m.cellRaw(i, raw);
            appendHexString(out, std::string_view(reinterpret_cast<const char*>(raw), 16));
            break;
        }
        case NumKind::F4: appendFloat(out, float(m.cellDouble(i))); break;
        case NumKind::F8: appendDouble(out, m.cellDouble(i)); break;
        default:
            if (numIsSigned(k))
                out += std::to_string(m.cellInt(i));
            else
                out += std::to_string(m.cellUint(i));
    }
}

struct Printer {
    std::string& out;
    bool pretty;
    int indent = 0;

    void newlineOrSpace() {
        if (pretty) {
            out += '\n';
            out.append(std::size_t(indent), ' ');
        }
    }

    void value(const DataHandle& d, const TypePtr& t, const EnvPtr& env) {
        TypePtr r = env->resolveFully(t);
        if (r->isAny()) {
            TypePtr bound = d.anyBoundType();
            if (!bound) fail(Errc::UnboundAny, "cannot print an unbound any node");
            EnvPtr benv = d.anyBoundEnv();
            std::string typeText = printType(bound, *benv);
            while (!typeText.empty() && (typeText.back() == '\n' || typeText.back() == ';'))
                typeText.pop_back();
            out += '(';
            out += typeText;
            out += ") ";
            value(d, bound, benv);
            return;
        }
        if (const auto* n = r->asNum()) {
            if (n->dims.empty()) {
                scalar(d, n->kind);
            } else {
                matrix(d);
            }
            return;
        }
        if (const auto* s = r->asString()) {
            if (s->opaque)
                appendHexString(out, d.getString());
            else
                appendQuoted(out, d.getString());
            return;
        }
        if (const auto* st = r->asStruct()) {
            if (st->isUnion) {
                std::size_t active = d.activeField();
                out += st->fields[active].name;
                out += " : ";
                value(d.fieldAt(active), st->fields[active].type, env);
                return;
            }
            out += '{';
            indent += 4;
            bool firstField = true;
            for (std::size_t i = 0; i < st->fields.size(); ++i) {
                if (st->fields[i].optional && !d.impl()->fieldPresent(i)) continue;
                if (!firstField) out += pretty ? "," : ", ";
                firstField = false;
                newlineOrSpace();
                out += st->fields[i].name;
                out += " = ";
                value(d.fieldAt(i), st->fields[i].type, env);
            }
            indent -= 4;
            newlineOrSpace();
            out += '}';
            return;
        }
        const auto* a = r->asArray();
        out += '[';
        indent += 4;
        std::size_t n = d.nElements();
        for (std::size_t i = 0; i < n; ++i) {
            if (i) out += pretty ? "," : ", ";
            newlineOrSpace();
            value(d.elem(i), a->elem, env);
        }
        indent -= 4;
        newlineOrSpace();
        out += ']';
    }

    void scalar(const DataHandle& d, NumKind k) {
        std::byte cell[16];
        d.impl()->readScalarCell(cell);
        switch (k) {
            case NumKind::F16:
                appendHexString(out, std::string_view(reinterpret_cast<const char*>(cell), 16));
                break;
            case NumKind::F4: appendFloat(out, float(cell::decodeDouble(cell, k))); break;
            case NumKind::F8: appendDouble(out, cell::decodeDouble(cell, k)); break;
            default:
                if (numIsSigned(k))
                    out += std::to_string(cell::decodeInt(cell, k));
                else
                    out += std::to_string(cell::decodeUint(cell, k));
        }
    }

    void matrix(const DataHandle& d) {
        MatrixValue m = d.getMatrix();
        TypePtr t = d.type();
        const NumType& n = *t->asNum();
        for (std::size_t i = 0; i < n.dims.size(); ++i) {
            if (n.dims[i].isFree()) {
                out += std::to_string(m.shape().count(i));
                out += ' ';
            }
        }
        out += '[';
        std::uint64_t count = m.elementCount();
        for (std::uint64_t i = 0; i < count; ++i) {
            if (i) out += ", ";
            appendCell(out, m, i);
        }
        out += ']';
    }
};

}  // namespace

void printData(const DataHandle& d, std::string& out, bool pretty) {
    if (d.isNull()) fail(Errc::NullHandle, "cannot print a null handle");
    Printer p{out, pretty};
    p.value(d, d.declaredType(), d.env());
}

std::string printData(const DataHandle& d, bool pretty) {
    std::string out;
    printData(d, out, pretty);
    return out;
}

// ---------------------------------------------------------------------------
// Reading

namespace {

struct TextReader {
    std::string_view src;
    std::size_t pos = 0;
    int line = 1, col = 1;

    [[noreturn]] void err(const std::string& msg) {
        fail(Errc::TextSyntaxError,
             msg + " at line " + std::to_string(line) + ", column " + std::to_string(col));
    }
    [[noreturn]] void mismatch(const std::string& msg) {
        fail(Errc::TypeMismatchInData,
             msg + " at line " + std::to_string(line) + ", column " + std::to_string(col));
    }

    void advance() {
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }
    void skipWs() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) advance();
    }
    bool atEnd() {
        skipWs();
        return pos >= src.size();
    }
    char peek() {
        skipWs();
        if (pos >= src.size()) err("unexpected end of input");
        return src[pos];
    }
    bool tryChar(char c) {
        skipWs();
        if (pos < src.size() && src[pos] == c) {
            advance();
            return true;
        }
        return false;
    }
    void expectChar(char c) {
        if (!tryChar(c)) err(std::string("expected '") + c + "'");
    }

    std::string word() {
        skipWs();
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            advance();
        if (pos == start) err("expected a name");
        return std::string(src.substr(start, pos - start));
    }

    // Raw numeric text: sign, digits, '.', exponent, or inf/nan words.
    std::string numberText() {
        skipWs();
        std::size_t start = pos;
        if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) advance();
        while (pos < src.size()) {
            char c = src[pos];
            if (std::isalnum(static_cast<unsigned char>(c)) || c == '.') {
                advance();
            } else if ((c == '+' || c == '-') && pos > start &&
                       (src[pos - 1] == 'e' || src[pos - 1] == 'E')) {
                advance();
            } else {
                break;
            }
        }
        if (pos == start) err("expected a number");
        return std::string(src.substr(start, pos - start));
    }

    std::string quotedString() {
        skipWs();
        if (pos >= src.size() || src[pos] != '"') err("expected '\"'");
        advance();
        std::string out;
        while (true) {
            if (pos >= src.size()) err("unterminated string literal");
            char c = src[pos];
            advance();
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos >= src.size()) err("dangling escape");
            char e = src[pos];
            advance();
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 'x': {
                    if (pos + 1 >= src.size()) err("truncated \\x escape");
                    auto hex = [&](char h) -> int {
                        if (h >= '0' && h <= '9') return h - '0';
                        if (h >= 'a' && h <= 'f') return h - 'a' + 10;
                        if (h >= 'A' && h <= 'F') return h - 'A' + 10;
                        err("bad hex digit in \\x escape");
                    };
                    int hi = hex(src[pos]);
                    advance();
                    int lo = hex(src[pos]);
                    advance();
                    out += char(hi * 16 + lo);
                    break;
                }
                default: err("unknown escape sequence");
            }
        }
        return out;
    }

    std::string hexString() {
        skipWs();
        if (pos >= src.size() || src[pos] != 'x') err("expected x\"...\"");
        advance();
        if (pos >= src.size() || src[pos] != '"') err("expected '\"' after x");
        advance();
        std::string out;
        int nibble = -1;
        while (true) {
            if (pos >= src.size()) err("unterminated hex literal");
            char c = src[pos];
            advance();
            if (c == '"') break;
            int v;
            if (c >= '0' && c <= '9')
                v = c - '0';
            else if (c >= 'a' && c <= 'f')
                v = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F')
                v = c - 'A' + 10;
            else
                err("bad hex digit");
            if (nibble < 0) {
                nibble = v;
            } else {
                out += char(nibble * 16 + v);
                nibble = -1;
            }
        }
        if (nibble >= 0) err("odd number of hex digits");
        return out;
    }

    std::int64_t integer() {
        std::string t = numberText();
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) err("malformed integer '" + t + "'");
        return v;
    }

    double floating() {
        std::string t = numberText();
        double v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) err("malformed number '" + t + "'");
        return v;
    }

    void intoScalar(const DataHandle& d, NumKind k) {
        if (k == NumKind::F16) {
            if (peek() == 'x') {
                std::string raw = hexString();
                if (raw.size() != 16) mismatch("real*16 literal needs 16 bytes");
                d.assignF16(reinterpret_cast<const std::byte*>(raw.data()));
            } else {
                d.assignDouble(floating());
            }
            return;
        }
        if (numIsFloat(k)) {
            d.assignDouble(floating());
            return;
        }
        std::string t = numberText();
        if (!numIsSigned(k) && !t.empty() && t[0] != '-') {
            std::uint64_t u = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), u);
            if (ec != std::errc() || p != t.data() + t.size())
                err("malformed integer '" + t + "'");
            if (k != NumKind::U8 && u > (std::uint64_t(1) << (8 * numWidth(k))) - 1)
                fail(Errc::OutOfRange, t + " does not fit " + numKindName(k));
            std::byte cell[16] = {};
            cell::encodeInt(cell, k, std::int64_t(u));
            d.impl()->writeScalarCell(cell);
            return;
        }
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) err("malformed integer '" + t + "'");
        d.assignInt(v);
    }

    void intoCell(MatrixValue& m, std::uint64_t i) {
        NumKind k = m.kind();
        if (k == NumKind::F16) {
            if (peek() == 'x') {
                std::string raw = hexString();
                if (raw.size() != 16) mismatch("real*16 cell needs 16 bytes");
                m.setCellRaw(i, reinterpret_cast<const std::byte*>(raw.data()));
            } else {
                m.setCellDouble(i, floating());
            }
            return;
        }
        if (numIsFloat(k)) {
            m.setCellDouble(i, floating());
            return;
        }
        std::string t = numberText();
        if (!numIsSigned(k) && !t.empty() && t[0] != '-') {
            std::uint64_t u = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), u);
            if (ec != std::errc() || p != t.data() + t.size())
                err("malformed integer '" + t + "'");
            if (k != NumKind::U8 && u > (std::uint64_t(1) << (8 * numWidth(k))) - 1)
                fail(Errc::OutOfRange, t + " does not fit " + numKindName(k));
            m.setCellInt(i, std::int64_t(u));
            return;
        }
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) err("malformed integer '" + t + "'");
        detail::checkIntRange(k, v);
        m.setCellInt(i, v);
    }

    void value(const DataHandle& d, const TypePtr& t, const EnvPtr& env) {
        TypePtr r = env->resolveFully(t);
        if (r->isAny()) {
            expectChar('(');
            std::size_t start = pos;
            int depth = 1;
            while (pos < src.size() && depth > 0) {
                if (src[pos] == '(') ++depth;
                if (src[pos] == ')') --depth;
                if (depth > 0) advance();
            }
            if (depth > 0) err("unterminated '(' type prefix");
            std::string_view typeText = src.substr(start, pos - start);
            advance();  // ')'
            EnvPtr benv;
            try {
                benv = parseTypeText(typeText);
            } catch (const Error& e) {
                err(std::string("bad type prefix: ") + e.what());
            }
            d.impl()->rebindAny(benv->root(), benv);
            value(d, benv->root(), benv);
            return;
        }
        if (const auto* n = r->asNum()) {
            if (n->dims.empty()) {
                intoScalar(d, n->kind);
            } else {
                matrix(d, *n);
            }
            return;
        }
        if (const auto* s = r->asString()) {
            if (s->opaque)
                d.assignString(hexString());
            else
                d.assignString(quotedString());
            return;
        }
        if (const auto* st = r->asStruct()) {
            if (st->isUnion) {
                std::string name = word();
                std::ptrdiff_t idx = st->findField(name);
                if (idx < 0) mismatch("union has no variant '" + name + "'");
                expectChar(':');
                d.setActiveField(std::size_t(idx));
                value(d.fieldAt(std::size_t(idx)), st->fields[std::size_t(idx)].type, env);
                return;
            }
            expectChar('{');
            std::vector<bool> seen(st->fields.size(), false);
            while (!tryChar('}')) {
                std::string name = word();
                std::ptrdiff_t idx = st->findField(name);
                if (idx < 0) mismatch("struct has no field '" + name + "'");
                if (seen[std::size_t(idx)]) mismatch("field '" + name + "' appears twice");
                seen[std::size_t(idx)] = true;
                expectChar('=');
                const Field& f = st->fields[std::size_t(idx)];
                if (f.optional) d.impl()->setFieldPresent(std::size_t(idx));
                value(d.fieldAt(std::size_t(idx)), f.type, env);
                tryChar(',');
            }
            for (std::size_t i = 0; i < st->fields.size(); ++i)
                if (!seen[i] && !st->fields[i].optional)
                    mismatch("missing field '" + st->fields[i].name + "'");
            return;
        }
        const auto* a = r->asArray();
        expectChar('[');
        std::size_t n = 0;
        bool isFree = a->size.isFree();
        while (!tryChar(']')) {
            if (isFree) {
                d.resize(n + 1);
            } else if (n >= std::size_t(a->size.count())) {
                mismatch("too many elements for a fixed-size array");
            }
            value(d.elem(n), a->elem, env);
            ++n;
            tryChar(',');
        }
        if (!isFree && n != std::size_t(a->size.count()))
            mismatch("fixed-size array expects " + std::to_string(a->size.count()) +
                     " elements, got " + std::to_string(n));
    }

    void matrix(const DataHandle& d, const NumType& n) {
        std::vector<std::int64_t> counts;
        counts.reserve(n.dims.size());
        for (Dim dim : n.dims) {
            if (dim.isFree()) {
                std::int64_t c = integer();
                if (c < 0) err("negative dimension count");
                counts.push_back(c);
            } else {
                counts.push_back(dim.count());
            }
        }
        MatrixValue m(n.kind, MatrixShape::fromCounts(counts));
        expectChar('[');
        std::uint64_t total = m.elementCount();
        for (std::uint64_t i = 0; i < total; ++i) {
            intoCell(m, i);
            tryChar(',');
        }
        expectChar(']');
        d.assignMatrix(m);
    }
};

}  // namespace

DataHandle readData(const TypePtr& t, const EnvPtr& env, std::string_view in) {
    DataHandle d = newDirect(t, env);
    TextReader r{in};
    r.value(d, t, env);
    if (!r.atEnd()) r.err("trailing characters after the value");
    return d;
}

}  // namespace structfile
