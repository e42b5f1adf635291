#pragma once

// Independent decoder for the binary data stream, written rule by rule
// against the format description and kept apart from the library's decoder.
// Produces JSON so results can be compared across routes.

#include <cstring>
#include <span>
#include <string>

#include <json.hpp>

#include "structfile/data.hpp"
#include "structfile/ddl.hpp"
#include "structfile/types.hpp"

namespace reforacle {

using namespace structfile;
using nlohmann::json;

struct RefCursor {
    std::span<const std::byte> bytes;
    std::size_t pos = 0;
    bool big;

    std::uint64_t take(int width) {
        if (pos + std::size_t(width) > bytes.size())
            throw std::runtime_error("ref decoder: out of bytes");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) {
            int shift = big ? 8 * (width - 1 - i) : 8 * i;
            v |= std::uint64_t(std::to_integer<std::uint8_t>(bytes[pos + std::size_t(i)]))
                 << shift;
        }
        pos += std::size_t(width);
        return v;
    }

    std::int32_t count() {
        auto v = std::int32_t(std::uint32_t(take(4)));
        if (v < 0) throw std::runtime_error("ref decoder: negative count");
        return v;
    }

    std::string raw(std::size_t n) {
        if (pos + n > bytes.size()) throw std::runtime_error("ref decoder: out of bytes");
        std::string s(n, '\0');
        std::memcpy(s.data(), bytes.data() + pos, n);
        pos += n;
        return s;
    }
};

inline std::string toHex(const std::string& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (char c : bytes) {
        out += digits[std::uint8_t(c) >> 4];
        out += digits[std::uint8_t(c) & 0xf];
    }
    return out;
}

inline json numCell(RefCursor& in, NumKind k) {
    int w = numWidth(k);
    if (k == NumKind::F16) {
        std::string bytes = in.raw(16);
        if (in.big) std::reverse(bytes.begin(), bytes.end());
        return json{{"f16", toHex(bytes)}};
    }
    std::uint64_t raw = in.take(w);
    if (k == NumKind::F4) return double(std::bit_cast<float>(std::uint32_t(raw)));
    if (k == NumKind::F8) return std::bit_cast<double>(raw);
    if (numIsSigned(k)) {
        if (w < 8) {
            std::uint64_t sign = std::uint64_t(1) << (8 * w - 1);
            if (raw & sign) raw |= ~(sign * 2 - 1);
        }
        return std::int64_t(raw);
    }
    return raw;
}

// Floats compare bitwise through their JSON carrier.
inline json floatKey(json v) {
    if (v.is_number_float()) {
        double d = v.get<double>();
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        return json{{"bits", bits}};
    }
    return v;
}

inline json refDecode(const TypePtr& t, const TypeEnv& env, RefCursor& in) {
    TypePtr r = env.resolveFully(t);
    if (r->isAny()) {
        std::int32_t len = in.count();
        std::string text = in.raw(std::size_t(len));
        EnvPtr benv = parseTypeText(text);
        json inner = refDecode(benv->root(), *benv, in);
        return json{{"any", printTypeExpr(benv->resolveFully(benv->root()))},
                    {"value", inner}};
    }
    if (const auto* n = r->asNum()) {
        if (n->dims.empty()) return floatKey(numCell(in, n->kind));
        std::uint64_t cells = 1;
        json counts = json::array();
        for (Dim d : n->dims) {
            std::int64_t c = d.isFree() ? in.count() : d.count();
            counts.push_back(c);
            cells *= std::uint64_t(c);
        }
        json cellList = json::array();
        for (std::uint64_t i = 0; i < cells; ++i)
            cellList.push_back(floatKey(numCell(in, n->kind)));
        return json{{"counts", counts}, {"cells", cellList}};
    }
    if (const auto* s = r->asString()) {
        std::size_t len = s->size.isFree() ? std::size_t(in.count())
                                           : std::size_t(s->size.count());
        return json{{"bytes", toHex(in.raw(len))}};
    }
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) {
            std::uint64_t sel = in.take(2);
            if (sel >= st->fields.size()) throw std::runtime_error("ref decoder: bad selector");
            return json{{"variant", sel},
                        {"value", refDecode(st->fields[sel].type, env, in)}};
        }
        json obj = json::object();
        for (const Field& f : st->fields) {
            if (f.optional) {
                std::uint64_t tag = in.take(1);
                if (tag == 0) continue;
            }
            obj[f.name] = refDecode(f.type, env, in);
        }
        return obj;
    }
    const auto* a = r->asArray();
    std::int64_t n = a->size.isFree() ? in.count() : a->size.count();
    json arr = json::array();
    for (std::int64_t i = 0; i < n; ++i) arr.push_back(refDecode(a->elem, env, in));
    return arr;
}

inline json refDecodeAll(const TypePtr& t, const TypeEnv& env, std::span<const std::byte> bytes,
                         bool bigEndian) {
    RefCursor in{bytes, 0, bigEndian};
    json v = refDecode(t, env, in);
    if (in.pos != bytes.size()) throw std::runtime_error("ref decoder: trailing bytes");
    return v;
}

// The same JSON conventions computed from a data handle via the public API;
// comparing the two routes checks encoder and decoder against each other.
inline json handleToJson(const DataHandle& d, const TypePtr& t, const TypeEnv& env) {
    TypePtr r = env.resolveFully(t);
    if (r->isAny()) {
        TypePtr bound = d.anyBoundType();
        EnvPtr benv = d.anyBoundEnv();
        json inner = handleToJson(d, bound, *benv);
        return json{{"any", printTypeExpr(benv->resolveFully(bound))}, {"value", inner}};
    }
    if (const auto* n = r->asNum()) {
        auto cellJson = [&](const std::byte* cell) -> json {
            NumKind k = n->kind;
            if (k == NumKind::F16)
                return json{{"f16", toHex(std::string(reinterpret_cast<const char*>(cell), 16))}};
            if (numIsFloat(k)) return floatKey(cell::decodeDouble(cell, k));
            if (numIsSigned(k)) return cell::decodeInt(cell, k);
            return cell::decodeUint(cell, k);
        };
        if (n->dims.empty()) {
            std::byte cell[16];
            d.impl()->readScalarCell(cell);
            return cellJson(cell);
        }
        MatrixValue m = d.getMatrix();
        json counts = json::array();
        for (std::size_t i = 0; i < m.shape().rank(); ++i) counts.push_back(m.shape().count(i));
        json cells = json::array();
        for (std::uint64_t i = 0; i < m.elementCount(); ++i) {
            std::byte cell[16];
            m.cellRaw(i, cell);
            cells.push_back(cellJson(cell));
        }
        return json{{"counts", counts}, {"cells", cells}};
    }
    if (r->asString()) return json{{"bytes", toHex(d.getString())}};
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) {
            std::size_t sel = d.activeField();
            return json{{"variant", sel},
                        {"value", handleToJson(d.fieldAt(sel), st->fields[sel].type, env)}};
        }
        json obj = json::object();
        for (std::size_t i = 0; i < st->fields.size(); ++i) {
            if (st->fields[i].optional && !d.impl()->fieldPresent(i)) continue;
            obj[st->fields[i].name] = handleToJson(d.fieldAt(i), st->fields[i].type, env);
        }
        return obj;
    }
    const auto* a = r->asArray();
    json arr = json::array();
    for (std::size_t i = 0; i < d.nElements(); ++i)
        arr.push_back(handleToJson(d.elem(i), a->elem, env));
    return arr;
}

inline json handleToJson(const DataHandle& d) {
    return handleToJson(d, d.declaredType(), *d.env());
}

}  // namespace reforacle
