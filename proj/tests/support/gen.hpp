#pragma once

// Deterministic random type and value generators for the property tests.

#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "structfile/data.hpp"
#include "structfile/ddl.hpp"
#include "structfile/matrix.hpp"
#include "structfile/types.hpp"

namespace testgen {

using namespace structfile;

using Rng = std::mt19937_64;

struct GenOptions {
    int maxDepth = 6;
    bool allowUnsigned = false;  // not expressible in the type language
    bool allowAny = true;
    bool allowRecursion = true;  // emit list-like recursive typedefs
    bool allowF16 = true;
};

inline std::size_t pick(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline std::string genName(Rng& rng, const char* prefix) {
    return std::string(prefix) + std::to_string(pick(rng, 100000));
}

inline NumKind genKind(Rng& rng, const GenOptions& o) {
    static const NumKind signedKinds[] = {NumKind::I1, NumKind::I2, NumKind::I4, NumKind::I8,
                                          NumKind::F4, NumKind::F8, NumKind::F16};
    static const NumKind allKinds[] = {NumKind::I1, NumKind::U1, NumKind::I2, NumKind::U2,
                                       NumKind::I4, NumKind::U4, NumKind::I8, NumKind::U8,
                                       NumKind::F4, NumKind::F8, NumKind::F16};
    for (;;) {
        NumKind k = o.allowUnsigned ? allKinds[pick(rng, 11)] : signedKinds[pick(rng, 7)];
        if (!o.allowF16 && k == NumKind::F16) continue;
        return k;
    }
}

inline Dim genDim(Rng& rng) {
    if (pick(rng, 2) == 0) return Dim::free();
    return Dim::fixed(std::int64_t(1 + pick(rng, 4)));
}

struct TypeGen {
    Rng& rng;
    GenOptions opts;
    std::vector<std::string> typedefNames;  // names usable via NamedRef
    int namesUsed = 0;

    TypePtr node(int depth) {
        bool atLeaf = depth >= opts.maxDepth;
        for (;;) {
            switch (pick(rng, atLeaf ? 3 : 8)) {
                case 0:  // scalar number
                    return makeNum(genKind(rng, opts));
                case 1: {  // matrix
                    std::size_t rank = 1 + pick(rng, 3);
                    std::vector<Dim> dims;
                    for (std::size_t i = 0; i < rank; ++i) dims.push_back(genDim(rng));
                    return makeNum(genKind(rng, opts), std::move(dims));
                }
                case 2: {  // string
                    Dim size = pick(rng, 2) == 0 ? Dim::free() : Dim::fixed(1 + pick(rng, 12));
                    return makeString(size, pick(rng, 3) == 0);
                }
                case 3: {  // struct
                    std::size_t n = 1 + pick(rng, 3);
                    std::vector<Field> fields;
                    for (std::size_t i = 0; i < n; ++i)
                        fields.push_back(Field{"f" + std::to_string(i), node(depth + 1),
                                               pick(rng, 4) == 0});
                    return makeStruct(std::move(fields), false);
                }
                case 4: {  // union
                    std::size_t n = 1 + pick(rng, 3);
                    std::vector<Field> fields;
                    for (std::size_t i = 0; i < n; ++i)
                        fields.push_back(Field{"v" + std::to_string(i), node(depth + 1), false});
                    return makeStruct(std::move(fields), true);
                }
                case 5:  // array
                    return makeArray(genDim(rng), node(depth + 1));
                case 6:
                    if (!typedefNames.empty()) {
                        ++namesUsed;
                        return makeNamed(typedefNames[pick(rng, typedefNames.size())]);
                    }
                    continue;
                case 7:
                    if (opts.allowAny) return makeAny();
                    continue;
            }
        }
    }

    static void collectReach(const TypePtr& t,
                             const std::map<std::string, TypePtr, std::less<>>& defs,
                             std::set<std::string>& out) {
        if (const auto* nm = t->asNamed()) {
            if (out.insert(nm->name).second) {
                auto it = defs.find(nm->name);
                if (it != defs.end()) collectReach(it->second, defs, out);
            }
            return;
        }
        if (const auto* st = t->asStruct())
            for (const Field& f : st->fields) collectReach(f.type, defs, out);
        else if (const auto* a = t->asArray())
            collectReach(a->elem, defs, out);
    }

    EnvPtr env() {
        std::map<std::string, TypePtr, std::less<>> defs;
        if (opts.allowRecursion && pick(rng, 3) == 0) {
            // list-shaped recursive typedef: the cycle runs through a union
            // whose first variant is generated before the name is visible, so
            // a finite instance always exists
            std::string name = "L" + std::to_string(pick(rng, 1000));
            TypePtr stopType = node(opts.maxDepth - 1);
            typedefNames.push_back(name);
            std::vector<Field> variants;
            variants.push_back(Field{"stop", stopType, false});
            std::vector<Field> cons;
            cons.push_back(Field{"head", node(opts.maxDepth - 1), false});
            cons.push_back(Field{"tail", makeNamed(name), false});
            variants.push_back(Field{"more", makeStruct(std::move(cons), false), false});
            defs[name] = makeStruct(std::move(variants), true);
        }
        if (pick(rng, 3) == 0) {
            std::string name = "T" + std::to_string(pick(rng, 1000));
            defs[name] = node(opts.maxDepth - 2 < 0 ? 0 : opts.maxDepth - 2);
            typedefNames.push_back(name);
        }
        TypePtr root = node(0);
        // Keep every typedef reachable so printing round-trips the whole env:
        // reference unreached ones from an extra struct field.
        std::set<std::string> reachable;
        collectReach(root, defs, reachable);
        std::vector<std::string> unreached;
        for (const auto& [name, body] : defs)
            if (!reachable.count(name)) unreached.push_back(name);
        if (!unreached.empty()) {
            std::vector<Field> fields;
            fields.push_back(Field{"base", root, false});
            for (std::size_t i = 0; i < unreached.size(); ++i)
                fields.push_back(Field{"ref" + std::to_string(i),
                                       makeArray(Dim::free(), makeNamed(unreached[i])), false});
            root = makeStruct(std::move(fields), false);
        }
        return TypeEnv::make(root, std::move(defs));
    }
};

inline EnvPtr genTypeEnv(Rng& rng, GenOptions opts = {}) {
    TypeGen g{rng, opts, {}, 0};
    return g.env();
}

// ---------------------------------------------------------------------------
// Random values

struct ValueGen {
    Rng& rng;
    int maxArrayLen = 5;
    int anyDepth = 0;

    double genDouble() {
        switch (pick(rng, 8)) {
            case 0: return 0.0;
            case 1: return -0.0;
            case 2: return std::numeric_limits<double>::infinity();
            case 3: return -1.5;
            default:
                return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
        }
    }

    std::string genBytes(std::size_t maxLen) {
        std::string s;
        std::size_t n = pick(rng, maxLen + 1);
        for (std::size_t i = 0; i < n; ++i) s.push_back(char(pick(rng, 256)));
        return s;
    }

    void fill(const DataHandle& d, const TypePtr& t, const EnvPtr& env, int depth = 0) {
        TypePtr r = env->resolveFully(t);
        if (r->isAny()) {
            // bind a small fresh type
            GenOptions o;
            o.maxDepth = 2;
            o.allowAny = false;
            o.allowRecursion = false;
            TypeGen g{rng, o, {}, 0};
            EnvPtr benv = TypeEnv::make(g.node(0));
            if (!d.anyBoundType()) d.impl()->rebindAny(benv->root(), benv);
            fill(d, d.anyBoundType(), d.anyBoundEnv(), depth + 1);
            return;
        }
        if (const auto* n = r->asNum()) {
            if (n->dims.empty()) {
                std::byte cell[16] = {};
                fillCell(cell, n->kind);
                d.impl()->writeScalarCell(cell);
                return;
            }
            std::vector<std::int64_t> counts;
            for (Dim dim : n->dims)
                counts.push_back(dim.isFree() ? std::int64_t(pick(rng, 4)) : dim.count());
            MatrixValue m(n->kind, MatrixShape::fromCounts(counts));
            for (std::uint64_t i = 0; i < m.elementCount(); ++i) {
                std::byte cell[16] = {};
                fillCell(cell, n->kind);
                m.setCellRaw(i, cell);
            }
            d.assignMatrix(m);
            return;
        }
        if (const auto* s = r->asString()) {
            if (s->size.isFree())
                d.assignString(genBytes(10));
            else {
                std::string v = genBytes(std::size_t(s->size.count()));
                d.assignString(v);
            }
            return;
        }
        if (const auto* st = r->asStruct()) {
            if (st->isUnion) {
                std::size_t v;
                if (depth <= 10) {
                    v = pick(rng, st->fields.size());
                } else {
                    // deep in a recursive type: take the variant with the
                    // smallest finite encoding so the tree terminates
                    v = 0;
                    std::uint64_t best = UINT64_MAX;
                    for (std::size_t i = 0; i < st->fields.size(); ++i) {
                        std::uint64_t m = minEncodedSize(st->fields[i].type, *env);
                        if (m < best) {
                            best = m;
                            v = i;
                        }
                    }
                }
                d.setActiveField(v);
                fill(d.fieldAt(v), st->fields[v].type, env, depth + 1);
                return;
            }
            for (std::size_t i = 0; i < st->fields.size(); ++i) {
                if (st->fields[i].optional) {
                    if (depth > 10 || pick(rng, 2) == 0) {
                        d.impl()->unsetField(i);
                        continue;
                    }
                    d.impl()->setFieldPresent(i);
                }
                fill(d.fieldAt(i), st->fields[i].type, env, depth + 1);
            }
            return;
        }
        const auto* a = r->asArray();
        std::size_t n = a->size.isFree()
                            ? (depth > 12 ? 0 : pick(rng, std::size_t(maxArrayLen) + 1))
                            : std::size_t(a->size.count());
        if (a->size.isFree()) d.resize(n);
        for (std::size_t i = 0; i < n; ++i) fill(d.elem(i), a->elem, env, depth + 1);
    }

    void fillCell(std::byte* cell, NumKind k) {
        if (k == NumKind::F16) {
            cell::doubleToQuad(genDouble(), cell);
            return;
        }
        if (numIsFloat(k)) {
            cell::encodeDouble(cell, k, genDouble());
            return;
        }
        // random bit pattern of the right width (any pattern is a value)
        std::uint64_t bits = rng();
        cell::encodeInt(cell, k, std::int64_t(bits));
    }
};

inline DataHandle genValue(Rng& rng, const EnvPtr& env, int maxArrayLen = 5) {
    DataHandle d = newDirect(env);
    ValueGen g{rng, maxArrayLen, 0};
    g.fill(d, env->root(), env);
    return d;
}

}  // namespace testgen
