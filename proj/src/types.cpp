#include "structfile/types.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_set>

namespace structfile {

const char* numKindName(NumKind k) {
    switch (k) {
        case NumKind::I1: return "i1";
        case NumKind::U1: return "u1";
        case NumKind::I2: return "i2";
        case NumKind::U2: return "u2";
        case NumKind::I4: return "i4";
        case NumKind::U4: return "u4";
        case NumKind::I8: return "i8";
        case NumKind::U8: return "u8";
        case NumKind::F4: return "f4";
        case NumKind::F8: return "f8";
        case NumKind::F16: return "f16";
    }
    return "?";
}

std::size_t StructType::indexOf(std::string_view name) const {
    std::ptrdiff_t i = findField(name);
    if (i < 0) fail(Errc::NoSuchField, "no field named '" + std::string(name) + "'");
    return std::size_t(i);
}

std::ptrdiff_t StructType::findField(std::string_view name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i].name == name) return std::ptrdiff_t(i);
    return -1;
}

// ---------------------------------------------------------------------------
// Factories

namespace {
TypePtr wrap(TypeNode::Variant v) {
    auto n = std::make_shared<TypeNode>();
    n->v = std::move(v);
    return n;
}
}  // namespace

TypePtr makeNum(NumKind kind, std::vector<Dim> dims) {
    return wrap(NumType{kind, std::move(dims)});
}

TypePtr makeString(Dim size, bool opaque) { return wrap(StringType{opaque, size}); }

TypePtr makeStruct(std::vector<Field> fields, bool isUnion) {
    if (fields.empty())
        fail(Errc::ValidationError, isUnion ? "union needs at least one field"
                                            : "struct needs at least one field");
    std::set<std::string_view> seen;
    for (const Field& f : fields) {
        if (!f.type) fail(Errc::ValidationError, "field '" + f.name + "' has no type");
        if (!seen.insert(f.name).second)
            fail(Errc::ValidationError, "duplicate field name '" + f.name + "'");
        if (isUnion && f.optional)
            fail(Errc::ValidationError, "optional field '" + f.name + "' not allowed in union");
    }
    return wrap(StructType{isUnion, std::move(fields)});
}

TypePtr makeArray(Dim size, TypePtr elem) {
    if (!elem) fail(Errc::ValidationError, "array element type missing");
    return wrap(ArrayType{size, std::move(elem)});
}

TypePtr makeNamed(std::string name) {
    if (name.empty()) fail(Errc::ValidationError, "empty type name");
    return wrap(NamedType{std::move(name)});
}

TypePtr makeAny() { return wrap(AnyType{}); }

// ---------------------------------------------------------------------------
// TypeEnv

namespace {

// Walks one type body without following named references. The callback gets
// each referenced name together with whether the path from the body root
// passed a construct that can terminate recursion (union variant, optional
// field, free-size array element).
void walkRefs(const TypePtr& t, bool breaker,
              const std::function<void(const std::string&, bool)>& cb) {
    if (const auto* s = t->asStruct()) {
        for (const Field& f : s->fields)
            walkRefs(f.type, breaker || s->isUnion || f.optional, cb);
    } else if (const auto* a = t->asArray()) {
        walkRefs(a->elem, breaker || a->size.isFree(), cb);
    } else if (const auto* n = t->asNamed()) {
        cb(n->name, breaker);
    }
}

}  // namespace

EnvPtr TypeEnv::make(TypePtr root, std::map<std::string, TypePtr, std::less<>> typedefs) {
    if (!root) fail(Errc::ValidationError, "type environment needs a root type");
    auto env = std::shared_ptr<TypeEnv>(new TypeEnv());
    env->defs_ = std::move(typedefs);
    env->root_ = std::move(root);

    // "any" is reserved: the type descriptor uses it to externalize the any
    // type through its named variant.
    if (env->defs_.find("any") != env->defs_.end())
        fail(Errc::ValidationError, "'any' cannot be used as a type name");

    auto checkResolvable = [&](const TypePtr& t) {
        walkRefs(t, false, [&](const std::string& name, bool) {
            if (!env->has(name))
                fail(Errc::ValidationError, "reference to unknown type '" + name + "'");
        });
    };
    checkResolvable(env->root_);
    for (const auto& [name, body] : env->defs_) checkResolvable(body);

    // Cycles that never pass a terminating construct would force infinite
    // data; reject them. Only edges between typedefs matter.
    std::map<std::string, std::vector<std::string>, std::less<>> hardEdges;
    for (const auto& [name, body] : env->defs_) {
        walkRefs(body, false, [&](const std::string& target, bool breaker) {
            if (!breaker) hardEdges[name].push_back(target);
        });
    }
    enum class Color { White, Grey, Black };
    std::map<std::string, Color, std::less<>> color;
    std::function<void(const std::string&)> visit = [&](const std::string& n) {
        Color& c = color[n];
        if (c == Color::Black) return;
        if (c == Color::Grey)
            fail(Errc::ValidationError,
                 "illegal recursion through type '" + n +
                     "': no union, optional field, or free-size array on the cycle");
        c = Color::Grey;
        auto it = hardEdges.find(n);
        if (it != hardEdges.end())
            for (const std::string& m : it->second) visit(m);
        color[n] = Color::Black;
    };
    for (const auto& [name, body] : env->defs_) visit(name);

    return env;
}

TypePtr TypeEnv::resolve(std::string_view name) const {
    auto it = defs_.find(name);
    if (it == defs_.end()) fail(Errc::UnknownTypeName, "'" + std::string(name) + "'");
    return it->second;
}

TypePtr TypeEnv::resolveFully(TypePtr t) const {
    while (t && t->asNamed()) t = resolve(t->asNamed()->name);
    return t;
}

// ---------------------------------------------------------------------------
// Equality

namespace {

bool equalsRec(const TypePtr& a, const TypeEnv& envA, const TypePtr& b, const TypeEnv& envB,
               std::set<std::pair<const TypeNode*, const TypeNode*>>& assumed) {
    TypePtr ra = envA.resolveFully(a);
    TypePtr rb = envB.resolveFully(b);
    if (ra.get() == rb.get()) return true;
    if (!assumed.insert({ra.get(), rb.get()}).second) return true;  // coinductive assumption

    if (const auto* na = ra->asNum()) {
        const auto* nb = rb->asNum();
        return nb && na->kind == nb->kind && na->dims == nb->dims;
    }
    if (const auto* sa = ra->asString()) {
        const auto* sb = rb->asString();
        return sb && sa->opaque == sb->opaque && sa->size == sb->size;
    }
    if (const auto* ta = ra->asStruct()) {
        const auto* tb = rb->asStruct();
        if (!tb || ta->isUnion != tb->isUnion || ta->fields.size() != tb->fields.size())
            return false;
        for (std::size_t i = 0; i < ta->fields.size(); ++i) {
            const Field& fa = ta->fields[i];
            const Field& fb = tb->fields[i];
            if (fa.name != fb.name || fa.optional != fb.optional) return false;
            if (!equalsRec(fa.type, envA, fb.type, envB, assumed)) return false;
        }
        return true;
    }
    if (const auto* aa = ra->asArray()) {
        const auto* ab = rb->asArray();
        return ab && aa->size == ab->size && equalsRec(aa->elem, envA, ab->elem, envB, assumed);
    }
    if (ra->isAny()) return rb->isAny();
    return false;
}

}  // namespace

bool typeEquals(const TypePtr& a, const TypeEnv& envA, const TypePtr& b, const TypeEnv& envB) {
    if (!a || !b) fail(Errc::ValidationError, "null type");
    std::set<std::pair<const TypeNode*, const TypeNode*>> assumed;
    return equalsRec(a, envA, b, envB, assumed);
}

bool typeEquals(const TypePtr& a, const TypePtr& b, const TypeEnv& env) {
    return typeEquals(a, env, b, env);
}

bool syntacticEquals(const TypePtr& a, const TypePtr& b) {
    if (a.get() == b.get()) return true;
    if (!a || !b) return false;
    if (const auto* na = a->asNum()) {
        const auto* nb = b->asNum();
        return nb && na->kind == nb->kind && na->dims == nb->dims;
    }
    if (const auto* sa = a->asString()) {
        const auto* sb = b->asString();
        return sb && sa->opaque == sb->opaque && sa->size == sb->size;
    }
    if (const auto* ta = a->asStruct()) {
        const auto* tb = b->asStruct();
        if (!tb || ta->isUnion != tb->isUnion || ta->fields.size() != tb->fields.size())
            return false;
        for (std::size_t i = 0; i < ta->fields.size(); ++i) {
            const Field& fa = ta->fields[i];
            const Field& fb = tb->fields[i];
            if (fa.name != fb.name || fa.optional != fb.optional ||
                !syntacticEquals(fa.type, fb.type))
                return false;
        }
        return true;
    }
    if (const auto* aa = a->asArray()) {
        const auto* ab = b->asArray();
        return ab && aa->size == ab->size && syntacticEquals(aa->elem, ab->elem);
    }
    if (const auto* ma = a->asNamed()) {
        const auto* mb = b->asNamed();
        return mb && ma->name == mb->name;
    }
    return a->isAny() && b->isAny();
}

bool envEquals(const TypeEnv& a, const TypeEnv& b) {
    if (!syntacticEquals(a.root(), b.root())) return false;
    if (a.typedefs().size() != b.typedefs().size()) return false;
    auto ib = b.typedefs().begin();
    for (const auto& [name, body] : a.typedefs()) {
        if (ib->first != name || !syntacticEquals(body, ib->second)) return false;
        ++ib;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Canonical printer

namespace {

void printDim(Dim d, std::string& out) {
    if (d.isFree())
        out += '.';
    else
        out += std::to_string(d.count());
}

void printExpr(const TypePtr& t, int indent, std::string& out) {
    if (const auto* n = t->asNum()) {
        // The type language has no unsigned spelling; unsigned kinds print as
        // signed of the same width.
        out += numIsFloat(n->kind) ? "real" : "integer";
        out += '*';
        out += std::to_string(numWidth(n->kind));
        if (!n->dims.empty()) {
            out += '[';
            for (std::size_t i = 0; i < n->dims.size(); ++i) {
                if (i) out += ',';
                printDim(n->dims[i], out);
            }
            out += ']';
        }
    } else if (const auto* s = t->asString()) {
        out += s->opaque ? "opaque" : "string";
        if (!s->size.isFree()) {
            out += '*';
            out += std::to_string(s->size.count());
        }
    } else if (const auto* st = t->asStruct()) {
        out += st->isUnion ? "union {" : "struct {";
        for (const Field& f : st->fields) {
            out += '\n';
            out.append(std::size_t(indent) + 4, ' ');
            if (f.optional) out += "optional ";
            out += f.name;
            out += " : ";
            printExpr(f.type, indent + 4, out);
            out += ';';
        }
        out += '\n';
        out.append(std::size_t(indent), ' ');
        out += '}';
    } else if (const auto* a = t->asArray()) {
        out += "array[";
        printDim(a->size, out);
        out += "] of ";
        printExpr(a->elem, indent, out);
    } else if (const auto* nm = t->asNamed()) {
        out += "type ";
        out += nm->name;
    } else {
        out += "any";
    }
}

void collectReachableNames(const TypePtr& t, const TypeEnv& env,
                           std::set<std::string>& names) {
    walkRefs(t, false, [&](const std::string& name, bool) {
        if (names.insert(name).second) collectReachableNames(env.resolve(name), env, names);
    });
}

}  // namespace

std::string printTypeExpr(const TypePtr& t) {
    std::string out;
    printExpr(t, 0, out);
    return out;
}

std::string printType(const TypePtr& t, const TypeEnv& env) {
    std::set<std::string> names;
    collectReachableNames(t, env, names);
    std::string out;
    for (const std::string& name : names) {
        out += "typedef ";
        out += name;
        out += " = ";
        printExpr(env.resolve(name), 0, out);
        out += ";\n";
    }
    printExpr(t, 0, out);
    out += ";\n";
    return out;
}

// ---------------------------------------------------------------------------
// Size analysis

namespace {

// UINT64_MAX doubles as "unboundedly large"; all size arithmetic saturates
// there instead of wrapping.
constexpr std::uint64_t kHuge = UINT64_MAX;

std::uint64_t satAdd(std::uint64_t a, std::uint64_t b) {
    return a > kHuge - b ? kHuge : a + b;
}

std::uint64_t satMul(std::uint64_t a, std::uint64_t b) {
    if (a == 0 || b == 0) return 0;
    return a > kHuge / b ? kHuge : a * b;
}

std::uint64_t fixedSizeRec(const TypePtr& t, const TypeEnv& env) {
    TypePtr r = env.resolveFully(t);
    if (const auto* n = r->asNum()) {
        std::uint64_t cells = 1;
        for (Dim d : n->dims) cells = satMul(cells, std::uint64_t(d.count()));
        return satMul(cells, std::uint64_t(numWidth(n->kind)));
    }
    if (const auto* s = r->asString()) return std::uint64_t(s->size.count());
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) return satAdd(2, fixedSizeRec(st->fields[0].type, env));
        std::uint64_t total = 0;
        for (const Field& f : st->fields) total = satAdd(total, fixedSizeRec(f.type, env));
        return total;
    }
    const auto* a = r->asArray();
    return satMul(std::uint64_t(a->size.count()), fixedSizeRec(a->elem, env));
}

bool variableRec(const TypePtr& t, const TypeEnv& env,
                 std::unordered_set<const TypeNode*>& inProgress) {
    TypePtr r = env.resolveFully(t);
    if (!inProgress.insert(r.get()).second) return true;  // recursion => variable
    struct Pop {
        std::unordered_set<const TypeNode*>& s;
        const TypeNode* n;
        ~Pop() { s.erase(n); }
    } pop{inProgress, r.get()};

    if (const auto* n = r->asNum()) {
        for (Dim d : n->dims)
            if (d.isFree()) return true;
        return false;
    }
    if (const auto* s = r->asString()) return s->size.isFree();
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) {
            for (const Field& f : st->fields)
                if (variableRec(f.type, env, inProgress)) return true;
            std::uint64_t first = fixedSizeRec(st->fields[0].type, env);
            for (const Field& f : st->fields)
                if (fixedSizeRec(f.type, env) != first) return true;
            return false;
        }
        for (const Field& f : st->fields)
            if (f.optional || variableRec(f.type, env, inProgress)) return true;
        return false;
    }
    if (const auto* a = r->asArray())
        return a->size.isFree() || variableRec(a->elem, env, inProgress);
    return r->isAny();
}

std::uint64_t minSizeRec(const TypePtr& t, const TypeEnv& env,
                         std::unordered_set<const TypeNode*>& inProgress) {
    TypePtr r = env.resolveFully(t);
    if (!inProgress.insert(r.get()).second) return kHuge;  // no finite value on this path
    struct Pop {
        std::unordered_set<const TypeNode*>& s;
        const TypeNode* n;
        ~Pop() { s.erase(n); }
    } pop{inProgress, r.get()};

    if (const auto* n = r->asNum()) {
        bool anyFree = false;
        std::uint64_t cells = 1;
        std::uint64_t prefix = 0;
        for (Dim d : n->dims) {
            if (d.isFree()) {
                anyFree = true;  // that dimension may be zero
                prefix = satAdd(prefix, 4);
            } else {
                cells = satMul(cells, std::uint64_t(d.count()));
            }
        }
        if (anyFree) cells = 0;
        return satAdd(prefix, satMul(cells, std::uint64_t(numWidth(n->kind))));
    }
    if (const auto* s = r->asString())
        return s->size.isFree() ? 4 : std::uint64_t(s->size.count());
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) {
            std::uint64_t best = kHuge;
            for (const Field& f : st->fields)
                best = std::min(best, minSizeRec(f.type, env, inProgress));
            return satAdd(2, best);
        }
        std::uint64_t total = 0;
        for (const Field& f : st->fields)
            total = satAdd(total, f.optional ? 1 : minSizeRec(f.type, env, inProgress));
        return total;
    }
    if (const auto* a = r->asArray()) {
        if (a->size.isFree()) return 4;
        return satMul(std::uint64_t(a->size.count()), minSizeRec(a->elem, env, inProgress));
    }
    return 4;  // any: at least the type-text length cell
}

}  // namespace

bool isVariableSize(const TypePtr& t, const TypeEnv& env) {
    std::unordered_set<const TypeNode*> inProgress;
    return variableRec(t, env, inProgress);
}

std::uint64_t fixedByteSize(const TypePtr& t, const TypeEnv& env) {
    if (isVariableSize(t, env)) fail(Errc::VariableSize, "type has no fixed encoded size");
    std::uint64_t n = fixedSizeRec(t, env);
    if (n == kHuge) fail(Errc::ValidationError, "type size overflows");
    return n;
}

std::uint64_t minEncodedSize(const TypePtr& t, const TypeEnv& env) {
    std::unordered_set<const TypeNode*> inProgress;
    return minSizeRec(t, env, inProgress);
}

}  // namespace structfile
