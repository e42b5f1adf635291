#include <doctest.h>

#include "structfile/binary.hpp"
#include "structfile/ddl.hpp"
#include "structfile/types.hpp"
#include "support/gen.hpp"

using namespace structfile;

namespace {

EnvPtr envOf(TypePtr root) { return TypeEnv::make(std::move(root)); }

// Bounded-unrolling oracle for the coinductive equality: resolve names away
// and expand the tree down to `depth` structural levels, putting a stop
// marker below, then compare the finite trees.
TypePtr unroll(const TypePtr& t, const TypeEnv& env, int depth) {
    TypePtr r = env.resolveFully(t);
    if (depth == 0) return makeString(Dim::fixed(777), true);  // stop marker
    if (const auto* st = r->asStruct()) {
        std::vector<Field> fields;
        for (const Field& f : st->fields)
            fields.push_back(Field{f.name, unroll(f.type, env, depth - 1), f.optional});
        return makeStruct(std::move(fields), st->isUnion);
    }
    if (const auto* a = r->asArray())
        return makeArray(a->size, unroll(a->elem, env, depth - 1));
    return r;
}

}  // namespace

TEST_CASE("typeEquals on scalars") {
    EnvPtr env = envOf(makeNum(NumKind::I4));
    CHECK(typeEquals(makeNum(NumKind::I4), makeNum(NumKind::I4), *env));
    CHECK_FALSE(typeEquals(makeNum(NumKind::I4), makeNum(NumKind::I2), *env));
    CHECK_FALSE(typeEquals(makeNum(NumKind::I4), makeNum(NumKind::U4), *env));
}

TEST_CASE("typeEquals terminates on recursive types") {
    const char* source = "typedef L = union { end : integer*1; more : type L; } type L;";
    EnvPtr env = parseTypeText(source);
    TypePtr l = env->resolve("L");
    CHECK(typeEquals(l, l, *env));
    CHECK(typeEquals(makeNamed("L"), l, *env));

    // oracle: bounded unrolling to depth 8 agrees, across two independently
    // parsed copies (no shared nodes)
    EnvPtr copy = parseTypeText(source);
    CHECK(typeEquals(env->root(), *env, copy->root(), *copy));
    for (int d = 1; d <= 8; ++d)
        CHECK(syntacticEquals(unroll(env->root(), *env, d), unroll(copy->root(), *copy, d)));

    // two recursive types that differ only inside the cycle
    EnvPtr env2 = parseTypeText(
        "typedef L = union { end : integer*2; more : type L; } type L;");
    CHECK_FALSE(typeEquals(env->resolve("L"), *env, env2->resolve("L"), *env2));
    bool anyDepthDiffers = false;
    for (int d = 1; d <= 8; ++d)
        if (!syntacticEquals(unroll(env->root(), *env, d), unroll(env2->root(), *env2, d)))
            anyDepthDiffers = true;
    CHECK(anyDepthDiffers);
}

TEST_CASE("typeEquals is structural across different environments") {
    EnvPtr a = parseTypeText("typedef N = integer*4; struct { x : type N; }");
    EnvPtr b = parseTypeText("struct { x : integer*4; }");
    CHECK(typeEquals(a->root(), *a, b->root(), *b));
}

TEST_CASE("typeEquals is an equivalence relation on random types") {
    testgen::Rng rng(42);
    std::vector<EnvPtr> envs;
    for (int i = 0; i < 40; ++i) envs.push_back(testgen::genTypeEnv(rng));
    for (const EnvPtr& e : envs) CHECK(typeEquals(e->root(), e->root(), *e));
    for (int i = 0; i < 100; ++i) {
        const EnvPtr& x = envs[testgen::pick(rng, envs.size())];
        const EnvPtr& y = envs[testgen::pick(rng, envs.size())];
        const EnvPtr& z = envs[testgen::pick(rng, envs.size())];
        bool xy = typeEquals(x->root(), *x, y->root(), *y);
        CHECK(xy == typeEquals(y->root(), *y, x->root(), *x));
        if (xy && typeEquals(y->root(), *y, z->root(), *z))
            CHECK(typeEquals(x->root(), *x, z->root(), *z));
    }
}

TEST_CASE("printType canonical forms") {
    EnvPtr env = envOf(makeNum(NumKind::I4));
    CHECK(printTypeExpr(makeNum(NumKind::I4)) == "integer*4");
    CHECK(printTypeExpr(makeNum(NumKind::F4, {Dim::fixed(100), Dim::fixed(100)})) ==
          "real*4[100,100]");
    CHECK(printTypeExpr(makeArray(Dim::free(),
                                  makeArray(Dim::fixed(3), makeNum(NumKind::F4)))) ==
          "array[.] of array[3] of real*4");
    CHECK(printTypeExpr(makeString(Dim::free(), false)) == "string");
    CHECK(printTypeExpr(makeString(Dim::fixed(255), true)) == "opaque*255");
    CHECK(printTypeExpr(makeAny()) == "any");
    CHECK(printType(makeNum(NumKind::I4), *env) == "integer*4;\n");
}

TEST_CASE("resolve returns typedef bodies lazily") {
    EnvPtr env = parseTypeText(
        "typedef A = integer*4; typedef B = type A; struct { x : type B; }");
    TypePtr b = env->resolve("B");
    REQUIRE(b->asNamed());  // body stays a reference, not the resolved node
    CHECK(b->asNamed()->name == "A");
    CHECK_THROWS_AS_MESSAGE(env->resolve("Missing"), Error, doctest::Contains("Missing"));
    try {
        env->resolve("Missing");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::UnknownTypeName);
    }
}

TEST_CASE("isVariableSize") {
    EnvPtr env = envOf(makeNum(NumKind::I4));
    CHECK_FALSE(isVariableSize(makeNum(NumKind::I4), *env));
    CHECK(isVariableSize(makeNum(NumKind::F4, {Dim::fixed(3), Dim::free()}), *env));
    CHECK(isVariableSize(
        makeStruct({Field{"a", makeNum(NumKind::I2), false},
                    Field{"b", makeNum(NumKind::F4), true}}),
        *env));
    CHECK(isVariableSize(makeString(Dim::free()), *env));
    CHECK_FALSE(isVariableSize(makeString(Dim::fixed(10)), *env));
    CHECK(isVariableSize(makeAny(), *env));
    CHECK(isVariableSize(makeArray(Dim::free(), makeNum(NumKind::I1)), *env));

    // all-equal fixed variants make a union fixed-size
    TypePtr equalUnion = makeStruct({Field{"a", makeNum(NumKind::I4), false},
                                     Field{"b", makeNum(NumKind::F4), false}},
                                    true);
    CHECK_FALSE(isVariableSize(equalUnion, *env));
    TypePtr unequalUnion = makeStruct({Field{"a", makeNum(NumKind::I4), false},
                                       Field{"b", makeNum(NumKind::I2), false}},
                                      true);
    CHECK(isVariableSize(unequalUnion, *env));

    // recursion through a name is variable
    EnvPtr rec = parseTypeText("typedef L = union { e : integer*1; m : type L; } type L;");
    CHECK(isVariableSize(rec->root(), *rec));
}

TEST_CASE("isVariableSize is monotone under wrapping") {
    testgen::Rng rng(7);
    for (int i = 0; i < 60; ++i) {
        EnvPtr env = testgen::genTypeEnv(rng);
        if (!isVariableSize(env->root(), *env)) continue;
        EnvPtr wrapped = TypeEnv::make(makeArray(Dim::fixed(2), env->root()),
                                       env->typedefs());
        CHECK(isVariableSize(wrapped->root(), *wrapped));
        EnvPtr wrapped2 = TypeEnv::make(
            makeStruct({Field{"a", makeNum(NumKind::I1), false},
                        Field{"b", env->root(), false}}),
            env->typedefs());
        CHECK(isVariableSize(wrapped2->root(), *wrapped2));
    }
}

TEST_CASE("fixedByteSize") {
    EnvPtr env = envOf(makeNum(NumKind::I4));
    CHECK(fixedByteSize(makeNum(NumKind::F8), *env) == 8);

    // 100*100*4; oracle: encode a zero matrix and measure the length
    TypePtr mat = makeNum(NumKind::F4, {Dim::fixed(100), Dim::fixed(100)});
    CHECK(fixedByteSize(mat, *env) == 40000);
    {
        EnvPtr menv = envOf(mat);
        DataHandle v = newDirect(menv);
        CHECK(encodeValue(v, ByteOrder::Big).size() == 40000);
    }

    // sum of field sizes; oracle: encode and measure
    TypePtr st = makeStruct({Field{"x", makeNum(NumKind::I2), false},
                             Field{"y", makeNum(NumKind::I2), false}});
    CHECK(fixedByteSize(st, *env) == 4);
    {
        EnvPtr senv = envOf(st);
        CHECK(encodeValue(newDirect(senv), ByteOrder::Big).size() == 4);
    }

    // all-equal union: selector plus variant
    TypePtr u = makeStruct({Field{"a", makeNum(NumKind::I4), false},
                            Field{"b", makeNum(NumKind::F4), false}},
                           true);
    CHECK(fixedByteSize(u, *env) == 6);

    CHECK_THROWS_AS(fixedByteSize(makeString(Dim::free()), *env), Error);
    try {
        fixedByteSize(makeString(Dim::free()), *env);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::VariableSize);
    }
}

TEST_CASE("fixedByteSize equals encoded length for random fixed-size types") {
    testgen::Rng rng(11);
    int checked = 0;
    for (int i = 0; i < 200 && checked < 60; ++i) {
        EnvPtr env = testgen::genTypeEnv(rng);
        if (isVariableSize(env->root(), *env)) continue;
        ++checked;
        DataHandle v = testgen::genValue(rng, env);
        CHECK(encodeValue(v, ByteOrder::Big).size() == fixedByteSize(env->root(), *env));
        CHECK(encodeValue(v, ByteOrder::Little).size() == fixedByteSize(env->root(), *env));
    }
    CHECK(checked > 20);
}

TEST_CASE("type construction validates invariants") {
    CHECK_THROWS_AS(makeStruct({}), Error);
    CHECK_THROWS_AS(makeStruct({}, true), Error);
    CHECK_THROWS_AS(makeStruct({Field{"a", makeNum(NumKind::I1), false},
                                Field{"a", makeNum(NumKind::I2), false}}),
                    Error);
    CHECK_THROWS_AS(makeStruct({Field{"a", makeNum(NumKind::I1), true}}, true), Error);
    CHECK_THROWS_AS(Dim::fixed(0), Error);
    CHECK_THROWS_AS(Dim::fixed(-3), Error);
}

TEST_CASE("environment validation") {
    // unresolved reference
    CHECK_THROWS_AS(TypeEnv::make(makeNamed("Nope")), Error);
    // illegal recursion: a cycle with no union/optional/free-array on it
    std::map<std::string, TypePtr, std::less<>> defs;
    defs["B"] = makeStruct({Field{"x", makeNamed("B"), false}});
    CHECK_THROWS_AS(TypeEnv::make(makeNamed("B"), defs), Error);
    // fixed-size arrays do not break cycles either
    defs.clear();
    defs["C"] = makeArray(Dim::fixed(3), makeNamed("C"));
    CHECK_THROWS_AS(TypeEnv::make(makeNamed("C"), defs), Error);
    // mutual recursion without a break
    defs.clear();
    defs["A"] = makeNamed("B");
    defs["B"] = makeNamed("A");
    CHECK_THROWS_AS(TypeEnv::make(makeNamed("A"), defs), Error);
    // legal: the cycle passes a free-size array
    defs.clear();
    defs["T"] = makeArray(Dim::free(), makeNamed("T"));
    CHECK(TypeEnv::make(makeNamed("T"), defs));
    // legal: the cycle passes an optional field
    defs.clear();
    defs["O"] = makeStruct({Field{"next", makeNamed("O"), true}});
    CHECK(TypeEnv::make(makeNamed("O"), defs));
    // "any" is reserved as a typedef name
    defs.clear();
    defs["any"] = makeNum(NumKind::I4);
    CHECK_THROWS_AS(TypeEnv::make(makeNum(NumKind::I4), defs), Error);
}

TEST_CASE("minEncodedSize bounds") {
    EnvPtr env = envOf(makeNum(NumKind::I4));
    CHECK(minEncodedSize(makeNum(NumKind::I4), *env) == 4);
    CHECK(minEncodedSize(makeString(Dim::free()), *env) == 4);
    CHECK(minEncodedSize(makeArray(Dim::free(), makeNum(NumKind::I8)), *env) == 4);
    CHECK(minEncodedSize(makeNum(NumKind::F8, {Dim::fixed(2), Dim::free()}), *env) == 4);
    CHECK(minEncodedSize(makeStruct({Field{"a", makeNum(NumKind::I2), true}}), *env) == 1);
    EnvPtr rec = parseTypeText("typedef L = union { e : integer*1; m : type L; } type L;");
    CHECK(minEncodedSize(rec->root(), *rec) == 3);  // selector + cheapest variant
}
