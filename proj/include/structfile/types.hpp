#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "structfile/error.hpp"

namespace structfile {

// ---------------------------------------------------------------------------
// Elementary numeric kinds

enum class NumKind : std::uint8_t { I1, U1, I2, U2, I4, U4, I8, U8, F4, F8, F16 };

constexpr int numWidth(NumKind k) {
    switch (k) {
        case NumKind::I1:
        case NumKind::U1: return 1;
        case NumKind::I2:
        case NumKind::U2: return 2;
        case NumKind::I4:
        case NumKind::U4:
        case NumKind::F4: return 4;
        case NumKind::I8:
        case NumKind::U8:
        case NumKind::F8: return 8;
        case NumKind::F16: return 16;
    }
    return 0;
}

constexpr bool numIsFloat(NumKind k) {
    return k == NumKind::F4 || k == NumKind::F8 || k == NumKind::F16;
}

constexpr bool numIsSigned(NumKind k) {
    switch (k) {
        case NumKind::I1:
        case NumKind::I2:
        case NumKind::I4:
        case NumKind::I8: return true;
        default: return false;
    }
}

const char* numKindName(NumKind k);  // "i1", "u1", ..., "f16"

// ---------------------------------------------------------------------------
// Dimensions: either a fixed positive count or free (resolved from the data).

class Dim {
public:
    constexpr Dim() = default;  // free

    static constexpr Dim free() { return Dim(); }
    static Dim fixed(std::int64_t count) {
        // Counts travel as 4-byte signed integers in the data stream.
        if (count < 1 || count > 0x7fffffff)
            fail(Errc::ValidationError, "fixed dimension must be in [1, 2^31-1]");
        Dim d;
        d.count_ = count;
        return d;
    }

    constexpr bool isFree() const { return count_ < 0; }
    std::int64_t count() const {
        if (isFree()) fail(Errc::ValidationError, "free dimension has no count");
        return count_;
    }

    friend constexpr bool operator==(Dim a, Dim b) { return a.count_ == b.count_; }

private:
    std::int64_t count_ = -1;
};

// ---------------------------------------------------------------------------
// Type tree nodes

struct TypeNode;
using TypePtr = std::shared_ptr<const TypeNode>;

struct NumType {
    NumKind kind = NumKind::I4;
    std::vector<Dim> dims;  // empty = scalar, otherwise matrix rank
};

struct StringType {
    bool opaque = false;
    Dim size = Dim::free();
};

struct Field {
    std::string name;
    TypePtr type;
    bool optional = false;
};

struct StructType {
    bool isUnion = false;
    std::vector<Field> fields;

    std::size_t indexOf(std::string_view name) const;  // throws NoSuchField
    std::ptrdiff_t findField(std::string_view name) const;  // -1 when absent
};

struct ArrayType {
    Dim size = Dim::free();
    TypePtr elem;
};

struct NamedType {
    std::string name;
};

struct AnyType {};

struct TypeNode {
    using Variant = std::variant<NumType, StringType, StructType, ArrayType, NamedType, AnyType>;
    Variant v;

    const NumType* asNum() const { return std::get_if<NumType>(&v); }
    const StringType* asString() const { return std::get_if<StringType>(&v); }
    const StructType* asStruct() const { return std::get_if<StructType>(&v); }
    const ArrayType* asArray() const { return std::get_if<ArrayType>(&v); }
    const NamedType* asNamed() const { return std::get_if<NamedType>(&v); }
    bool isAny() const { return std::holds_alternative<AnyType>(v); }
};

// Factories validate the structural invariants (unique field names, union
// constraints, at least one field) so hand-built trees are as safe as parsed
// ones.
TypePtr makeNum(NumKind kind, std::vector<Dim> dims = {});
TypePtr makeString(Dim size = Dim::free(), bool opaque = false);
TypePtr makeStruct(std::vector<Field> fields, bool isUnion = false);
TypePtr makeArray(Dim size, TypePtr elem);
TypePtr makeNamed(std::string name);
TypePtr makeAny();

// ---------------------------------------------------------------------------
// Type environment: the typedef table plus a root type. Immutable after
// construction; construction checks that every name resolves and that
// recursion is legal (every cycle passes through a union variant, an optional
// field, or a free-sized array, so data instances stay finite).

class TypeEnv;
using EnvPtr = std::shared_ptr<const TypeEnv>;

class TypeEnv {
public:
    static EnvPtr make(TypePtr root, std::map<std::string, TypePtr, std::less<>> typedefs = {});

    const TypePtr& root() const { return root_; }
    const std::map<std::string, TypePtr, std::less<>>& typedefs() const { return defs_; }

    bool has(std::string_view name) const { return defs_.find(name) != defs_.end(); }
    // Returns the typedef body as stored; nested names stay unresolved.
    TypePtr resolve(std::string_view name) const;
    // Chases named references until a structural node is reached.
    TypePtr resolveFully(TypePtr t) const;

private:
    TypeEnv() = default;
    std::map<std::string, TypePtr, std::less<>> defs_;
    TypePtr root_;
};

// ---------------------------------------------------------------------------
// Operations

// Structural equality after resolving names; recursive types are compared
// coinductively (a revisited pair is assumed equal).
bool typeEquals(const TypePtr& a, const TypeEnv& envA, const TypePtr& b, const TypeEnv& envB);
bool typeEquals(const TypePtr& a, const TypePtr& b, const TypeEnv& env);

// Node-for-node equality without resolving names (names compare by spelling).
bool syntacticEquals(const TypePtr& a, const TypePtr& b);
bool envEquals(const TypeEnv& a, const TypeEnv& b);

// Canonical textual form: typedefs reachable from t (sorted by name) first,
// then t itself, all terminated with ';'. Reparsing yields an equal env.
std::string printType(const TypePtr& t, const TypeEnv& env);
std::string printTypeExpr(const TypePtr& t);  // just the type expression, single line

// True when a value's encoded size cannot be computed from the type alone.
bool isVariableSize(const TypePtr& t, const TypeEnv& env);

// Exact encoded byte size for fixed-size types; throws VariableSize otherwise.
std::uint64_t fixedByteSize(const TypePtr& t, const TypeEnv& env);

// Smallest number of bytes any value of this type can occupy in the wire
// encoding; used to bound count fields against remaining input.
std::uint64_t minEncodedSize(const TypePtr& t, const TypeEnv& env);

}  // namespace structfile
