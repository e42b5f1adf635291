#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "structfile/matrix.hpp"
#include "structfile/types.hpp"

namespace structfile {

class DataImpl;
using ImplPtr = std::shared_ptr<DataImpl>;

// Reference-counted handle to a data object; the only surface application
// code touches. Copying a handle aliases the same object; deep copies go
// through copyFrom(). A default-constructed handle is null and every
// operation on it raises NullHandle.
class DataHandle {
public:
    DataHandle() = default;
    explicit DataHandle(ImplPtr impl) : impl_(std::move(impl)) {}

    bool isNull() const { return !impl_; }
    explicit operator bool() const { return bool(impl_); }

    // Null handles report a null type; a bound any-node reports the type it
    // was actualized to, an unbound one reports the any type itself.
    TypePtr type() const;
    // The type the enclosing schema declares for this position (any stays any).
    TypePtr declaredType() const;
    EnvPtr env() const;
    bool readOnly() const;

    // -- structs and unions
    std::size_t nFields() const;
    const std::string& fieldName(std::size_t i) const;
    DataHandle field(std::string_view name) const;
    DataHandle fieldAt(std::size_t i) const;
    bool fieldPresent(std::string_view name) const;
    void setFieldPresent(std::string_view name) const;
    void unsetField(std::string_view name) const;
    std::size_t activeField() const;
    void setActiveField(std::size_t i) const;

    // -- arrays
    std::size_t nElements() const;
    DataHandle elem(std::size_t i) const;
    void resize(std::size_t n) const;

    // -- elementary values
    std::int64_t getInt() const;
    double getDouble() const;
    std::string getString() const;
    MatrixValue getMatrix() const;
    void getF16(std::byte out[16]) const;
    void assignInt(std::int64_t v) const;
    void assignDouble(double v) const;
    void assignString(std::string_view v) const;
    void assignMatrix(const MatrixValue& m) const;
    void assignF16(const std::byte in[16]) const;

    // -- any-type late binding
    void actualizeType(const TypePtr& t) const;
    void actualizeType(const TypePtr& t, const EnvPtr& typeEnv) const;
    TypePtr anyBoundType() const;  // null while unbound
    EnvPtr anyBoundEnv() const;

    // Deep copy; requires structurally equal declared types.
    void copyFrom(const DataHandle& src) const;

    // Paper-style indexing.
    DataHandle operator[](std::string_view name) const { return field(name); }
    DataHandle operator[](const char* name) const { return field(name); }
    DataHandle operator[](std::size_t i) const;

    const ImplPtr& impl() const { return impl_; }

private:
    DataImpl& ref() const;
    ImplPtr impl_;
};

// Contract every storage representation fills in. Operations that do not
// apply to the represented type fall through to WrongType.
class DataImpl {
public:
    virtual ~DataImpl() = default;

    virtual TypePtr declaredType() const = 0;
    virtual TypePtr type() const { return declaredType(); }
    virtual EnvPtr env() const = 0;
    virtual bool readOnly() const { return false; }

    virtual std::size_t nFields();
    virtual ImplPtr fieldImpl(std::size_t i);
    virtual bool fieldPresent(std::size_t i);
    virtual void setFieldPresent(std::size_t i);
    virtual void unsetField(std::size_t i);
    virtual std::size_t activeField();
    virtual void setActiveField(std::size_t i);

    virtual std::size_t nElements();
    virtual ImplPtr elemImpl(std::size_t i);
    virtual void resize(std::size_t n);

    virtual std::int64_t getInt();
    virtual double getDouble();
    virtual std::string getString();
    virtual MatrixValue getMatrix();
    virtual void readScalarCell(std::byte out[16]);
    virtual void assignInt(std::int64_t v);
    virtual void assignDouble(double v);
    virtual void assignString(std::string_view v);
    virtual void assignMatrix(const MatrixValue& m);
    virtual void writeScalarCell(const std::byte in[16]);

    virtual void actualizeType(const TypePtr& t, const EnvPtr& typeEnv);
    virtual TypePtr anyBoundType();
    virtual EnvPtr anyBoundEnv();
    virtual ImplPtr anyTargetImpl();
    // Copy support: force a binding (or unbind with a null type).
    virtual void rebindAny(const TypePtr& t, const EnvPtr& typeEnv);

    // Streaming-writer support: drop a committed child, freeing its memory.
    virtual void commitChild(std::size_t i);
};

// Creates an in-memory tree mirroring the type: non-optional struct fields
// built, optional ones absent, unions on variant 0, free arrays empty, fixed
// arrays filled, scalars zero, strings empty or zero-filled, any nodes
// unbound.
DataHandle newDirect(const TypePtr& t, const EnvPtr& env);
DataHandle newDirect(const EnvPtr& env);  // env root type

// Number of live in-memory data nodes; lets tests watch commit reclamation.
std::size_t directNodeCount();

// Structural value comparison across representations. Numeric scalars and
// matrix payloads compare bitwise, matrix index bases are ignored.
bool dataEquals(const DataHandle& a, const DataHandle& b);

// Successive field/element accesses: "atoms[0].name".
DataHandle pathGet(const DataHandle& root, std::string_view path);

// Walks a data tree in serialization order: struct fields in declaration
// order with absent optional fields skipped, only the active union variant,
// array elements by index. After the last sibling of a level the cursor is
// at end and only up() is legal.
class TreeCursor {
public:
    TreeCursor() = default;
    explicit TreeCursor(DataHandle root);

    bool atEnd() const;
    bool atRoot() const { return levels_.empty() && !rootEnd_; }
    DataHandle current() const;
    bool hasSubs() const;

    void next();
    void down();
    void up();

    // Declared child indices from the root to the current node.
    std::vector<std::size_t> path() const;

    const DataHandle& root() const { return root_; }

private:
    struct Level {
        DataHandle container;
        TypePtr containerType;  // resolved struct/union/array node
        std::size_t index = 0;  // declared index of the current child
        bool end = false;
    };
    // Declared index of the first visited child at or after `from`, or none.
    static bool firstVisited(const DataHandle& container, const TypePtr& ct, std::size_t from,
                             std::size_t& out);

    DataHandle root_;
    std::vector<Level> levels_;
    bool rootEnd_ = false;
};

}  // namespace structfile
