#include "structfile/data.hpp"

#include <atomic>
#include <cstring>

#include "data_internal.hpp"

namespace structfile {

// ---------------------------------------------------------------------------
// DataImpl defaults

namespace {
[[noreturn]] void wrongType(const char* op) {
    fail(Errc::WrongType, std::string(op) + " does not apply to this data type");
}
}  // namespace

std::size_t DataImpl::nFields() { wrongType("nFields"); }
ImplPtr DataImpl::fieldImpl(std::size_t) { wrongType("getField"); }
bool DataImpl::fieldPresent(std::size_t) { wrongType("fieldPresent"); }
void DataImpl::setFieldPresent(std::size_t) { wrongType("setFieldPresent"); }
void DataImpl::unsetField(std::size_t) { wrongType("unsetField"); }
std::size_t DataImpl::activeField() { wrongType("getActiveField"); }
void DataImpl::setActiveField(std::size_t) { wrongType("setActiveField"); }
std::size_t DataImpl::nElements() { wrongType("nElements"); }
ImplPtr DataImpl::elemImpl(std::size_t) { wrongType("getElem"); }
void DataImpl::resize(std::size_t) { wrongType("resize"); }
std::int64_t DataImpl::getInt() { wrongType("getInt"); }
double DataImpl::getDouble() { wrongType("getDouble"); }
std::string DataImpl::getString() { wrongType("getString"); }
MatrixValue DataImpl::getMatrix() { wrongType("getMatrix"); }
void DataImpl::readScalarCell(std::byte*) { wrongType("readScalarCell"); }
void DataImpl::assignInt(std::int64_t) { wrongType("assignInt"); }
void DataImpl::assignDouble(double) { wrongType("assignDouble"); }
void DataImpl::assignString(std::string_view) { wrongType("assignString"); }
void DataImpl::assignMatrix(const MatrixValue&) { wrongType("assignMatrix"); }
void DataImpl::writeScalarCell(const std::byte*) { wrongType("writeScalarCell"); }
void DataImpl::actualizeType(const TypePtr&, const EnvPtr&) {
    fail(Errc::NotAnyType, "actualizeType applies only to any-typed nodes");
}
TypePtr DataImpl::anyBoundType() { fail(Errc::NotAnyType, "not an any-typed node"); }
EnvPtr DataImpl::anyBoundEnv() { fail(Errc::NotAnyType, "not an any-typed node"); }
ImplPtr DataImpl::anyTargetImpl() { fail(Errc::NotAnyType, "not an any-typed node"); }
void DataImpl::rebindAny(const TypePtr&, const EnvPtr&) {
    fail(Errc::NotAnyType, "not an any-typed node");
}
void DataImpl::commitChild(std::size_t) { wrongType("commitChild"); }

// ---------------------------------------------------------------------------
// In-memory (direct) representation

namespace {

std::atomic<std::size_t> g_directNodes{0};

class DirectBase : public DataImpl {
public:
    DirectBase(TypePtr type, EnvPtr env) : type_(std::move(type)), env_(std::move(env)) {
        g_directNodes.fetch_add(1, std::memory_order_relaxed);
    }
    ~DirectBase() override { g_directNodes.fetch_sub(1, std::memory_order_relaxed); }

    TypePtr declaredType() const override { return type_; }
    EnvPtr env() const override { return env_; }

protected:
    TypePtr type_;  // resolved structural node
    EnvPtr env_;
};

class DirectNum final : public DirectBase {
public:
    DirectNum(TypePtr type, EnvPtr env) : DirectBase(std::move(type), std::move(env)) {
        cell_.fill(std::byte{0});
    }
    NumKind kind() const { return type_->asNum()->kind; }

    std::int64_t getInt() override { return detail::scalarToInt(cell_.data(), kind()); }
    double getDouble() override { return detail::scalarToDouble(cell_.data(), kind()); }
    void assignInt(std::int64_t v) override { detail::scalarAssignInt(cell_.data(), kind(), v); }
    void assignDouble(double v) override { detail::scalarAssignDouble(cell_.data(), kind(), v); }
    void readScalarCell(std::byte* out) override {
        std::memcpy(out, cell_.data(), 16);
    }
    void writeScalarCell(const std::byte* in) override { std::memcpy(cell_.data(), in, 16); }

private:
    std::array<std::byte, 16> cell_{};  // little-endian, zero-padded to 16
};

class DirectMatrix final : public DirectBase {
public:
    DirectMatrix(TypePtr type, EnvPtr env) : DirectBase(std::move(type), std::move(env)) {
        const NumType& n = *type_->asNum();
        std::vector<std::int64_t> counts;
        counts.reserve(n.dims.size());
        for (Dim d : n.dims) counts.push_back(d.isFree() ? 0 : d.count());
        value_ = MatrixValue(n.kind, MatrixShape::fromCounts(counts));
    }

    MatrixValue getMatrix() override { return value_; }
    void assignMatrix(const MatrixValue& m) override {
        detail::checkMatrixAssign(*type_->asNum(), m);
        value_ = m;
    }

private:
    MatrixValue value_;
};

class DirectString final : public DirectBase {
public:
    DirectString(TypePtr type, EnvPtr env) : DirectBase(std::move(type), std::move(env)) {
        const StringType& s = *type_->asString();
        if (!s.size.isFree()) bytes_.assign(std::size_t(s.size.count()), '\0');
    }

    std::string getString() override { return bytes_; }
    void assignString(std::string_view v) override {
        const StringType& s = *type_->asString();
        if (s.size.isFree()) {
            bytes_.assign(v);
            return;
        }
        std::size_t n = std::size_t(s.size.count());
        if (v.size() > n)
            fail(Errc::StringTooLong, std::to_string(v.size()) + " bytes into a " +
                                          std::to_string(n) + "-byte string");
        bytes_.assign(v);
        bytes_.resize(n, '\0');
    }

private:
    std::string bytes_;
};

class DirectStruct final : public DirectBase {
public:
    DirectStruct(TypePtr type, EnvPtr env, std::unordered_set<const TypeNode*>& building)
        : DirectBase(std::move(type), std::move(env)) {
        const StructType& st = *type_->asStruct();
        children_.resize(st.fields.size());
        // The active union variant materializes on first access; this keeps
        // default construction proportional to the type's minimum data size.
        if (!st.isUnion) {
            for (std::size_t i = 0; i < st.fields.size(); ++i)
                if (!st.fields[i].optional)
                    children_[i] = detail::newDirectImpl(st.fields[i].type, env_, building);
        }
    }

    const StructType& st() const { return *type_->asStruct(); }

    std::size_t nFields() override { return st().fields.size(); }

    ImplPtr fieldImpl(std::size_t i) override {
        checkIndex(i);
        checkNotCommitted(i);
        if (st().isUnion) {
            if (i != active_)
                fail(Errc::InactiveUnionField, "field " + std::to_string(i) + " is not active");
            if (!children_[i])
                children_[i] = detail::newDirectImpl(st().fields[i].type, env_);
            return children_[i];
        }
        if (!children_[i])
            fail(Errc::FieldNotPresent, "optional field '" + st().fields[i].name + "' is unset");
        return children_[i];
    }

    bool fieldPresent(std::size_t i) override {
        requireStructNotUnion();
        checkIndex(i);
        checkNotCommitted(i);
        return children_[i] != nullptr;
    }
    void setFieldPresent(std::size_t i) override {
        requireStructNotUnion();
        checkIndex(i);
        checkNotCommitted(i);
        if (!st().fields[i].optional)
            fail(Errc::NotOptional, "field '" + st().fields[i].name + "' is not optional");
        if (!children_[i]) children_[i] = detail::newDirectImpl(st().fields[i].type, env_);
    }
    void unsetField(std::size_t i) override {
        requireStructNotUnion();
        checkIndex(i);
        checkNotCommitted(i);
        if (!st().fields[i].optional)
            fail(Errc::NotOptional, "field '" + st().fields[i].name + "' is not optional");
        children_[i].reset();
    }

    std::size_t activeField() override {
        requireUnion();
        return active_;
    }
    void setActiveField(std::size_t i) override {
        requireUnion();
        checkIndex(i);
        if (i == active_) return;
        children_[active_].reset();
        active_ = i;  // the new variant materializes on first access
    }

    void commitChild(std::size_t i) override {
        if (st().isUnion) {
            if (i != active_) fail(Errc::CursorOrderViolation, "commit of an inactive variant");
            committedPrefix_ = children_.size();
            children_[i].reset();
            return;
        }
        if (i != committedPrefix_)
            fail(Errc::CursorOrderViolation, "commit out of order");
        committedPrefix_ = i + 1;
        children_[i].reset();
    }

private:
    void checkIndex(std::size_t i) const {
        if (i >= children_.size())
            fail(Errc::IndexOutOfRange,
                 "field index " + std::to_string(i) + " of " + std::to_string(children_.size()));
    }
    void checkNotCommitted(std::size_t i) const {
        if (i < committedPrefix_)
            fail(Errc::WriteOnlySession, "field was committed to disk and released");
    }
    void requireUnion() const {
        if (!st().isUnion) fail(Errc::WrongType, "not a union");
    }
    void requireStructNotUnion() const {
        if (st().isUnion) fail(Errc::WrongType, "operation does not apply to a union");
    }

    std::vector<ImplPtr> children_;
    std::size_t active_ = 0;
    std::size_t committedPrefix_ = 0;
};

class DirectArray final : public DirectBase {
public:
    DirectArray(TypePtr type, EnvPtr env, std::unordered_set<const TypeNode*>& building)
        : DirectBase(std::move(type), std::move(env)) {
        const ArrayType& a = *type_->asArray();
        if (!a.size.isFree()) {
            elems_.resize(std::size_t(a.size.count()));
            for (auto& e : elems_) e = detail::newDirectImpl(a.elem, env_, building);
        }
    }

    std::size_t nElements() override { return elems_.size(); }

    ImplPtr elemImpl(std::size_t i) override {
        if (i >= elems_.size())
            fail(Errc::IndexOutOfRange,
                 "element " + std::to_string(i) + " of " + std::to_string(elems_.size()));
        if (i < committedPrefix_)
            fail(Errc::WriteOnlySession, "element was committed to disk and released");
        return elems_[i];
    }

    void resize(std::size_t n) override {
        const ArrayType& a = *type_->asArray();
        if (!a.size.isFree()) fail(Errc::FixedSize, "cannot resize a fixed-size array");
        if (n < committedPrefix_)
            fail(Errc::WriteOnlySession, "cannot shrink below the committed prefix");
        std::size_t old = elems_.size();
        elems_.resize(n);
        for (std::size_t i = old; i < n; ++i)
            elems_[i] = detail::newDirectImpl(a.elem, env_);
    }

    void commitChild(std::size_t i) override {
        if (i != committedPrefix_)
            fail(Errc::CursorOrderViolation, "commit out of order");
        committedPrefix_ = i + 1;
        elems_[i].reset();
    }

private:
    std::vector<ImplPtr> elems_;
    std::size_t committedPrefix_ = 0;
};

// Late-bound node: unbound it rejects all data access, bound it forwards
// everything to the target.
class AnyNode final : public DirectBase {
public:
    explicit AnyNode(EnvPtr declEnv) : DirectBase(makeAny(), std::move(declEnv)) {}

    TypePtr type() const override { return target_ ? target_->type() : type_; }

    void actualizeType(const TypePtr& t, const EnvPtr& typeEnv) override {
        if (target_) fail(Errc::AlreadyBound, "any node already has a bound type");
        bind(t, typeEnv);
    }
    void rebindAny(const TypePtr& t, const EnvPtr& typeEnv) override {
        if (!t) {
            target_.reset();
            boundType_.reset();
            boundEnv_.reset();
            return;
        }
        bind(t, typeEnv);
    }
    TypePtr anyBoundType() override { return boundType_; }
    EnvPtr anyBoundEnv() override { return boundEnv_; }
    ImplPtr anyTargetImpl() override { return target_; }

    // Used by the decoders to attach an already-built value.
    void adopt(TypePtr boundType, EnvPtr boundEnv, ImplPtr target) {
        boundType_ = std::move(boundType);
        boundEnv_ = std::move(boundEnv);
        target_ = std::move(target);
    }

    std::size_t nFields() override { return fwd().nFields(); }
    ImplPtr fieldImpl(std::size_t i) override { return fwd().fieldImpl(i); }
    bool fieldPresent(std::size_t i) override { return fwd().fieldPresent(i); }
    void setFieldPresent(std::size_t i) override { fwd().setFieldPresent(i); }
    void unsetField(std::size_t i) override { fwd().unsetField(i); }
    std::size_t activeField() override { return fwd().activeField(); }
    void setActiveField(std::size_t i) override { fwd().setActiveField(i); }
    std::size_t nElements() override { return fwd().nElements(); }
    ImplPtr elemImpl(std::size_t i) override { return fwd().elemImpl(i); }
    void resize(std::size_t n) override { fwd().resize(n); }
    std::int64_t getInt() override { return fwd().getInt(); }
    double getDouble() override { return fwd().getDouble(); }
    std::string getString() override { return fwd().getString(); }
    MatrixValue getMatrix() override { return fwd().getMatrix(); }
    void readScalarCell(std::byte* out) override { fwd().readScalarCell(out); }
    void assignInt(std::int64_t v) override { fwd().assignInt(v); }
    void assignDouble(double v) override { fwd().assignDouble(v); }
    void assignString(std::string_view v) override { fwd().assignString(v); }
    void assignMatrix(const MatrixValue& m) override { fwd().assignMatrix(m); }
    void writeScalarCell(const std::byte* in) override { fwd().writeScalarCell(in); }
    void commitChild(std::size_t i) override { fwd().commitChild(i); }

private:
    void bind(const TypePtr& t, const EnvPtr& typeEnv) {
        EnvPtr e = typeEnv ? typeEnv : env_;
        TypePtr resolved = e->resolveFully(t);
        if (resolved->isAny()) fail(Errc::ValidationError, "cannot bind an any node to any");
        boundType_ = t;
        boundEnv_ = e;
        target_ = detail::newDirectImpl(t, e);
    }
    DataImpl& fwd() {
        if (!target_) fail(Errc::UnboundAny, "any node has no bound type yet");
        return *target_;
    }

    TypePtr boundType_;
    EnvPtr boundEnv_;
    ImplPtr target_;
};

}  // namespace

namespace detail {

std::int64_t scalarToInt(const std::byte* cell, NumKind k) {
    if (numIsFloat(k)) fail(Errc::WrongType, "getInt on a floating-point value");
    if (k == NumKind::U8) {
        std::uint64_t raw = cell::decodeUint(cell, k);
        if (raw > std::uint64_t(INT64_MAX))
            fail(Errc::LossyRead, "u8 value exceeds the signed 64-bit range");
        return std::int64_t(raw);
    }
    return cell::decodeInt(cell, k);
}

double scalarToDouble(const std::byte* cell, NumKind k) { return cell::decodeDouble(cell, k); }

void scalarAssignInt(std::byte* cell, NumKind k, std::int64_t v) {
    if (numIsFloat(k)) fail(Errc::WrongType, "assignInt on a floating-point value");
    checkIntRange(k, v);
    cell::encodeInt(cell, k, v);
}

void scalarAssignDouble(std::byte* cell, NumKind k, double v) {
    if (!numIsFloat(k)) fail(Errc::WrongType, "assignDouble on an integer value");
    cell::encodeDouble(cell, k, v);
}

void checkMatrixAssign(const NumType& declared, const MatrixValue& m) {
    if (m.kind() != declared.kind)
        fail(Errc::WrongType, "matrix kind does not match the declared kind");
    if (m.shape().rank() != declared.dims.size())
        fail(Errc::ShapeMismatch, "matrix rank does not match the declared rank");
    for (std::size_t i = 0; i < declared.dims.size(); ++i) {
        if (!declared.dims[i].isFree() && m.shape().count(i) != declared.dims[i].count())
            fail(Errc::ShapeMismatch, "fixed dimension " + std::to_string(i) + " expects " +
                                          std::to_string(declared.dims[i].count()) + " elements");
        if (m.shape().count(i) < 0) fail(Errc::ShapeMismatch, "negative dimension count");
    }
    if (!m.shape().firstIndexFastest())
        fail(Errc::ShapeMismatch, "storage order must be first-index-fastest");
}

void checkIntRange(NumKind k, std::int64_t v) {
    bool ok = true;
    switch (k) {
        case NumKind::I1: ok = v >= -128 && v <= 127; break;
        case NumKind::U1: ok = v >= 0 && v <= 255; break;
        case NumKind::I2: ok = v >= -32768 && v <= 32767; break;
        case NumKind::U2: ok = v >= 0 && v <= 65535; break;
        case NumKind::I4: ok = v >= INT32_MIN && v <= INT32_MAX; break;
        case NumKind::U4: ok = v >= 0 && v <= 0xffffffffLL; break;
        case NumKind::I8: ok = true; break;
        case NumKind::U8: ok = v >= 0; break;
        default: ok = false; break;
    }
    if (!ok)
        fail(Errc::OutOfRange,
             std::to_string(v) + " does not fit " + numKindName(k));
}

ImplPtr newDirectImpl(const TypePtr& t, const EnvPtr& env,
                      std::unordered_set<const TypeNode*>& building) {
    if (!env) fail(Errc::ValidationError, "null type environment");
    TypePtr r = env->resolveFully(t);
    if (!building.insert(r.get()).second)
        fail(Errc::ValidationError,
             "type has no finite default instance (recursive default construction)");
    struct Pop {
        std::unordered_set<const TypeNode*>& s;
        const TypeNode* n;
        ~Pop() { s.erase(n); }
    } pop{building, r.get()};

    if (const auto* n = r->asNum())
        return n->dims.empty() ? ImplPtr(std::make_shared<DirectNum>(r, env))
                               : ImplPtr(std::make_shared<DirectMatrix>(r, env));
    if (r->asString()) return std::make_shared<DirectString>(r, env);
    if (r->asStruct()) return std::make_shared<DirectStruct>(r, env, building);
    if (r->asArray()) return std::make_shared<DirectArray>(r, env, building);
    return std::make_shared<AnyNode>(env);
}

ImplPtr newDirectImpl(const TypePtr& t, const EnvPtr& env) {
    std::unordered_set<const TypeNode*> building;
    return newDirectImpl(t, env, building);
}

ImplPtr makeAnyNode(const EnvPtr& declEnv) { return std::make_shared<AnyNode>(declEnv); }

ImplPtr makeBoundAny(const EnvPtr& declEnv, TypePtr boundType, EnvPtr boundEnv, ImplPtr target) {
    auto node = std::make_shared<AnyNode>(declEnv);
    node->adopt(std::move(boundType), std::move(boundEnv), std::move(target));
    return node;
}

}  // namespace detail

DataHandle newDirect(const TypePtr& t, const EnvPtr& env) {
    return DataHandle(detail::newDirectImpl(t, env));
}

DataHandle newDirect(const EnvPtr& env) {
    if (!env) fail(Errc::ValidationError, "null type environment");
    return newDirect(env->root(), env);
}

std::size_t directNodeCount() { return g_directNodes.load(std::memory_order_relaxed); }

// ---------------------------------------------------------------------------
// DataHandle

DataImpl& DataHandle::ref() const {
    if (!impl_) fail(Errc::NullHandle, "operation on a null data handle");
    return *impl_;
}

TypePtr DataHandle::type() const { return impl_ ? impl_->type() : TypePtr(); }
TypePtr DataHandle::declaredType() const { return ref().declaredType(); }
EnvPtr DataHandle::env() const { return ref().env(); }
bool DataHandle::readOnly() const { return ref().readOnly(); }

std::size_t DataHandle::nFields() const { return ref().nFields(); }

const std::string& DataHandle::fieldName(std::size_t i) const {
    TypePtr t = ref().type();
    const auto* st = t->asStruct();
    if (!st) wrongType("fieldName");
    if (i >= st->fields.size()) fail(Errc::IndexOutOfRange, "field index " + std::to_string(i));
    return st->fields[i].name;
}

DataHandle DataHandle::field(std::string_view name) const {
    TypePtr t = ref().type();
    const auto* st = t->asStruct();
    if (!st) return DataHandle(ref().fieldImpl(0));  // raises the natural error
    return DataHandle(ref().fieldImpl(st->indexOf(name)));
}

DataHandle DataHandle::fieldAt(std::size_t i) const { return DataHandle(ref().fieldImpl(i)); }

bool DataHandle::fieldPresent(std::string_view name) const {
    TypePtr t = ref().type();
    const auto* st = t->asStruct();
    if (!st) return ref().fieldPresent(0);
    return ref().fieldPresent(st->indexOf(name));
}

void DataHandle::setFieldPresent(std::string_view name) const {
    TypePtr t = ref().type();
    const auto* st = t->asStruct();
    if (!st) return ref().setFieldPresent(0);
    ref().setFieldPresent(st->indexOf(name));
}

void DataHandle::unsetField(std::string_view name) const {
    TypePtr t = ref().type();
    const auto* st = t->asStruct();
    if (!st) return ref().unsetField(0);
    ref().unsetField(st->indexOf(name));
}

std::size_t DataHandle::activeField() const { return ref().activeField(); }
void DataHandle::setActiveField(std::size_t i) const { ref().setActiveField(i); }

std::size_t DataHandle::nElements() const { return ref().nElements(); }
DataHandle DataHandle::elem(std::size_t i) const { return DataHandle(ref().elemImpl(i)); }
void DataHandle::resize(std::size_t n) const { ref().resize(n); }

std::int64_t DataHandle::getInt() const { return ref().getInt(); }
double DataHandle::getDouble() const { return ref().getDouble(); }
std::string DataHandle::getString() const { return ref().getString(); }
MatrixValue DataHandle::getMatrix() const { return ref().getMatrix(); }

void DataHandle::getF16(std::byte out[16]) const {
    TypePtr t = ref().type();
    const auto* n = t->asNum();
    if (!n || n->kind != NumKind::F16 || !n->dims.empty())
        fail(Errc::WrongType, "getF16 needs a scalar real*16");
    ref().readScalarCell(out);
}

void DataHandle::assignInt(std::int64_t v) const { ref().assignInt(v); }
void DataHandle::assignDouble(double v) const { ref().assignDouble(v); }
void DataHandle::assignString(std::string_view v) const { ref().assignString(v); }
void DataHandle::assignMatrix(const MatrixValue& m) const { ref().assignMatrix(m); }

void DataHandle::assignF16(const std::byte in[16]) const {
    TypePtr t = ref().type();
    const auto* n = t->asNum();
    if (!n || n->kind != NumKind::F16 || !n->dims.empty())
        fail(Errc::WrongType, "assignF16 needs a scalar real*16");
    ref().writeScalarCell(in);
}

void DataHandle::actualizeType(const TypePtr& t) const { ref().actualizeType(t, ref().env()); }
void DataHandle::actualizeType(const TypePtr& t, const EnvPtr& typeEnv) const {
    ref().actualizeType(t, typeEnv);
}

TypePtr DataHandle::anyBoundType() const { return ref().anyBoundType(); }
EnvPtr DataHandle::anyBoundEnv() const { return ref().anyBoundEnv(); }

DataHandle DataHandle::operator[](std::size_t i) const {
    TypePtr t = ref().type();
    if (t->asStruct()) return fieldAt(i);
    return elem(i);
}

// ---------------------------------------------------------------------------
// Deep copy

namespace {

void copyRec(const DataHandle& dst, const DataHandle& src, const TypePtr& dstType,
             const EnvPtr& dstEnv, const TypePtr& srcType, const EnvPtr& srcEnv) {
    TypePtr dt = dstEnv->resolveFully(dstType);
    TypePtr st = srcEnv->resolveFully(srcType);

    if (dt->isAny()) {
        TypePtr bound = src.anyBoundType();
        if (!bound) {
            dst.impl()->rebindAny(TypePtr(), EnvPtr());
            return;
        }
        EnvPtr boundEnv = src.anyBoundEnv();
        dst.impl()->rebindAny(bound, boundEnv);
        copyRec(dst, src, bound, boundEnv, bound, boundEnv);
        return;
    }
    if (const auto* n = dt->asNum()) {
        if (n->dims.empty()) {
            std::byte cell[16];
            src.impl()->readScalarCell(cell);
            dst.impl()->writeScalarCell(cell);
        } else {
            dst.assignMatrix(src.getMatrix());
        }
        return;
    }
    if (dt->asString()) {
        dst.assignString(src.getString());
        return;
    }
    if (const auto* s = dt->asStruct()) {
        if (s->isUnion) {
            std::size_t active = src.activeField();
            dst.setActiveField(active);
            copyRec(dst.fieldAt(active), src.fieldAt(active), s->fields[active].type, dstEnv,
                    st->asStruct()->fields[active].type, srcEnv);
            return;
        }
        for (std::size_t i = 0; i < s->fields.size(); ++i) {
            if (s->fields[i].optional) {
                if (!src.impl()->fieldPresent(i)) {
                    dst.impl()->unsetField(i);
                    continue;
                }
                dst.impl()->setFieldPresent(i);
            }
            copyRec(dst.fieldAt(i), src.fieldAt(i), s->fields[i].type, dstEnv,
                    st->asStruct()->fields[i].type, srcEnv);
        }
        return;
    }
    const auto* a = dt->asArray();
    std::size_t n = src.nElements();
    if (a->size.isFree())
        dst.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        copyRec(dst.elem(i), src.elem(i), a->elem, dstEnv, st->asArray()->elem, srcEnv);
}

}  // namespace

void DataHandle::copyFrom(const DataHandle& src) const {
    DataImpl& d = ref();
    if (src.isNull()) fail(Errc::NullHandle, "copy from a null handle");
    if (impl_ == src.impl_) return;
    if (!typeEquals(d.declaredType(), *d.env(), src.declaredType(), *src.env()))
        fail(Errc::TypeMismatch, "copy between structurally different types");
    copyRec(*this, src, d.declaredType(), d.env(), src.declaredType(), src.env());
}

// ---------------------------------------------------------------------------
// Structural comparison

namespace {

bool equalsRecData(const DataHandle& a, const DataHandle& b, const TypePtr& ta, const EnvPtr& ea,
                   const TypePtr& tb, const EnvPtr& eb) {
    TypePtr ra = ea->resolveFully(ta);
    TypePtr rb = eb->resolveFully(tb);

    if (ra->isAny()) {
        TypePtr ba = a.anyBoundType();
        TypePtr bb = b.anyBoundType();
        if (!ba || !bb) return !ba && !bb;
        EnvPtr bea = a.anyBoundEnv();
        EnvPtr beb = b.anyBoundEnv();
        if (!typeEquals(ba, *bea, bb, *beb)) return false;
        return equalsRecData(a, b, ba, bea, bb, beb);
    }
    if (const auto* n = ra->asNum()) {
        if (n->dims.empty()) {
            std::byte ca[16], cb[16];
            a.impl()->readScalarCell(ca);
            b.impl()->readScalarCell(cb);
            return std::memcmp(ca, cb, std::size_t(numWidth(n->kind))) == 0;
        }
        MatrixValue ma = a.getMatrix();
        MatrixValue mb = b.getMatrix();
        if (ma.shape().rank() != mb.shape().rank()) return false;
        for (std::size_t i = 0; i < ma.shape().rank(); ++i)
            if (ma.shape().count(i) != mb.shape().count(i)) return false;
        return ma.payload() == mb.payload();
    }
    if (ra->asString()) return a.getString() == b.getString();
    if (const auto* s = ra->asStruct()) {
        const auto* sb = rb->asStruct();
        if (s->isUnion) {
            std::size_t active = a.activeField();
            if (active != b.activeField()) return false;
            return equalsRecData(a.fieldAt(active), b.fieldAt(active), s->fields[active].type,
                                 ea, sb->fields[active].type, eb);
        }
        for (std::size_t i = 0; i < s->fields.size(); ++i) {
            if (s->fields[i].optional) {
                bool pa = a.impl()->fieldPresent(i);
                if (pa != b.impl()->fieldPresent(i)) return false;
                if (!pa) continue;
            }
            if (!equalsRecData(a.fieldAt(i), b.fieldAt(i), s->fields[i].type, ea,
                               sb->fields[i].type, eb))
                return false;
        }
        return true;
    }
    const auto* arr = ra->asArray();
    if (a.nElements() != b.nElements()) return false;
    for (std::size_t i = 0; i < a.nElements(); ++i)
        if (!equalsRecData(a.elem(i), b.elem(i), arr->elem, ea, rb->asArray()->elem, eb))
            return false;
    return true;
}

}  // namespace

bool dataEquals(const DataHandle& a, const DataHandle& b) {
    if (a.isNull() || b.isNull()) return a.isNull() && b.isNull();
    if (!typeEquals(a.declaredType(), *a.env(), b.declaredType(), *b.env())) return false;
    return equalsRecData(a, b, a.declaredType(), a.env(), b.declaredType(), b.env());
}

// ---------------------------------------------------------------------------
// Path access

namespace {

bool isPathIdentStart(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool isPathIdentCont(char c) { return isPathIdentStart(c) || (c >= '0' && c <= '9'); }

}  // namespace

DataHandle pathGet(const DataHandle& root, std::string_view path) {
    DataHandle cur = root;
    if (cur.isNull()) fail(Errc::NullHandle, "path lookup on a null handle");
    std::size_t i = 0;
    bool first = true;
    while (i < path.size()) {
        if (path[i] == '[') {
            ++i;
            std::size_t start = i;
            while (i < path.size() && path[i] >= '0' && path[i] <= '9') ++i;
            if (i == start || i >= path.size() || path[i] != ']')
                fail(Errc::PathSyntax, "expected '[index]' in path at position " +
                                           std::to_string(start));
            std::uint64_t idx = 0;
            for (std::size_t k = start; k < i; ++k) {
                idx = idx * 10 + std::uint64_t(path[k] - '0');
                if (idx > UINT32_MAX) fail(Errc::PathSyntax, "index too large in path");
            }
            ++i;  // ']'
            cur = cur.elem(std::size_t(idx));
        } else {
            if (!first) {
                if (path[i] != '.')
                    fail(Errc::PathSyntax,
                         "expected '.' or '[' at position " + std::to_string(i));
                ++i;
            }
            if (i >= path.size() || !isPathIdentStart(path[i]))
                fail(Errc::PathSyntax, "expected a field name at position " + std::to_string(i));
            std::size_t start = i;
            while (i < path.size() && isPathIdentCont(path[i])) ++i;
            cur = cur.field(path.substr(start, i - start));
        }
        first = false;
    }
    return cur;
}

// ---------------------------------------------------------------------------
// TreeCursor

TreeCursor::TreeCursor(DataHandle root) : root_(std::move(root)) {
    if (root_.isNull()) fail(Errc::NullHandle, "cursor over a null handle");
}

bool TreeCursor::atEnd() const { return levels_.empty() ? rootEnd_ : levels_.back().end; }

bool TreeCursor::firstVisited(const DataHandle& container, const TypePtr& ct, std::size_t from,
                              std::size_t& out) {
    if (const auto* st = ct->asStruct()) {
        if (st->isUnion) {
            std::size_t active = container.activeField();
            if (active >= from) {
                out = active;
                return true;
            }
            return false;
        }
        for (std::size_t i = from; i < st->fields.size(); ++i) {
            if (st->fields[i].optional && !container.impl()->fieldPresent(i)) continue;
            out = i;
            return true;
        }
        return false;
    }
    if (ct->asArray()) {
        if (from < container.nElements()) {
            out = from;
            return true;
        }
        return false;
    }
    return false;
}

DataHandle TreeCursor::current() const {
    if (atEnd()) fail(Errc::AtEnd, "cursor is past the last sibling");
    if (levels_.empty()) return root_;
    const Level& top = levels_.back();
    if (top.containerType->asStruct()) return top.container.fieldAt(top.index);
    return top.container.elem(top.index);
}

bool TreeCursor::hasSubs() const {
    DataHandle cur = current();
    TypePtr t = cur.type();
    if (t->isAny()) return false;  // unbound
    if (!t->asStruct() && !t->asArray()) return false;
    std::size_t dummy;
    return firstVisited(cur, t, 0, dummy);
}

void TreeCursor::next() {
    if (atEnd()) fail(Errc::AtEnd, "cursor is already past the last sibling");
    if (levels_.empty()) {
        rootEnd_ = true;
        return;
    }
    Level& top = levels_.back();
    std::size_t nxt;
    if (firstVisited(top.container, top.containerType, top.index + 1, nxt))
        top.index = nxt;
    else
        top.end = true;
}

void TreeCursor::down() {
    DataHandle cur = current();
    TypePtr t = cur.type();
    std::size_t first;
    if (t->isAny() || (!t->asStruct() && !t->asArray()) || !firstVisited(cur, t, 0, first))
        fail(Errc::NoChildren, "current node has no members to descend into");
    levels_.push_back(Level{cur, t, first, false});
}

void TreeCursor::up() {
    if (levels_.empty()) fail(Errc::AtRoot, "cursor is already at the root");
    levels_.pop_back();
}

std::vector<std::size_t> TreeCursor::path() const {
    if (atEnd()) fail(Errc::AtEnd, "cursor is past the last sibling");
    std::vector<std::size_t> p;
    p.reserve(levels_.size());
    for (const Level& l : levels_) p.push_back(l.index);
    return p;
}

}  // namespace structfile
