// Mapping of structured data onto store blocks: fixed-size values inline in
// their parent block, variable-size values behind an 8-byte address that is
// null until first written.

#include <cstring>
#include <unordered_set>

#include "blockstore_internal.hpp"
#include "data_internal.hpp"
#include "structfile/ddl.hpp"

namespace structfile {

class BlockNodeBase;

namespace {
ImplPtr makeBlockNode(std::shared_ptr<BlockStore> store, const TypePtr& t, const EnvPtr& env,
                      std::shared_ptr<BlockNodeBase> parent, std::size_t idx);
}

class BlockNodeBase : public DataImpl, public std::enable_shared_from_this<BlockNodeBase> {
public:
    BlockNodeBase(std::shared_ptr<BlockStore> store, TypePtr type, EnvPtr env,
                  std::shared_ptr<BlockNodeBase> parent, std::size_t idx)
        : store_(std::move(store)), type_(std::move(type)), env_(std::move(env)),
          parent_(std::move(parent)), idx_(idx) {}

    TypePtr declaredType() const override { return type_; }
    EnvPtr env() const override { return env_; }
    bool readOnly() const override { return !st().cfg.writable; }

    struct Slot {
        BlockAddress block;
        std::uint64_t off;
        bool isRef;
    };

    // Location of a child value's storage; composite nodes fill this in.
    virtual Slot childSlot(std::size_t, bool) {
        fail(Errc::WrongType, "node has no children");
    }

protected:
    struct Loc {
        BlockAddress block;
        std::uint64_t off;
        bool viaRef;
        BlockAddress slotBlock;  // valid when viaRef and not the root
        std::uint64_t slotOff;
        bool slotIsRoot;
    };

    BlockStore::State& st() const { return *store_->st_; }

    std::uint64_t readU64(BlockAddress b, std::uint64_t off) const {
        std::byte buf[8];
        st().readPayload(b, off, buf);
        return getU64(buf);
    }
    void writeU64(BlockAddress b, std::uint64_t off, std::uint64_t v) {
        std::byte buf[8];
        putU64(buf, v);
        st().writePayload(b, off, buf);
    }
    std::int32_t readI32(BlockAddress b, std::uint64_t off) const {
        std::byte buf[4];
        st().readPayload(b, off, buf);
        return std::int32_t(getU32(buf));
    }
    void writeI32(BlockAddress b, std::uint64_t off, std::int32_t v) {
        std::byte buf[4];
        putU32(buf, std::uint32_t(v));
        st().writePayload(b, off, buf);
    }
    std::uint16_t readU16(BlockAddress b, std::uint64_t off) const {
        std::byte buf[2];
        st().readPayload(b, off, buf);
        return std::uint16_t(std::to_integer<std::uint8_t>(buf[0]) |
                             (std::to_integer<std::uint8_t>(buf[1]) << 8));
    }
    void writeU16(BlockAddress b, std::uint64_t off, std::uint16_t v) {
        std::byte buf[2] = {std::byte(std::uint8_t(v)), std::byte(std::uint8_t(v >> 8))};
        st().writePayload(b, off, buf);
    }
    std::uint8_t readU8(BlockAddress b, std::uint64_t off) const {
        std::byte x;
        st().readPayload(b, off, {&x, 1});
        return std::to_integer<std::uint8_t>(x);
    }
    void writeU8(BlockAddress b, std::uint64_t off, std::uint8_t v) {
        std::byte x{v};
        st().writePayload(b, off, {&x, 1});
    }
    void writeZeros(BlockAddress b, std::uint64_t off, std::uint64_t n) {
        std::vector<std::byte> zeros(static_cast<std::size_t>(n));
        st().writePayload(b, off, zeros);
    }

    Loc locate(bool materialize) {
        std::lock_guard<std::recursive_mutex> lock(st().mu);
        if (!parent_) {
            bool variable = isVariableSize(type_, *env_);
            BlockAddress addr = st().rootAddr;
            if (!variable) return {addr, 0, false, 0, 0, false};
            if (addr == 0) {
                if (!materialize) fail(Errc::UnsetReference, "root value was never written");
                st().requireWritable();
                addr = st().allocLocked(initialBlockSize(type_, env_));
                st().rootAddr = addr;
                st().writeSuper();
            }
            return {addr, 0, true, 0, 0, true};
        }
        Slot s = parent_->childSlot(idx_, materialize);
        if (!s.isRef) return {s.block, s.off, false, 0, 0, false};
        BlockAddress addr = readU64(s.block, s.off);
        if (addr == 0) {
            if (!materialize)
                fail(Errc::UnsetReference, "referenced value was never written");
            st().requireWritable();
            addr = st().allocLocked(initialBlockSize(type_, env_));
            writeU64(s.block, s.off, addr);
        }
        return {addr, 0, true, s.block, s.off, false};
    }

    // Grows this node's own block, repointing whatever references it.
    void growOwnBlock(Loc& loc, std::uint64_t newSize) {
        BlockAddress b = store_->resizeBlock(loc.block, newSize);
        if (b != loc.block) {
            if (loc.slotIsRoot) {
                st().rootAddr = b;
                st().writeSuper();
            } else {
                writeU64(loc.slotBlock, loc.slotOff, b);
            }
            loc.block = b;
        }
    }

    // Frees every block owned by the value behind the ref slot at
    // (slotBlock, slotOff) and nulls the slot.
    void freeRefSlot(const TypePtr& t, const EnvPtr& env, BlockAddress slotBlock,
                     std::uint64_t slotOff) {
        BlockAddress addr = readU64(slotBlock, slotOff);
        if (addr == 0) return;
        freeValueBlock(t, env, addr);
        writeU64(slotBlock, slotOff, 0);
    }

    void freeValueBlock(const TypePtr& t, const EnvPtr& env, BlockAddress b) {
        TypePtr r = env->resolveFully(t);
        if (const auto* st_ = r->asStruct()) {
            if (st_->isUnion) {
                std::uint16_t sel = readU16(b, 0);
                if (sel < st_->fields.size()) {
                    const Field& f = st_->fields[sel];
                    if (isVariableSize(f.type, *env)) freeRefSlot(f.type, env, b, 2);
                }
            } else {
                std::uint64_t off = 0;
                for (const Field& f : st_->fields) {
                    bool variable = isVariableSize(f.type, *env);
                    std::uint64_t w = variable ? 8 : fixedByteSize(f.type, *env);
                    if (f.optional) {
                        std::uint8_t tag = readU8(b, off);
                        ++off;
                        if (tag != 0 && variable) freeRefSlot(f.type, env, b, off);
                    } else if (variable) {
                        freeRefSlot(f.type, env, b, off);
                    }
                    off += w;
                }
            }
        } else if (const auto* a = r->asArray()) {
            bool variable = isVariableSize(a->elem, *env);
            if (variable) {
                std::uint64_t base = a->size.isFree() ? 4 : 0;
                std::int64_t n = a->size.isFree() ? readI32(b, 0) : a->size.count();
                for (std::int64_t i = 0; i >= 0 && i < n; ++i)
                    freeRefSlot(a->elem, env, b, base + std::uint64_t(i) * 8);
            }
        } else if (r->isAny()) {
            std::int32_t len = readI32(b, 0);
            if (len >= 0) {
                std::string text(std::size_t(len), '\0');
                st().readPayload(b, 4, {reinterpret_cast<std::byte*>(text.data()), text.size()});
                try {
                    EnvPtr benv = parseTypeText(text);
                    if (isVariableSize(benv->root(), *benv))
                        freeRefSlot(benv->root(), benv, b, 4 + std::uint64_t(len));
                } catch (const Error&) {
                    // unreadable binding: just drop the block itself
                }
            }
        }
        st().freeLocked(b);
    }

    std::shared_ptr<BlockStore> store_;
    TypePtr type_;
    EnvPtr env_;
    std::shared_ptr<BlockNodeBase> parent_;
    std::size_t idx_;
};

namespace {

class BlockNum final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    NumKind kind() const { return type_->asNum()->kind; }

    void readScalarCell(std::byte* out) override {
        Loc l = locate(false);
        std::memset(out, 0, 16);
        st().readPayload(l.block, l.off, {out, std::size_t(numWidth(kind()))});
    }
    void writeScalarCell(const std::byte* in) override {
        Loc l = locate(true);
        st().writePayload(l.block, l.off, {in, std::size_t(numWidth(kind()))});
    }
    std::int64_t getInt() override {
        std::byte cell[16];
        readScalarCell(cell);
        return detail::scalarToInt(cell, kind());
    }
    double getDouble() override {
        std::byte cell[16];
        readScalarCell(cell);
        return detail::scalarToDouble(cell, kind());
    }
    void assignInt(std::int64_t v) override {
        std::byte cell[16] = {};
        detail::scalarAssignInt(cell, kind(), v);
        writeScalarCell(cell);
    }
    void assignDouble(double v) override {
        std::byte cell[16] = {};
        detail::scalarAssignDouble(cell, kind(), v);
        writeScalarCell(cell);
    }
};

class BlockString final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    std::string getString() override {
        const StringType& s = *type_->asString();
        Loc l = locate(false);
        std::uint64_t off = l.off;
        std::uint64_t len;
        if (s.size.isFree()) {
            std::int32_t n = readI32(l.block, off);
            if (n < 0) fail(Errc::StoreCorrupt, "negative string length in block");
            len = std::uint64_t(n);
            off += 4;
        } else {
            len = std::uint64_t(s.size.count());
        }
        std::string bytes(std::size_t(len), '\0');
        st().readPayload(l.block, off, {reinterpret_cast<std::byte*>(bytes.data()), bytes.size()});
        return bytes;
    }

    void assignString(std::string_view v) override {
        const StringType& s = *type_->asString();
        if (!s.size.isFree()) {
            std::size_t n = std::size_t(s.size.count());
            if (v.size() > n)
                fail(Errc::StringTooLong, std::to_string(v.size()) + " bytes into a " +
                                              std::to_string(n) + "-byte string");
            std::vector<std::byte> buf(n);
            std::memcpy(buf.data(), v.data(), v.size());
            Loc l = locate(true);
            st().writePayload(l.block, l.off, buf);
            return;
        }
        Loc l = locate(true);
        std::uint64_t need = 4 + v.size();
        growOwnBlock(l, need);
        std::vector<std::byte> buf(static_cast<std::size_t>(need));
        putU32(buf.data(), std::uint32_t(v.size()));
        std::memcpy(buf.data() + 4, v.data(), v.size());
        st().writePayload(l.block, 0, buf);
    }
};

class BlockMatrix final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    MatrixValue getMatrix() override {
        const NumType& n = *type_->asNum();
        Loc l = locate(false);
        std::uint64_t off = l.off;
        std::vector<std::int64_t> counts;
        counts.reserve(n.dims.size());
        for (Dim d : n.dims) {
            if (d.isFree()) {
                std::int32_t c = readI32(l.block, off);
                if (c < 0) fail(Errc::StoreCorrupt, "negative dimension count in block");
                counts.push_back(c);
                off += 4;
            } else {
                counts.push_back(d.count());
            }
        }
        MatrixValue m(n.kind, MatrixShape::fromCounts(counts));
        st().readPayload(l.block, off, m.payload());
        return m;
    }

    void assignMatrix(const MatrixValue& m) override {
        const NumType& n = *type_->asNum();
        detail::checkMatrixAssign(n, m);
        bool variable = isVariableSize(type_, *env_);
        Loc l = locate(true);
        if (!variable) {
            st().writePayload(l.block, l.off, m.payload());
            return;
        }
        std::uint64_t freeDims = 0;
        for (Dim d : n.dims)
            if (d.isFree()) ++freeDims;
        std::uint64_t need = 4 * freeDims + m.payload().size();
        growOwnBlock(l, need);
        std::uint64_t off = 0;
        for (std::size_t i = 0; i < n.dims.size(); ++i) {
            if (n.dims[i].isFree()) {
                writeI32(l.block, off, std::int32_t(m.shape().count(i)));
                off += 4;
            }
        }
        st().writePayload(l.block, off, m.payload());
    }
};

class BlockStruct final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    const StructType& stype() const { return *type_->asStruct(); }

    std::size_t nFields() override { return stype().fields.size(); }

    std::uint64_t slotStart(std::size_t k) const {
        std::uint64_t off = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const Field& f = stype().fields[i];
            off += (f.optional ? 1 : 0) + slotWidth(f.type, *env_);
        }
        return off;
    }

    Slot childSlot(std::size_t k, bool materialize) override {
        Loc me = locate(materialize);
        const StructType& s = stype();
        if (s.isUnion) {
            std::size_t active = readSelector(me);
            if (k != active)
                fail(Errc::InactiveUnionField, "field " + std::to_string(k) + " is not active");
            return {me.block, me.off + 2, isVariableSize(s.fields[k].type, *env_)};
        }
        std::uint64_t off = me.off + slotStart(k);
        if (s.fields[k].optional) {
            if (readU8(me.block, off) == 0)
                fail(Errc::FieldNotPresent,
                     "optional field '" + s.fields[k].name + "' is unset");
            ++off;
        }
        return {me.block, off, isVariableSize(s.fields[k].type, *env_)};
    }

    ImplPtr fieldImpl(std::size_t i) override {
        checkIndex(i);
        const StructType& s = stype();
        if (s.isUnion) {
            if (i != activeField())
                fail(Errc::InactiveUnionField, "field " + std::to_string(i) + " is not active");
        } else if (s.fields[i].optional && !fieldPresent(i)) {
            fail(Errc::FieldNotPresent, "optional field '" + s.fields[i].name + "' is unset");
        }
        return makeBlockNode(store_, s.fields[i].type, env_,
                             std::static_pointer_cast<BlockNodeBase>(shared_from_this()), i);
    }

    bool fieldPresent(std::size_t i) override {
        requirePlainStruct();
        checkIndex(i);
        if (!stype().fields[i].optional) return true;
        Loc me = locate(false);
        return readU8(me.block, me.off + slotStart(i)) != 0;
    }

    void setFieldPresent(std::size_t i) override {
        requirePlainStruct();
        checkIndex(i);
        if (!stype().fields[i].optional)
            fail(Errc::NotOptional, "field '" + stype().fields[i].name + "' is not optional");
        Loc me = locate(true);
        std::uint64_t off = me.off + slotStart(i);
        if (readU8(me.block, off) == 0) writeU8(me.block, off, 1);
    }

    void unsetField(std::size_t i) override {
        requirePlainStruct();
        checkIndex(i);
        const Field& f = stype().fields[i];
        if (!f.optional)
            fail(Errc::NotOptional, "field '" + f.name + "' is not optional");
        Loc me = locate(true);
        std::uint64_t off = me.off + slotStart(i);
        if (readU8(me.block, off) == 0) return;
        if (isVariableSize(f.type, *env_))
            freeRefSlot(f.type, env_, me.block, off + 1);
        else
            writeZeros(me.block, off + 1, fixedByteSize(f.type, *env_));
        writeU8(me.block, off, 0);
    }

    std::size_t activeField() override {
        if (!stype().isUnion) fail(Errc::WrongType, "not a union");
        Loc me = locate(false);
        return readSelector(me);
    }

    void setActiveField(std::size_t i) override {
        if (!stype().isUnion) fail(Errc::WrongType, "not a union");
        checkIndex(i);
        Loc me = locate(true);
        std::size_t cur = readSelector(me);
        if (i == cur) return;
        const Field& old = stype().fields[cur];
        if (isVariableSize(old.type, *env_))
            freeRefSlot(old.type, env_, me.block, me.off + 2);
        std::uint64_t w = slotWidth(stype().fields[i].type, *env_);
        growOwnBlock(me, me.off + 2 + w);
        writeU16(me.block, me.off, std::uint16_t(i));
        writeZeros(me.block, me.off + 2, w);
    }

private:
    void checkIndex(std::size_t i) const {
        if (i >= stype().fields.size())
            fail(Errc::IndexOutOfRange, "field index " + std::to_string(i));
    }
    void requirePlainStruct() const {
        if (stype().isUnion) fail(Errc::WrongType, "operation does not apply to a union");
    }
    std::size_t readSelector(const Loc& me) {
        std::uint16_t sel = readU16(me.block, me.off);
        if (sel >= stype().fields.size())
            fail(Errc::StoreCorrupt, "union selector out of range in block");
        return sel;
    }
};

class BlockArray final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    const ArrayType& atype() const { return *type_->asArray(); }

    std::size_t nElements() override {
        if (!atype().size.isFree()) return std::size_t(atype().size.count());
        Loc me = locate(false);
        std::int32_t n = readI32(me.block, me.off);
        if (n < 0) fail(Errc::StoreCorrupt, "negative element count in block");
        return std::size_t(n);
    }

    ImplPtr elemImpl(std::size_t i) override {
        if (i >= nElements())
            fail(Errc::IndexOutOfRange, "element " + std::to_string(i));
        return makeBlockNode(store_, atype().elem, env_,
                             std::static_pointer_cast<BlockNodeBase>(shared_from_this()), i);
    }

    Slot childSlot(std::size_t k, bool materialize) override {
        Loc me = locate(materialize);
        std::uint64_t base = me.off;
        if (atype().size.isFree()) {
            std::int32_t n = readI32(me.block, me.off);
            if (n < 0) fail(Errc::StoreCorrupt, "negative element count in block");
            if (k >= std::size_t(n))
                fail(Errc::IndexOutOfRange, "element " + std::to_string(k));
            base += 4;
        } else if (k >= std::size_t(atype().size.count())) {
            fail(Errc::IndexOutOfRange, "element " + std::to_string(k));
        }
        return {me.block, base + k * slotWidth(atype().elem, *env_),
                isVariableSize(atype().elem, *env_)};
    }

    void resize(std::size_t n) override {
        if (!atype().size.isFree()) fail(Errc::FixedSize, "cannot resize a fixed-size array");
        Loc me = locate(true);
        std::int32_t cur = readI32(me.block, me.off);
        if (cur < 0) fail(Errc::StoreCorrupt, "negative element count in block");
        std::uint64_t w = slotWidth(atype().elem, *env_);
        bool variable = isVariableSize(atype().elem, *env_);
        if (n < std::size_t(cur)) {
            if (variable)
                for (std::size_t k = n; k < std::size_t(cur); ++k)
                    freeRefSlot(atype().elem, env_, me.block, me.off + 4 + k * w);
        }
        if (n > 0x7fffffff) fail(Errc::CountOverflow, "element count exceeds the 4-byte range");
        std::uint64_t need = me.off + 4 + std::uint64_t(n) * w;
        growOwnBlock(me, need);
        if (n > std::size_t(cur))
            writeZeros(me.block, me.off + 4 + std::uint64_t(cur) * w,
                       (std::uint64_t(n) - std::uint64_t(cur)) * w);
        writeI32(me.block, me.off, std::int32_t(n));
    }
};

// Any node: an 8-byte reference that stays null until actualizeType supplies
// the bound type; the block then holds the type text followed by the value's
// slot.
class BlockAny final : public BlockNodeBase {
public:
    using BlockNodeBase::BlockNodeBase;

    TypePtr type() const override {
        auto b = const_cast<BlockAny*>(this)->binding(false);
        return b.addr ? b.env->resolveFully(b.type) : type_;
    }

    TypePtr anyBoundType() override { return binding(false).type; }
    EnvPtr anyBoundEnv() override { return binding(false).env; }
    ImplPtr anyTargetImpl() override { return inner(); }

    void actualizeType(const TypePtr& t, const EnvPtr& typeEnv) override {
        st().requireWritable();
        Binding b = binding(true);
        if (b.addr) fail(Errc::AlreadyBound, "any node already has a bound type");
        bind(t, typeEnv, b);
    }

    void rebindAny(const TypePtr& t, const EnvPtr& typeEnv) override {
        st().requireWritable();
        Binding b = binding(true);
        if (b.addr) {
            if (b.type && isVariableSize(b.type, *b.env))
                freeRefSlot(b.type, b.env, b.addr, 4 + b.textLen);
            freeValueBlockShallow(b.addr);
            writeSlotAddr(b, 0);
            b.addr = 0;
        }
        if (t) bind(t, typeEnv, b);
    }

    // forwarding to the bound value
    std::size_t nFields() override { return inner()->nFields(); }
    ImplPtr fieldImpl(std::size_t i) override { return inner()->fieldImpl(i); }
    bool fieldPresent(std::size_t i) override { return inner()->fieldPresent(i); }
    void setFieldPresent(std::size_t i) override { inner()->setFieldPresent(i); }
    void unsetField(std::size_t i) override { inner()->unsetField(i); }
    std::size_t activeField() override { return inner()->activeField(); }
    void setActiveField(std::size_t i) override { inner()->setActiveField(i); }
    std::size_t nElements() override { return inner()->nElements(); }
    ImplPtr elemImpl(std::size_t i) override { return inner()->elemImpl(i); }
    void resize(std::size_t n) override { inner()->resize(n); }
    std::int64_t getInt() override { return inner()->getInt(); }
    double getDouble() override { return inner()->getDouble(); }
    std::string getString() override { return inner()->getString(); }
    MatrixValue getMatrix() override { return inner()->getMatrix(); }
    void readScalarCell(std::byte* out) override { inner()->readScalarCell(out); }
    void assignInt(std::int64_t v) override { inner()->assignInt(v); }
    void assignDouble(double v) override { inner()->assignDouble(v); }
    void assignString(std::string_view v) override { inner()->assignString(v); }
    void assignMatrix(const MatrixValue& m) override { inner()->assignMatrix(m); }
    void writeScalarCell(const std::byte* in) override { inner()->writeScalarCell(in); }

    Slot childSlot(std::size_t, bool materialize) override {
        Binding b = binding(materialize);
        if (!b.addr) fail(Errc::UnboundAny, "any node has no bound type yet");
        return {b.addr, 4 + std::uint64_t(b.textLen), isVariableSize(b.type, *b.env)};
    }

private:
    struct Binding {
        BlockAddress addr = 0;     // the any block, 0 while unbound
        std::uint32_t textLen = 0;
        TypePtr type;
        EnvPtr env;
        // where the address itself lives
        bool slotIsRoot = false;
        BlockAddress slotBlock = 0;
        std::uint64_t slotOff = 0;
    };

    Binding binding(bool materializeParents) {
        Binding b;
        if (!parent_) {
            b.slotIsRoot = true;
            b.addr = st().rootAddr;
        } else {
            Slot s = parent_->childSlot(idx_, materializeParents);
            b.slotBlock = s.block;
            b.slotOff = s.off;
            b.addr = readU64(s.block, s.off);
        }
        if (b.addr) {
            std::int32_t len = readI32(b.addr, 0);
            if (len < 0) fail(Errc::StoreCorrupt, "negative type text length in block");
            b.textLen = std::uint32_t(len);
            std::string text(std::size_t(len), '\0');
            st().readPayload(b.addr, 4,
                             {reinterpret_cast<std::byte*>(text.data()), text.size()});
            EnvPtr benv;
            try {
                benv = parseTypeText(text);
            } catch (const Error& e) {
                fail(Errc::StoreCorrupt, std::string("unreadable bound type: ") + e.what());
            }
            b.type = benv->root();
            b.env = benv;
        }
        return b;
    }

    void bind(const TypePtr& t, const EnvPtr& typeEnv, Binding& b) {
        EnvPtr e = typeEnv ? typeEnv : env_;
        TypePtr resolved = e->resolveFully(t);
        if (resolved->isAny()) fail(Errc::ValidationError, "cannot bind an any node to any");
        std::string text = printType(t, *e);
        std::uint64_t size = 4 + text.size() + slotWidth(resolved, *e);
        BlockAddress addr = st().allocLocked(size);
        std::vector<std::byte> buf(4 + text.size());
        putU32(buf.data(), std::uint32_t(text.size()));
        std::memcpy(buf.data() + 4, text.data(), text.size());
        st().writePayload(addr, 0, buf);
        writeSlotAddr(b, addr);
    }

    void writeSlotAddr(const Binding& b, BlockAddress addr) {
        if (b.slotIsRoot) {
            st().rootAddr = addr;
            st().writeSuper();
        } else {
            writeU64(b.slotBlock, b.slotOff, addr);
        }
    }

    void freeValueBlockShallow(BlockAddress addr) { st().freeLocked(addr); }

    ImplPtr inner() {
        Binding b = binding(false);
        if (!b.addr) fail(Errc::UnboundAny, "any node has no bound type yet");
        return makeBlockNode(store_, b.type, b.env,
                             std::static_pointer_cast<BlockNodeBase>(shared_from_this()), 0);
    }
};

ImplPtr makeBlockNode(std::shared_ptr<BlockStore> store, const TypePtr& t, const EnvPtr& env,
                      std::shared_ptr<BlockNodeBase> parent, std::size_t idx) {
    TypePtr r = env->resolveFully(t);
    if (const auto* n = r->asNum()) {
        if (n->dims.empty())
            return std::make_shared<BlockNum>(std::move(store), r, env, std::move(parent), idx);
        return std::make_shared<BlockMatrix>(std::move(store), r, env, std::move(parent), idx);
    }
    if (r->asString())
        return std::make_shared<BlockString>(std::move(store), r, env, std::move(parent), idx);
    if (r->asStruct())
        return std::make_shared<BlockStruct>(std::move(store), r, env, std::move(parent), idx);
    if (r->asArray())
        return std::make_shared<BlockArray>(std::move(store), r, env, std::move(parent), idx);
    return std::make_shared<BlockAny>(std::move(store), r, env, std::move(parent), idx);
}

}  // namespace

DataHandle BlockStore::rootHandle() {
    if (!env_) fail(Errc::ValidationError, "store has no type environment");
    return DataHandle(makeBlockNode(shared_from_this(), env_->root(), env_, nullptr, 0));
}

// ---------------------------------------------------------------------------
// Layout auditor

namespace {

struct Auditor {
    BlockStore::State& st;
    const EnvPtr& env;
    std::unordered_set<BlockAddress> visited;

    std::uint64_t readU64At(BlockAddress b, std::uint64_t off) {
        std::byte buf[8];
        st.readPayload(b, off, buf);
        return getU64(buf);
    }
    std::int32_t readI32At(BlockAddress b, std::uint64_t off) {
        std::byte buf[4];
        st.readPayload(b, off, buf);
        return std::int32_t(getU32(buf));
    }

    // Audits the value stored inline at (block, off); returns its extent.
    std::uint64_t auditInline(const TypePtr& t, const EnvPtr& e, BlockAddress block,
                              std::uint64_t off) {
        TypePtr r = e->resolveFully(t);
        if (isVariableSize(r, *e))
            fail(Errc::StoreCorrupt, "layout: variable-size value stored inline");
        return fixedByteSize(r, *e);
    }

    // Audits the slot of a value of type t at (block, off): inline bytes for
    // fixed sizes, a null-or-live address for variable sizes. Returns the
    // slot width.
    std::uint64_t auditSlot(const TypePtr& t, const EnvPtr& e, BlockAddress block,
                            std::uint64_t off) {
        TypePtr r = e->resolveFully(t);
        if (!isVariableSize(r, *e)) return auditInline(r, e, block, off);
        BlockAddress addr = readU64At(block, off);
        if (addr != 0) auditBlockValue(r, e, addr);
        return 8;
    }

    void auditBlockValue(const TypePtr& t, const EnvPtr& e, BlockAddress addr) {
        if (!visited.insert(addr).second)
            fail(Errc::StoreCorrupt, "layout: block reachable twice");
        BlockStore::State::Header h;
        st.validateLive(addr, h);
        TypePtr r = e->resolveFully(t);
        std::uint64_t extent = 0;
        if (const auto* n = r->asNum()) {
            std::uint64_t cells = 1;
            for (Dim d : n->dims) {
                if (d.isFree()) {
                    std::int32_t c = readI32At(addr, extent);
                    if (c < 0) fail(Errc::StoreCorrupt, "layout: negative dimension count");
                    cells *= std::uint64_t(c);
                    extent += 4;
                } else {
                    cells *= std::uint64_t(d.count());
                }
            }
            extent += cells * std::uint64_t(numWidth(n->kind));
        } else if (r->asString()) {
            std::int32_t len = readI32At(addr, 0);
            if (len < 0) fail(Errc::StoreCorrupt, "layout: negative string length");
            extent = 4 + std::uint64_t(len);
        } else if (const auto* s = r->asStruct()) {
            if (s->isUnion) {
                std::byte buf[2];
                st.readPayload(addr, 0, buf);
                std::uint16_t sel = std::uint16_t(std::to_integer<std::uint8_t>(buf[0]) |
                                                  (std::to_integer<std::uint8_t>(buf[1]) << 8));
                if (sel >= s->fields.size())
                    fail(Errc::StoreCorrupt, "layout: union selector out of range");
                extent = 2 + auditSlot(s->fields[sel].type, e, addr, 2);
            } else {
                for (const Field& f : s->fields) {
                    if (f.optional) {
                        std::byte tag;
                        st.readPayload(addr, extent, {&tag, 1});
                        if (std::to_integer<std::uint8_t>(tag) > 1)
                            fail(Errc::StoreCorrupt, "layout: presence tag not 0/1");
                        ++extent;
                        TypePtr ft = e->resolveFully(f.type);
                        if (std::to_integer<std::uint8_t>(tag) == 1) {
                            extent += auditSlot(ft, e, addr, extent);
                        } else {
                            extent += isVariableSize(ft, *e) ? 8 : fixedByteSize(ft, *e);
                        }
                    } else {
                        extent += auditSlot(f.type, e, addr, extent);
                    }
                }
            }
        } else if (const auto* a = r->asArray()) {
            std::uint64_t count;
            if (a->size.isFree()) {
                std::int32_t c = readI32At(addr, 0);
                if (c < 0) fail(Errc::StoreCorrupt, "layout: negative element count");
                count = std::uint64_t(c);
                extent = 4;
            } else {
                count = std::uint64_t(a->size.count());
            }
            for (std::uint64_t i = 0; i < count; ++i)
                extent += auditSlot(a->elem, e, addr, extent);
        } else {
            // any block: [len][text][slot]
            std::int32_t len = readI32At(addr, 0);
            if (len < 0) fail(Errc::StoreCorrupt, "layout: negative type text length");
            std::string text(std::size_t(len), '\0');
            st.readPayload(addr, 4, {reinterpret_cast<std::byte*>(text.data()), text.size()});
            EnvPtr benv;
            try {
                benv = parseTypeText(text);
            } catch (const Error& err) {
                fail(Errc::StoreCorrupt, std::string("layout: unreadable bound type: ") +
                                             err.what());
            }
            extent = 4 + std::uint64_t(len) + auditSlot(benv->root(), benv, addr, 4 + len);
        }
        if (extent > h.capacity)
            fail(Errc::StoreCorrupt, "layout: value extent exceeds its block capacity");
    }
};

}  // namespace

void BlockStore::auditLayout() {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    Auditor aud{*st_, env_, {}};
    TypePtr root = env_->resolveFully(env_->root());
    if (st_->rootAddr == 0) {
        if (!isVariableSize(root, *env_) && !root->isAny())
            fail(Errc::StoreCorrupt, "layout: missing root block");
        return;  // unset variable root
    }
    if (isVariableSize(root, *env_))
        aud.auditBlockValue(root, env_, st_->rootAddr);
    else
        aud.auditInline(root, env_, st_->rootAddr, 0);
}

}  // namespace structfile
