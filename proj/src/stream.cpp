#include "structfile/stream.hpp"

#include <cstdlib>
#include <cstring>

#include "data_internal.hpp"
#include "structfile/ddl.hpp"

namespace structfile {

FileSessionConfig defaultSessionConfig() {
    FileSessionConfig cfg;
    if (const char* v = std::getenv("STRUCTFILE_CACHE")) {
        char* end = nullptr;
        unsigned long n = std::strtoul(v, &end, 10);
        if (end && *end == '\0') cfg.cacheCapacity = std::size_t(n);
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Session cache

FileSession::NodeInfo FileSession::cacheGet(const NodeKey& key) {
    if (cfg_.cacheCapacity == 0) return {};
    std::lock_guard<std::mutex> lock(cacheMutex_);
    auto it = cacheIndex_.find(key);
    if (it == cacheIndex_.end()) return {};
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
}

void FileSession::cachePut(const NodeKey& key, const NodeInfo& info) {
    if (cfg_.cacheCapacity == 0) return;
    std::lock_guard<std::mutex> lock(cacheMutex_);
    auto it = cacheIndex_.find(key);
    if (it != cacheIndex_.end()) {
        it->second->second = info;
        lru_.splice(lru_.begin(), lru_, it->second);
        return;
    }
    lru_.emplace_front(key, info);
    cacheIndex_[key] = lru_.begin();
    while (lru_.size() > cfg_.cacheCapacity) {
        cacheIndex_.erase(lru_.back().first);
        lru_.pop_back();
    }
}

// ---------------------------------------------------------------------------
// Offset arithmetic

namespace {

constexpr std::uint64_t kHuge = UINT64_MAX;

std::uint64_t satMul(std::uint64_t a, std::uint64_t b) {
    if (a == 0 || b == 0) return 0;
    return a > kHuge / b ? kHuge : a * b;
}

}  // namespace

struct StreamAccess {
    using Session = std::shared_ptr<FileSession>;

    static const RandomAccessSource& src(const Session& s) { return *s->counting_; }
    static ByteOrder order(const Session& s) { return s->header_.order(); }

    static void readAt(const Session& s, std::uint64_t off, std::span<std::byte> out) {
        if (off + out.size() > s->fileSize())
            failAt(Errc::Truncated, "value runs past the end of the file", off);
        src(s).readAt(off, out);
    }

    static std::int32_t readInt32(const Session& s, std::uint64_t off) {
        std::byte buf[4];
        readAt(s, off, {buf, 4});
        return std::int32_t(std::uint32_t(wire::getUint(buf, 4, order(s))));
    }

    static std::int64_t readCount(const Session& s, std::uint64_t off, const char* what) {
        std::int32_t v = readInt32(s, off);
        if (v < 0) failAt(Errc::NegativeCount, std::string("negative ") + what, off);
        return v;
    }

    static std::uint16_t readSelector(const Session& s, std::uint64_t off) {
        std::byte buf[2];
        readAt(s, off, {buf, 2});
        return std::uint16_t(wire::getUint(buf, 2, order(s)));
    }

    static std::uint8_t readTag(const Session& s, std::uint64_t off) {
        std::byte b;
        readAt(s, off, {&b, 1});
        return std::to_integer<std::uint8_t>(b);
    }

    // Parses the type text of an any node at `off`; cached per position.
    static void anyInfo(const Session& s, const TypePtr& anyNode, std::uint64_t off,
                        TypePtr& type, EnvPtr& env, std::uint32_t& textLen) {
        FileSession::NodeKey key{off, anyNode.get()};
        FileSession::NodeInfo info = s->cacheGet(key);
        if (info.anyType) {
            type = info.anyType;
            env = info.anyEnv;
            textLen = info.anyTextLen;
            return;
        }
        std::int64_t len = readCount(s, off, "type text length");
        if (std::uint64_t(len) > s->fileSize() - (off + 4))
            failAt(Errc::CountOverflow, "type text runs past the end of the file", off);
        std::string text(std::size_t(len), '\0');
        readAt(s, off + 4, {reinterpret_cast<std::byte*>(text.data()), text.size()});
        EnvPtr benv;
        try {
            benv = parseTypeText(text);
        } catch (const Error& e) {
            failAt(Errc::AnyTypeParseError, e.what(), off);
        }
        info.anyType = benv->root();
        info.anyEnv = benv;
        info.anyTextLen = std::uint32_t(len);
        s->cachePut(key, info);
        type = info.anyType;
        env = benv;
        textLen = info.anyTextLen;
    }

    // Encoded length of the value of (resolved) type t at `off`, reading only
    // length-determining bytes. Fixed-size types never read at all.
    static std::uint64_t lengthAt(const Session& s, const TypePtr& t, const EnvPtr& env,
                                  std::uint64_t off, int depth = 0) {
        if (depth > 2048)
            failAt(Errc::CountOverflow, "value nesting exceeds the reader limit", off);
        TypePtr r = env->resolveFully(t);
        if (!isVariableSize(r, *env)) return fixedByteSize(r, *env);

        FileSession::NodeKey key{off, r.get()};
        FileSession::NodeInfo cached = s->cacheGet(key);
        if (cached.length) return *cached.length;

        std::uint64_t len = 0;
        if (const auto* n = r->asNum()) {
            std::uint64_t cells = 1;
            std::uint64_t cur = off;
            for (Dim d : n->dims) {
                if (d.isFree()) {
                    cells = satMul(cells, std::uint64_t(readCount(s, cur, "dimension count")));
                    cur += 4;
                } else {
                    cells = satMul(cells, std::uint64_t(d.count()));
                }
            }
            std::uint64_t bytes = satMul(cells, std::uint64_t(numWidth(n->kind)));
            if (bytes > s->fileSize() - std::min<std::uint64_t>(cur, s->fileSize()))
                failAt(Errc::CountOverflow, "matrix payload runs past the end of the file", off);
            len = (cur - off) + bytes;
        } else if (const auto* str = r->asString()) {
            (void)str;
            std::int64_t n = readCount(s, off, "string length");
            if (std::uint64_t(n) > s->fileSize() - std::min<std::uint64_t>(off + 4, s->fileSize()))
                failAt(Errc::CountOverflow, "string runs past the end of the file", off);
            len = 4 + std::uint64_t(n);
        } else if (const auto* st = r->asStruct()) {
            if (st->isUnion) {
                std::uint16_t sel = readSelector(s, off);
                if (sel >= st->fields.size())
                    failAt(Errc::BadUnionSelector, "selector " + std::to_string(sel), off);
                len = 2 + lengthAt(s, st->fields[sel].type, env, off + 2, depth + 1);
            } else {
                std::uint64_t cur = off;
                for (const Field& f : st->fields) {
                    if (f.optional) {
                        std::uint8_t tag = readTag(s, cur);
                        ++cur;
                        if (tag == 0) continue;
                    }
                    cur += lengthAt(s, f.type, env, cur, depth + 1);
                }
                len = cur - off;
            }
        } else if (const auto* a = r->asArray()) {
            std::uint64_t count;
            std::uint64_t cur = off;
            if (a->size.isFree()) {
                count = std::uint64_t(readCount(s, off, "array count"));
                cur += 4;
            } else {
                count = std::uint64_t(a->size.count());
            }
            TypePtr elem = env->resolveFully(a->elem);
            if (satMul(count, minEncodedSize(elem, *env)) >
                s->fileSize() - std::min<std::uint64_t>(cur, s->fileSize()))
                failAt(Errc::CountOverflow, "array contents run past the end of the file", off);
            if (!isVariableSize(elem, *env)) {
                cur += satMul(count, fixedByteSize(elem, *env));
            } else {
                for (std::uint64_t i = 0; i < count; ++i)
                    cur += lengthAt(s, elem, env, cur, depth + 1);
            }
            len = cur - off;
        } else {
            // any
            TypePtr bt;
            EnvPtr benv;
            std::uint32_t textLen = 0;
            anyInfo(s, r, off, bt, benv, textLen);
            len = 4 + textLen + lengthAt(s, bt, benv, off + 4 + textLen, depth + 1);
        }

        cached.length = len;
        s->cachePut(key, cached);
        return len;
    }

    // Start offset of child slot k (struct: the tag byte for optional fields,
    // the value otherwise; array: the element start). Uses the progressive
    // per-node cache so sequential scans stay linear.
    static std::uint64_t childSlotOffset(const Session& s, const TypePtr& containerType,
                                         const EnvPtr& env, std::uint64_t off, std::size_t k) {
        FileSession::NodeKey key{off, containerType.get()};
        FileSession::NodeInfo info = s->cacheGet(key);
        std::uint64_t cur;
        std::size_t i;
        if (!info.childOffsets.empty() && info.childOffsets.size() > k)
            return info.childOffsets[k];
        if (!info.childOffsets.empty()) {
            i = info.childOffsets.size() - 1;
            cur = info.childOffsets.back();
        } else {
            i = 0;
            cur = off;
            if (const auto* a = containerType->asArray(); a && a->size.isFree()) cur = off + 4;
            info.childOffsets.push_back(cur);
        }
        if (const auto* st = containerType->asStruct()) {
            for (; i < k; ++i) {
                const Field& f = st->fields[i];
                std::uint64_t next = cur;
                if (f.optional) {
                    std::uint8_t tag = readTag(s, next);
                    ++next;
                    if (tag != 0) next += lengthAt(s, f.type, env, next);
                } else {
                    next += lengthAt(s, f.type, env, next);
                }
                cur = next;
                info.childOffsets.push_back(cur);
            }
        } else {
            const auto* a = containerType->asArray();
            for (; i < k; ++i) {
                cur += lengthAt(s, a->elem, env, cur);
                info.childOffsets.push_back(cur);
            }
        }
        s->cachePut(key, info);
        return info.childOffsets[k];
    }
};

// ---------------------------------------------------------------------------
// Lazy data impls

namespace {

ImplPtr makeStreamNode(const std::shared_ptr<FileSession>& sess, const TypePtr& t,
                       const EnvPtr& env, std::uint64_t off);

class StreamBase : public DataImpl {
public:
    StreamBase(std::shared_ptr<FileSession> sess, TypePtr type, EnvPtr env, std::uint64_t off)
        : sess_(std::move(sess)), type_(std::move(type)), env_(std::move(env)), off_(off) {}

    TypePtr declaredType() const override { return type_; }
    EnvPtr env() const override { return env_; }
    bool readOnly() const override { return true; }

    void assignInt(std::int64_t) override { ro(); }
    void assignDouble(double) override { ro(); }
    void assignString(std::string_view) override { ro(); }
    void assignMatrix(const MatrixValue&) override { ro(); }
    void writeScalarCell(const std::byte*) override { ro(); }
    void resize(std::size_t) override { ro(); }
    void setActiveField(std::size_t) override { ro(); }
    void setFieldPresent(std::size_t) override { ro(); }
    void unsetField(std::size_t) override { ro(); }
    void actualizeType(const TypePtr&, const EnvPtr&) override { ro(); }
    void rebindAny(const TypePtr&, const EnvPtr&) override { ro(); }

protected:
    [[noreturn]] void ro() const {
        fail(Errc::ReadOnly, "stream-backed data is read-only");
    }

    std::shared_ptr<FileSession> sess_;
    TypePtr type_;
    EnvPtr env_;
    std::uint64_t off_;
};

class StreamNum final : public StreamBase {
public:
    using StreamBase::StreamBase;

    void readScalarCell(std::byte* out) override {
        NumKind k = type_->asNum()->kind;
        int w = numWidth(k);
        std::byte buf[16];
        StreamAccess::readAt(sess_, off_, {buf, std::size_t(w)});
        std::memset(out, 0, 16);
        if (StreamAccess::order(sess_) == ByteOrder::Little)
            std::memcpy(out, buf, std::size_t(w));
        else
            for (int i = 0; i < w; ++i) out[i] = buf[w - 1 - i];
    }
    std::int64_t getInt() override {
        std::byte cell[16];
        readScalarCell(cell);
        return detail::scalarToInt(cell, type_->asNum()->kind);
    }
    double getDouble() override {
        std::byte cell[16];
        readScalarCell(cell);
        return detail::scalarToDouble(cell, type_->asNum()->kind);
    }
};

class StreamMatrix final : public StreamBase {
public:
    using StreamBase::StreamBase;

    MatrixValue getMatrix() override {
        const NumType& n = *type_->asNum();
        int w = numWidth(n.kind);
        std::vector<std::int64_t> counts;
        counts.reserve(n.dims.size());
        std::uint64_t cur = off_;
        for (Dim d : n.dims) {
            if (d.isFree()) {
                counts.push_back(StreamAccess::readCount(sess_, cur, "dimension count"));
                cur += 4;
            } else {
                counts.push_back(d.count());
            }
        }
        std::uint64_t cells = 1;
        for (std::int64_t c : counts) cells = satMul(cells, std::uint64_t(c));
        std::uint64_t bytes = satMul(cells, std::uint64_t(w));
        if (bytes > sess_->fileSize() - std::min<std::uint64_t>(cur, sess_->fileSize()))
            failAt(Errc::CountOverflow, "matrix payload runs past the end of the file", off_);
        MatrixValue m(n.kind, MatrixShape::fromCounts(counts));
        StreamAccess::readAt(sess_, cur, m.payload());
        if (StreamAccess::order(sess_) == ByteOrder::Big && w > 1) {
            std::byte* p = m.payload().data();
            for (std::uint64_t i = 0; i < cells; ++i, p += w)
                for (int a = 0, b = w - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
        }
        return m;
    }
};

class StreamString final : public StreamBase {
public:
    using StreamBase::StreamBase;

    std::string getString() override {
        const StringType& st = *type_->asString();
        std::uint64_t start = off_;
        std::uint64_t len;
        if (st.size.isFree()) {
            len = std::uint64_t(StreamAccess::readCount(sess_, off_, "string length"));
            start += 4;
            if (len > sess_->fileSize() - std::min<std::uint64_t>(start, sess_->fileSize()))
                failAt(Errc::CountOverflow, "string runs past the end of the file", off_);
        } else {
            len = std::uint64_t(st.size.count());
        }
        std::string bytes(std::size_t(len), '\0');
        StreamAccess::readAt(sess_, start, {reinterpret_cast<std::byte*>(bytes.data()),
                                            bytes.size()});
        return bytes;
    }
};

class StreamStruct final : public StreamBase {
public:
    using StreamBase::StreamBase;

    std::size_t nFields() override { return type_->asStruct()->fields.size(); }

    std::size_t activeField() override {
        const StructType& st = *type_->asStruct();
        if (!st.isUnion) fail(Errc::WrongType, "not a union");
        return selector();
    }

    bool fieldPresent(std::size_t i) override {
        const StructType& st = *type_->asStruct();
        if (st.isUnion) fail(Errc::WrongType, "operation does not apply to a union");
        checkIndex(i);
        if (!st.fields[i].optional) return true;
        std::uint64_t slot = StreamAccess::childSlotOffset(sess_, type_, env_, off_, i);
        return StreamAccess::readTag(sess_, slot) != 0;
    }

    ImplPtr fieldImpl(std::size_t i) override {
        const StructType& st = *type_->asStruct();
        checkIndex(i);
        if (st.isUnion) {
            std::size_t active = selector();
            if (i != active)
                fail(Errc::InactiveUnionField, "field " + std::to_string(i) + " is not active");
            return makeStreamNode(sess_, st.fields[i].type, env_, off_ + 2);
        }
        std::uint64_t slot = StreamAccess::childSlotOffset(sess_, type_, env_, off_, i);
        if (st.fields[i].optional) {
            if (StreamAccess::readTag(sess_, slot) == 0)
                fail(Errc::FieldNotPresent,
                     "optional field '" + st.fields[i].name + "' is unset");
            ++slot;
        }
        return makeStreamNode(sess_, st.fields[i].type, env_, slot);
    }

private:
    void checkIndex(std::size_t i) const {
        if (i >= type_->asStruct()->fields.size())
            fail(Errc::IndexOutOfRange, "field index " + std::to_string(i));
    }
    std::size_t selector() {
        std::uint16_t sel = StreamAccess::readSelector(sess_, off_);
        if (sel >= type_->asStruct()->fields.size())
            failAt(Errc::BadUnionSelector, "selector " + std::to_string(sel), off_);
        return sel;
    }
};

class StreamArray final : public StreamBase {
public:
    using StreamBase::StreamBase;

    std::size_t nElements() override {
        const ArrayType& a = *type_->asArray();
        if (!a.size.isFree()) return std::size_t(a.size.count());
        return std::size_t(StreamAccess::readCount(sess_, off_, "array count"));
    }

    ImplPtr elemImpl(std::size_t i) override {
        if (i >= nElements())
            fail(Errc::IndexOutOfRange, "element " + std::to_string(i));
        std::uint64_t slot = StreamAccess::childSlotOffset(sess_, type_, env_, off_, i);
        return makeStreamNode(sess_, type_->asArray()->elem, env_, slot);
    }
};

// Declared-any wrapper: keeps the declaration visible to encoders while all
// reads go to the bound value parsed from the stream.
class StreamAny final : public DataImpl {
public:
    StreamAny(TypePtr boundType, EnvPtr boundEnv, ImplPtr target)
        : boundType_(std::move(boundType)), boundEnv_(std::move(boundEnv)),
          target_(std::move(target)) {}

    TypePtr declaredType() const override {
        static const TypePtr any = makeAny();
        return any;
    }
    TypePtr type() const override { return target_->type(); }
    EnvPtr env() const override { return boundEnv_; }
    bool readOnly() const override { return true; }

    TypePtr anyBoundType() override { return boundType_; }
    EnvPtr anyBoundEnv() override { return boundEnv_; }
    ImplPtr anyTargetImpl() override { return target_; }

    std::size_t nFields() override { return target_->nFields(); }
    ImplPtr fieldImpl(std::size_t i) override { return target_->fieldImpl(i); }
    bool fieldPresent(std::size_t i) override { return target_->fieldPresent(i); }
    std::size_t activeField() override { return target_->activeField(); }
    std::size_t nElements() override { return target_->nElements(); }
    ImplPtr elemImpl(std::size_t i) override { return target_->elemImpl(i); }
    std::int64_t getInt() override { return target_->getInt(); }
    double getDouble() override { return target_->getDouble(); }
    std::string getString() override { return target_->getString(); }
    MatrixValue getMatrix() override { return target_->getMatrix(); }
    void readScalarCell(std::byte* out) override { target_->readScalarCell(out); }

    void assignInt(std::int64_t) override { ro(); }
    void assignDouble(double) override { ro(); }
    void assignString(std::string_view) override { ro(); }
    void assignMatrix(const MatrixValue&) override { ro(); }
    void writeScalarCell(const std::byte*) override { ro(); }
    void resize(std::size_t) override { ro(); }
    void setActiveField(std::size_t) override { ro(); }
    void setFieldPresent(std::size_t) override { ro(); }
    void unsetField(std::size_t) override { ro(); }
    void actualizeType(const TypePtr&, const EnvPtr&) override { ro(); }
    void rebindAny(const TypePtr&, const EnvPtr&) override { ro(); }

private:
    [[noreturn]] void ro() const { fail(Errc::ReadOnly, "stream-backed data is read-only"); }

    TypePtr boundType_;
    EnvPtr boundEnv_;
    ImplPtr target_;
};

ImplPtr makeStreamNode(const std::shared_ptr<FileSession>& sess, const TypePtr& t,
                       const EnvPtr& env, std::uint64_t off) {
    TypePtr r = env->resolveFully(t);
    if (const auto* n = r->asNum()) {
        if (n->dims.empty()) return std::make_shared<StreamNum>(sess, r, env, off);
        return std::make_shared<StreamMatrix>(sess, r, env, off);
    }
    if (r->asString()) return std::make_shared<StreamString>(sess, r, env, off);
    if (r->asStruct()) return std::make_shared<StreamStruct>(sess, r, env, off);
    if (r->asArray()) return std::make_shared<StreamArray>(sess, r, env, off);
    // any: read the embedded type text and present the bound value.
    TypePtr bt;
    EnvPtr benv;
    std::uint32_t textLen = 0;
    StreamAccess::anyInfo(sess, r, off, bt, benv, textLen);
    ImplPtr target = makeStreamNode(sess, bt, benv, off + 4 + textLen);
    return std::make_shared<StreamAny>(bt, benv, std::move(target));
}

}  // namespace

// ---------------------------------------------------------------------------
// FileSession

std::shared_ptr<FileSession> FileSession::open(const std::string& path) {
    return open(path, defaultSessionConfig());
}

std::shared_ptr<FileSession> FileSession::open(const std::string& path,
                                               const FileSessionConfig& cfg) {
    return open(std::make_shared<FileSource>(path), cfg);
}

std::shared_ptr<FileSession> FileSession::open(std::shared_ptr<const RandomAccessSource> src,
                                               const FileSessionConfig& cfg) {
    auto counting = std::make_shared<CountingSource>(std::move(src));
    FileHeader header = scanHeader(*counting);
    if (!header.isBinary())
        fail(Errc::WrongMode, "text-mode file; lazy access needs a binary file");
    return std::shared_ptr<FileSession>(new FileSession(std::move(counting), std::move(header),
                                                        cfg));
}

DataHandle FileSession::root() {
    return DataHandle(makeStreamNode(shared_from_this(), header_.typeEnv->root(),
                                     header_.typeEnv, header_.dataStart));
}

}  // namespace structfile
