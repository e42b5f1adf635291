#include "structfile/binary.hpp"

#include <cstring>
#include <unordered_map>

#include "data_internal.hpp"
#include "structfile/ddl.hpp"

namespace structfile {

namespace {

constexpr std::uint64_t kHuge = UINT64_MAX;

std::uint64_t satMul(std::uint64_t a, std::uint64_t b) {
    if (a == 0 || b == 0) return 0;
    return a > kHuge / b ? kHuge : a * b;
}

void emitCell(ByteSink& out, const std::byte* cellLE, int width, ByteOrder order) {
    if (order == ByteOrder::Little) {
        out.write({cellLE, std::size_t(width)});
    } else {
        std::byte tmp[16];
        for (int i = 0; i < width; ++i) tmp[i] = cellLE[width - 1 - i];
        out.write({tmp, std::size_t(width)});
    }
}

void writeCount(ByteSink& out, std::uint64_t v, ByteOrder order) {
    if (v > 0x7fffffff) fail(Errc::CountOverflow, "count exceeds the 4-byte range");
    wire::writeUint(out, v, 4, order);
}

std::vector<std::string> splitWords(const std::string& line) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) words.push_back(line.substr(start, i - start));
    }
    return words;
}

}  // namespace

// ---------------------------------------------------------------------------
// Header

FileHeader scanHeader(SourceCursor& in) {
    FileHeader h;
    std::string line;
    if (!in.readLine(line)) failAt(Errc::Truncated, "empty input", 0);
    std::vector<std::string> words = splitWords(line);
    if (words.size() < 2 || words[0] != "STRUCTURED" || words[1] != "FILE")
        failAt(Errc::BadMagic, "not a structured file", 0);
    if (words.size() < 3) failAt(Errc::UnsupportedVersion, "missing version", 0);
    h.version = words[2];
    if (h.version != "V0.1")
        failAt(Errc::UnsupportedVersion, "unsupported version '" + h.version + "'", 0);
    if (words.size() == 3) {
        h.mode = FileMode::Text;  // the mode keyword is optional
    } else if (words.size() == 4) {
        if (words[3] == "BINARY_BE")
            h.mode = FileMode::BinaryBig;
        else if (words[3] == "BINARY_LE")
            h.mode = FileMode::BinaryLittle;
        else if (words[3] == "TEXT")
            h.mode = FileMode::Text;
        else
            failAt(Errc::UnknownFlag, "unknown mode keyword '" + words[3] + "'", 0);
    } else {
        failAt(Errc::UnknownFlag, "too many keywords on the identification line", 0);
    }

    std::string typeText;
    bool inType = false;
    bool sawData = false;
    while (in.readLine(line)) {
        if (!line.empty() && line[0] == '#') {
            h.comments.push_back(line.substr(1));
            continue;
        }
        if (!inType) {
            if (line == "TYPE") {
                inType = true;
            } else if (!line.empty()) {
                failAt(Errc::ParseError, "unexpected line before TYPE: '" + line + "'",
                       in.position());
            }
            continue;
        }
        if (line == "DATA") {
            sawData = true;
            break;
        }
        typeText += line;
        typeText += '\n';
    }
    if (!inType) failAt(Errc::ParseError, "header has no TYPE section", in.position());
    if (!sawData) failAt(Errc::Truncated, "header has no DATA line", in.position());
    h.typeEnv = parseTypeText(typeText);
    h.dataStart = in.position();
    return h;
}

FileHeader scanHeader(const RandomAccessSource& src) {
    SourceCursor cur(src);
    return scanHeader(cur);
}

void writeHeader(const FileHeader& h, ByteSink& out) {
    if (h.version != "V0.1")
        fail(Errc::UnsupportedVersion, "can only write version V0.1 files");
    if (!h.typeEnv) fail(Errc::ValidationError, "header has no type environment");
    std::string text = "STRUCTURED FILE V0.1 ";
    switch (h.mode) {
        case FileMode::BinaryBig: text += "BINARY_BE"; break;
        case FileMode::BinaryLittle: text += "BINARY_LE"; break;
        case FileMode::Text: text += "TEXT"; break;
    }
    text += '\n';
    for (const std::string& c : h.comments) {
        if (c.find('\n') != std::string::npos)
            fail(Errc::ValidationError, "comment contains a newline");
        text += '#';
        text += c;
        text += '\n';
    }
    text += "TYPE\n";
    text += printType(h.typeEnv->root(), *h.typeEnv);
    text += "DATA\n";
    out.writeText(text);
}

// ---------------------------------------------------------------------------
// Writer core

namespace detail {

class WriterCore {
public:
    enum class Counts { Eager, Backpatch };

    WriterCore(ByteSink& out, ByteOrder order, Counts counts, bool release, bool sessionErrors)
        : out_(&out), order_(order), counts_(counts), release_(release),
          sessionErrors_(sessionErrors) {
        if (counts_ == Counts::Backpatch) {
            seekable_ = dynamic_cast<SeekableSink*>(out_);
            if (!seekable_)
                fail(Errc::NotSeekable, "streaming writes need a seekable sink");
        }
        frames_.push_back(Frame{Kind::Virtual, DataHandle(), nullptr, 0, 0, 0});
    }

    void start(DataHandle root) {
        root_ = std::move(root);
        frames_.front().node = root_;
    }
    bool started() const { return !root_.isNull(); }
    const DataHandle& root() const { return root_; }

    // Emits everything strictly before `target` (preorder); nullopt = emit
    // everything.
    void advanceUntil(const std::optional<std::vector<std::size_t>>& target);
    // Emits the node the last advanceUntil arrived at.
    void emitArrived();
    void closeInnermostRegion();
    void finishFrames();
    std::size_t openRegions() const {
        std::size_t n = 0;
        for (const Frame& f : frames_)
            if (f.kind == Kind::ArrayFree && counts_ == Counts::Backpatch) ++n;
        return n;
    }
    bool finished() const { return finished_; }

private:
    enum class Kind { Virtual, Struct, Union, ArrayFixed, ArrayFree };

    struct Frame {
        Kind kind;
        DataHandle node;
        TypePtr rtype;  // resolved effective type (null for virtual)
        std::size_t idxInParent;
        std::size_t nextChild;
        std::uint64_t countCell;  // ArrayFree/backpatch: offset of the count
    };

    std::size_t childLimit(const Frame& f) const {
        switch (f.kind) {
            case Kind::Virtual: return 1;
            case Kind::Struct:
            case Kind::Union: return f.rtype->asStruct()->fields.size();
            case Kind::ArrayFixed: return std::size_t(f.rtype->asArray()->size.count());
            case Kind::ArrayFree: return f.node.nElements();
        }
        return 0;
    }

    bool exhausted(const Frame& f) const {
        if (f.kind == Kind::Union) return f.nextChild >= f.rtype->asStruct()->fields.size();
        return f.nextChild >= childLimit(f);
    }

    // Preorder comparison of tree paths: ancestors come before descendants.
    static int cmpPreorder(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        std::size_t n = std::min(a.size(), b.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (a[i] < b[i]) return -1;
            if (a[i] > b[i]) return 1;
        }
        if (a.size() == b.size()) return 0;
        return a.size() < b.size() ? -1 : 1;
    }

    std::vector<std::size_t> expectedPath() const {
        std::vector<std::size_t> p;
        for (std::size_t k = 2; k < frames_.size(); ++k) p.push_back(frames_[k].idxInParent);
        if (frames_.size() > 1) p.push_back(frames_.back().nextChild);
        return p;
    }

    DataHandle childHandle(const Frame& f, std::size_t j) const {
        switch (f.kind) {
            case Kind::Virtual: return root_;
            case Kind::Struct:
            case Kind::Union: return f.node.fieldAt(j);
            default: return f.node.elem(j);
        }
    }

    void releaseChild(Frame& f, std::size_t j) {
        if (release_ && f.kind != Kind::Virtual) f.node.impl()->commitChild(j);
    }

    // Emits child j of the top frame: its optional tag, any-type prefix, and
    // either the leaf bytes or the composite opening (pushing a frame).
    void emitChild(std::size_t j);
    // A union has exactly one child; completing it completes the frame.
    void finishChild(Frame& f, std::size_t j) {
        f.nextChild = (f.kind == Kind::Union) ? f.rtype->asStruct()->fields.size() : j + 1;
        releaseChild(f, j);
    }
    void popFrame();
    void patchCount(Frame& f);

    [[noreturn]] void incomplete(const std::string& what) {
        fail(sessionErrors_ ? Errc::IncompletePrefix : Errc::UnboundAny, what);
    }

    ByteSink* out_;
    SeekableSink* seekable_ = nullptr;
    ByteOrder order_;
    Counts counts_;
    bool release_;
    bool sessionErrors_;
    bool finished_ = false;
    DataHandle root_;
    std::vector<Frame> frames_;
};

void WriterCore::patchCount(Frame& f) {
    if (counts_ == Counts::Backpatch) {
        std::uint64_t end = seekable_->tell();
        seekable_->seek(f.countCell);
        writeCount(*seekable_, f.nextChild, order_);
        seekable_->seek(end);
    }
    // Eager counts were written at open time from the live element count; a
    // mismatch would mean the tree changed mid-encode.
    else if (f.nextChild != childLimit(f))
        fail(Errc::CursorOrderViolation, "array changed size during encoding");
}

void WriterCore::popFrame() {
    Frame f = frames_.back();
    if (f.kind == Kind::ArrayFree) patchCount(f);
    frames_.pop_back();
    finishChild(frames_.back(), f.idxInParent);
}

void WriterCore::emitChild(std::size_t j) {
    Frame& f = frames_.back();
    if (f.kind == Kind::Struct) {
        const Field& fld = f.rtype->asStruct()->fields[j];
        if (fld.optional) {
            if (!f.node.impl()->fieldPresent(j)) {
                out_->writeByte(0);
                finishChild(f, j);
                return;
            }
            out_->writeByte(1);
        }
    }
    DataHandle child = childHandle(f, j);
    TypePtr t = child.declaredType();
    EnvPtr env = child.env();
    if (t->isAny()) {
        TypePtr bound = child.anyBoundType();
        if (!bound) incomplete("any node has no bound type");
        EnvPtr benv = child.anyBoundEnv();
        std::string text = printType(bound, *benv);
        writeCount(*out_, text.size(), order_);
        out_->writeText(text);
        env = benv;
        t = benv->resolveFully(bound);
    }

    if (const auto* n = t->asNum()) {
        if (n->dims.empty()) {
            std::byte cell[16];
            child.impl()->readScalarCell(cell);
            emitCell(*out_, cell, numWidth(n->kind), order_);
        } else {
            MatrixValue m = child.getMatrix();
            for (std::size_t i = 0; i < n->dims.size(); ++i)
                if (n->dims[i].isFree())
                    writeCount(*out_, std::uint64_t(m.shape().count(i)), order_);
            int w = numWidth(n->kind);
            if (order_ == ByteOrder::Little) {
                out_->write(m.payload());
            } else {
                std::uint64_t cells = m.elementCount();
                for (std::uint64_t i = 0; i < cells; ++i) {
                    std::byte raw[16];
                    m.cellRaw(i, raw);
                    emitCell(*out_, raw, w, order_);
                }
            }
        }
        finishChild(f, j);
        return;
    }
    if (const auto* s = t->asString()) {
        std::string bytes = child.getString();
        if (s->size.isFree()) writeCount(*out_, bytes.size(), order_);
        out_->writeText(bytes);
        finishChild(f, j);
        return;
    }
    if (const auto* st = t->asStruct()) {
        if (st->isUnion) {
            std::size_t active = child.activeField();
            wire::writeUint(*out_, active, 2, order_);
            frames_.push_back(Frame{Kind::Union, child, t, j, active, 0});
        } else {
            frames_.push_back(Frame{Kind::Struct, child, t, j, 0, 0});
        }
        return;
    }
    const auto* a = t->asArray();
    if (a->size.isFree()) {
        std::uint64_t cellOff = 0;
        if (counts_ == Counts::Backpatch) {
            cellOff = seekable_->tell();
            writeCount(*out_, 0, order_);
        } else {
            writeCount(*out_, child.nElements(), order_);
        }
        frames_.push_back(Frame{Kind::ArrayFree, child, t, j, 0, cellOff});
    } else {
        frames_.push_back(Frame{Kind::ArrayFixed, child, t, j, 0, 0});
    }
}

void WriterCore::advanceUntil(const std::optional<std::vector<std::size_t>>& target) {
    if (finished_) fail(Errc::IoError, "writer already finished");
    if (!started()) fail(Errc::IoError, "writer has no tree yet");
    if (target && cmpPreorder(*target, expectedPath()) < 0)
        fail(Errc::CursorOrderViolation, "cursor moved backwards in serialization order");

    for (;;) {
        Frame& top = frames_.back();
        if (top.kind == Kind::Virtual) {
            if (target && target->empty()) {
                if (top.nextChild != 0)
                    fail(Errc::CursorOrderViolation, "the root was already emitted");
                return;
            }
            if (top.nextChild == 1) {
                if (!target) return;
                fail(Errc::CursorOrderViolation, "tree already fully emitted");
            }
            emitChild(0);
            continue;
        }

        // Local target index within this frame, or "drain it" when the target
        // lies outside.
        std::size_t depth = frames_.size() - 1;
        bool within = false;
        std::size_t local = 0;
        if (target && target->size() >= depth) {
            within = true;
            for (std::size_t k = 2; k < frames_.size(); ++k) {
                if ((*target)[k - 2] != frames_[k].idxInParent) {
                    within = false;
                    break;
                }
            }
            if (within) local = (*target)[depth - 1];
        }

        if (!within) {
            if (exhausted(top)) {
                popFrame();
                continue;
            }
            emitChild(top.nextChild);
            continue;
        }
        std::size_t j = top.nextChild;
        if (j > local)
            fail(Errc::CursorOrderViolation, "cursor points at already-written data");
        if (j < local) {
            if (exhausted(top))
                fail(Errc::CursorOrderViolation, "cursor points past the available data");
            emitChild(j);
            continue;
        }
        // j == local
        if (target->size() == depth) return;  // arrived
        std::size_t framesBefore = frames_.size();
        emitChild(j);  // must open a composite for the path to go deeper
        if (frames_.size() != framesBefore + 1)
            fail(Errc::CursorOrderViolation, "cursor path descends into a leaf");
    }
}

void WriterCore::emitArrived() {
    Frame& top = frames_.back();
    if (top.kind == Kind::Virtual) {
        emitChild(0);
        return;
    }
    emitChild(top.nextChild);
}

void WriterCore::closeInnermostRegion() {
    if (frames_.back().kind != Kind::ArrayFree)
        fail(Errc::CursorOrderViolation, "no open free-size region to close");
    popFrame();
}

void WriterCore::finishFrames() {
    if (finished_) return;
    while (frames_.size() > 1) {
        Frame& top = frames_.back();
        switch (top.kind) {
            case Kind::Struct: {
                const StructType& st = *top.rtype->asStruct();
                while (top.nextChild < st.fields.size()) {
                    std::size_t j = top.nextChild;
                    if (!st.fields[j].optional || top.node.impl()->fieldPresent(j))
                        fail(Errc::IncompletePrefix,
                             "field '" + st.fields[j].name + "' was never written");
                    out_->writeByte(0);
                    top.nextChild = j + 1;
                    releaseChild(top, j);
                }
                break;
            }
            case Kind::Union:
                if (!exhausted(top))
                    fail(Errc::IncompletePrefix, "union variant was never written");
                break;
            case Kind::ArrayFixed:
                if (!exhausted(top))
                    fail(Errc::IncompletePrefix, "fixed-size array written only partially");
                break;
            case Kind::ArrayFree:
                break;  // any element count is final
            case Kind::Virtual: break;
        }
        popFrame();
    }
    if (frames_.front().nextChild != 1)
        fail(Errc::IncompletePrefix, "no value was written");
    out_->flush();
    finished_ = true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// One-shot encode

void encodeValue(const DataHandle& d, ByteOrder order, ByteSink& out) {
    if (d.isNull()) fail(Errc::NullHandle, "cannot encode a null handle");
    detail::WriterCore core(out, order, detail::WriterCore::Counts::Eager, false, false);
    core.start(d);
    core.advanceUntil(std::nullopt);
    core.finishFrames();
}

std::vector<std::byte> encodeValue(const DataHandle& d, ByteOrder order) {
    MemorySink sink;
    encodeValue(d, order, sink);
    return sink.take();
}

// ---------------------------------------------------------------------------
// Decode

namespace {

struct DecodeCtx {
    SourceCursor& in;
    ByteOrder order;
    int depth = 0;
    std::unordered_map<const TypeNode*, std::uint64_t> minSizes;

    std::uint64_t minSize(const TypePtr& resolved, const TypeEnv& env) {
        auto it = minSizes.find(resolved.get());
        if (it != minSizes.end()) return it->second;
        std::uint64_t n = minEncodedSize(resolved, env);
        minSizes.emplace(resolved.get(), n);
        return n;
    }

    std::int64_t readCount(const char* what) {
        std::int32_t v = wire::readInt32(in, order);
        if (v < 0)
            failAt(Errc::NegativeCount, std::string("negative ") + what, in.position() - 4);
        return v;
    }
};

constexpr int kMaxDecodeDepth = 2048;

void decodeInto(const DataHandle& d, const TypePtr& t, const EnvPtr& env, DecodeCtx& ctx) {
    if (++ctx.depth > kMaxDecodeDepth)
        failAt(Errc::CountOverflow, "value nesting exceeds the decoder limit",
               ctx.in.position());
    struct Pop {
        int& d;
        ~Pop() { --d; }
    } pop{ctx.depth};

    TypePtr r = env->resolveFully(t);

    if (r->isAny()) {
        std::int64_t len = ctx.readCount("type text length");
        if (std::uint64_t(len) > ctx.in.remaining())
            failAt(Errc::CountOverflow, "type text runs past the input", ctx.in.position());
        std::string text(std::size_t(len), '\0');
        ctx.in.read({reinterpret_cast<std::byte*>(text.data()), text.size()});
        EnvPtr benv;
        try {
            benv = parseTypeText(text);
        } catch (const Error& e) {
            failAt(Errc::AnyTypeParseError, e.what(), ctx.in.position());
        }
        if (minEncodedSize(benv->root(), *benv) > ctx.in.remaining())
            failAt(Errc::CountOverflow, "bound value runs past the input", ctx.in.position());
        d.impl()->rebindAny(benv->root(), benv);
        decodeInto(d, benv->root(), benv, ctx);
        return;
    }
    if (const auto* n = r->asNum()) {
        int w = numWidth(n->kind);
        if (n->dims.empty()) {
            std::byte buf[16];
            ctx.in.read({buf, std::size_t(w)});
            std::byte cell[16] = {};
            if (ctx.order == ByteOrder::Little)
                std::memcpy(cell, buf, std::size_t(w));
            else
                for (int i = 0; i < w; ++i) cell[i] = buf[w - 1 - i];
            d.impl()->writeScalarCell(cell);
            return;
        }
        std::vector<std::int64_t> counts;
        counts.reserve(n->dims.size());
        for (Dim dim : n->dims)
            counts.push_back(dim.isFree() ? ctx.readCount("dimension count") : dim.count());
        std::uint64_t cells = 1;
        for (std::int64_t c : counts) cells = satMul(cells, std::uint64_t(c));
        std::uint64_t bytes = satMul(cells, std::uint64_t(w));
        if (bytes > ctx.in.remaining())
            failAt(Errc::CountOverflow, "matrix payload runs past the input", ctx.in.position());
        MatrixValue m(n->kind, MatrixShape::fromCounts(counts));
        ctx.in.read(m.payload());
        if (ctx.order == ByteOrder::Big && w > 1) {
            std::byte* p = m.payload().data();
            for (std::uint64_t i = 0; i < cells; ++i, p += w)
                for (int a = 0, b = w - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
        }
        d.assignMatrix(m);
        return;
    }
    if (const auto* s = r->asString()) {
        std::uint64_t len;
        if (s->size.isFree()) {
            len = std::uint64_t(ctx.readCount("string length"));
            if (len > ctx.in.remaining())
                failAt(Errc::CountOverflow, "string runs past the input", ctx.in.position());
        } else {
            len = std::uint64_t(s->size.count());
            if (len > ctx.in.remaining())
                failAt(Errc::Truncated, "fixed-size string runs past the input",
                       ctx.in.position());
        }
        std::string bytes(std::size_t(len), '\0');
        ctx.in.read({reinterpret_cast<std::byte*>(bytes.data()), bytes.size()});
        d.assignString(bytes);
        return;
    }
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) {
            std::uint64_t selOff = ctx.in.position();
            std::uint16_t sel = wire::readUint16(ctx.in, ctx.order);
            if (sel >= st->fields.size())
                failAt(Errc::BadUnionSelector,
                       "selector " + std::to_string(sel) + " for a " +
                           std::to_string(st->fields.size()) + "-variant union",
                       selOff);
            d.setActiveField(sel);
            decodeInto(d.fieldAt(sel), st->fields[sel].type, env, ctx);
            return;
        }
        for (std::size_t i = 0; i < st->fields.size(); ++i) {
            const Field& f = st->fields[i];
            if (f.optional) {
                std::uint8_t tag = ctx.in.readByte();
                if (tag == 0) continue;  // any nonzero tag means present
                d.impl()->setFieldPresent(i);
            }
            decodeInto(d.fieldAt(i), f.type, env, ctx);
        }
        return;
    }
    const auto* a = r->asArray();
    std::uint64_t count;
    if (a->size.isFree()) {
        count = std::uint64_t(ctx.readCount("array count"));
        TypePtr elem = env->resolveFully(a->elem);
        if (satMul(count, ctx.minSize(elem, *env)) > ctx.in.remaining())
            failAt(Errc::CountOverflow, "array contents run past the input", ctx.in.position());
        d.resize(std::size_t(count));
    } else {
        count = std::uint64_t(a->size.count());
    }
    for (std::uint64_t i = 0; i < count; ++i)
        decodeInto(d.elem(std::size_t(i)), a->elem, env, ctx);
}

}  // namespace

DataHandle decodeValue(const TypePtr& t, const EnvPtr& env, ByteOrder order, SourceCursor& in) {
    if (!env) fail(Errc::ValidationError, "null type environment");
    // Rejecting inputs shorter than the type's minimum encoding up front also
    // bounds the default-instance allocation below by the input size.
    if (minEncodedSize(t, *env) > in.remaining())
        failAt(Errc::Truncated, "input is shorter than the type's minimum encoded size",
               in.position());
    DataHandle d = newDirect(t, env);
    DecodeCtx ctx{in, order};
    decodeInto(d, t, env, ctx);
    return d;
}

DataHandle decodeValueAll(const TypePtr& t, const EnvPtr& env, ByteOrder order,
                          std::span<const std::byte> bytes) {
    MemorySource src(std::vector<std::byte>(bytes.begin(), bytes.end()));
    SourceCursor cur(src);
    DataHandle d = decodeValue(t, env, order, cur);
    if (!cur.atEnd())
        failAt(Errc::ValidationError, "trailing bytes after the root value", cur.position());
    return d;
}

// ---------------------------------------------------------------------------
// StreamWriter

StreamWriter::StreamWriter(const FileHeader& h, SeekableSink& sink) {
    writeHeader(h, sink);
    core_ = std::make_unique<detail::WriterCore>(
        sink, h.order(), detail::WriterCore::Counts::Backpatch, false, false);
}

StreamWriter::~StreamWriter() = default;
StreamWriter::StreamWriter(StreamWriter&&) noexcept = default;
StreamWriter& StreamWriter::operator=(StreamWriter&&) noexcept = default;

void StreamWriter::emitNext(const TreeCursor& c) {
    if (!core_->started())
        core_->start(c.root());
    else if (core_->root().impl() != c.root().impl())
        fail(Errc::CursorOrderViolation, "cursor walks a different tree");
    core_->advanceUntil(c.path());
    core_->emitArrived();
}

void StreamWriter::closeRegion() { core_->closeInnermostRegion(); }

void streamWriteAll(StreamWriter& w, const DataHandle& root) {
    TreeCursor c(root);
    for (;;) {
        w.emitNext(c);
        if (c.hasSubs()) {
            c.down();
            continue;
        }
        bool done = false;
        for (;;) {
            if (c.atRoot()) {
                done = true;
                break;
            }
            c.next();
            if (!c.atEnd()) break;
            c.up();
        }
        if (done) break;
    }
    w.finish();
}

void StreamWriter::finish() { core_->finishFrames(); }

std::size_t StreamWriter::openRegions() const { return core_->openRegions(); }

// ---------------------------------------------------------------------------
// DataFileWriter

DataFileWriter::DataFileWriter(const std::string& path, EnvPtr env, ByteOrder order,
                               std::vector<std::string> comments)
    : DataFileWriter(std::make_unique<FileSink>(path), std::move(env), order,
                     std::move(comments)) {}

DataFileWriter::DataFileWriter(std::unique_ptr<SeekableSink> sink, EnvPtr env, ByteOrder order,
                               std::vector<std::string> comments)
    : sink_(std::move(sink)) {
    FileHeader h;
    h.mode = order == ByteOrder::Big ? FileMode::BinaryBig : FileMode::BinaryLittle;
    h.comments = std::move(comments);
    h.typeEnv = env;
    writeHeader(h, *sink_);
    core_ = std::make_unique<detail::WriterCore>(
        *sink_, order, detail::WriterCore::Counts::Backpatch, true, true);
    root_ = newDirect(env);
    core_->start(root_);
}

DataFileWriter::~DataFileWriter() {
    if (!closed_ && core_ && !core_->finished()) {
        try {
            close();
        } catch (...) {
            // Destructors cannot report; an explicit close() would have.
        }
    }
}

DataFileWriter::DataFileWriter(DataFileWriter&&) noexcept = default;
DataFileWriter& DataFileWriter::operator=(DataFileWriter&&) noexcept = default;

void DataFileWriter::commit(const TreeCursor& upTo) {
    if (closed_) fail(Errc::IoError, "file already closed");
    if (upTo.root().impl() != root_.impl())
        fail(Errc::CursorOrderViolation, "cursor walks a different tree");
    core_->advanceUntil(upTo.path());
}

void DataFileWriter::close() {
    if (closed_) return;
    core_->advanceUntil(std::nullopt);
    core_->finishFrames();
    closed_ = true;
}

}  // namespace structfile
