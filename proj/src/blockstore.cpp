#include "structfile/blockstore.hpp"

#include <cstring>
#include <unordered_set>

#include "blockstore_internal.hpp"
#include "data_internal.hpp"
#include "structfile/ddl.hpp"

namespace structfile {

// ---------------------------------------------------------------------------
// Open / create

std::shared_ptr<BlockStore> BlockStore::create(const std::string& path, const EnvPtr& env,
                                               BlockStoreConfig cfg) {
    if (!env) fail(Errc::ValidationError, "store needs a type environment");
    if (!cfg.writable) fail(Errc::ReadOnly, "cannot create a read-only store");
    auto store = std::shared_ptr<BlockStore>(new BlockStore());
    store->st_ = std::make_unique<State>();
    State& st = *store->st_;
    st.cfg = cfg;
    st.fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (st.fd < 0) fail(Errc::IoError, "cannot create '" + path + "': " + std::strerror(errno));
    st.path = canonicalPath(path);
    {
        std::lock_guard<std::mutex> lock(g_registryMutex);
        auto& entry = g_registry[st.path];
        if (entry.first > 0 || entry.second > 0)
            fail(Errc::BlockLocked, "store is already open in this process");
        entry.first++;
    }
    st.registered = true;

    st.fileLen = kSuperSize;
    if (::ftruncate(st.fd, off_t(kSuperSize)) != 0) fail(Errc::IoError, std::strerror(errno));
    st.writeSuper();

    std::string typeText = printType(env->root(), *env);
    st.typeAddr = st.allocLocked(4 + typeText.size());
    std::vector<std::byte> buf(4 + typeText.size());
    putU32(buf.data(), std::uint32_t(typeText.size()));
    std::memcpy(buf.data() + 4, typeText.data(), typeText.size());
    st.writePayload(st.typeAddr, 0, buf);

    store->env_ = env;
    TypePtr root = env->resolveFully(env->root());
    if (root->isAny()) {
        st.rootAddr = 0;  // unbound until actualizeType
    } else {
        std::uint64_t rootSize = isVariableSize(root, *env) ? initialBlockSize(root, env)
                                                            : fixedByteSize(root, *env);
        st.rootAddr = st.allocLocked(rootSize);
    }
    st.writeSuper();
    return store;
}

std::shared_ptr<BlockStore> BlockStore::open(const std::string& path, BlockStoreConfig cfg) {
    auto store = std::shared_ptr<BlockStore>(new BlockStore());
    store->st_ = std::make_unique<State>();
    State& st = *store->st_;
    st.cfg = cfg;
    st.fd = ::open(path.c_str(), cfg.writable ? O_RDWR : O_RDONLY);
    if (st.fd < 0) fail(Errc::IoError, "cannot open '" + path + "': " + std::strerror(errno));
    st.path = canonicalPath(path);
    {
        std::lock_guard<std::mutex> lock(g_registryMutex);
        auto& entry = g_registry[st.path];
        if (cfg.writable && (entry.first > 0 || entry.second > 0))
            fail(Errc::BlockLocked, "store is already open in this process");
        if (!cfg.writable && entry.first > 0)
            fail(Errc::BlockLocked, "store is open for writing in this process");
        (cfg.writable ? entry.first : entry.second)++;
    }
    st.registered = true;

    std::byte super[kSuperSize];
    struct stat info {};
    if (::fstat(st.fd, &info) != 0) fail(Errc::IoError, std::strerror(errno));
    if (std::uint64_t(info.st_size) < kSuperSize)
        fail(Errc::StoreCorrupt, "file too short for a store superblock");
    st.pread(0, super);
    if (std::memcmp(super, kMagic, 8) != 0) fail(Errc::BadMagic, "not a block store file");
    if (getU32(super + 8) != kVersion)
        fail(Errc::UnsupportedVersion, "unsupported store version");
    st.rootAddr = getU64(super + 16);
    st.typeAddr = getU64(super + 24);
    st.freeHead = getU64(super + 32);
    st.fileLen = getU64(super + 40);
    if (st.fileLen < kSuperSize || st.fileLen > std::uint64_t(info.st_size))
        fail(Errc::StoreCorrupt, "superblock length field out of range");

    // Rebuild the free-list mirror.
    BlockAddress a = st.freeHead;
    std::uint64_t guard = 0;
    while (a != 0) {
        if (++guard > st.fileLen / (kHeaderSize + kMinPayload) + 1)
            fail(Errc::StoreCorrupt, "free list is cyclic");
        if (a < kSuperSize || a + kHeaderSize > st.fileLen)
            fail(Errc::StoreCorrupt, "free list points outside the store body");
        State::Header h = st.readHeader(a);
        if (h.live) fail(Errc::StoreCorrupt, "free list points at a live block");
        st.freeList[a] = h.capacity;
        a = st.readFreeNext(a);
    }

    // Load the embedded type.
    State::Header th;
    st.validateLive(st.typeAddr, th);
    std::byte lenBuf[4];
    st.readPayload(st.typeAddr, 0, lenBuf);
    std::uint32_t typeLen = getU32(lenBuf);
    if (typeLen + 4 > th.capacity) fail(Errc::StoreCorrupt, "type text longer than its block");
    std::string text(typeLen, '\0');
    st.readPayload(st.typeAddr, 4, {reinterpret_cast<std::byte*>(text.data()), text.size()});
    store->env_ = parseTypeText(text);
    return store;
}

bool BlockStore::isStoreFile(const std::string& path) {
    int fd = ::open(path.c_str(), O_RDONLY);
    if (fd < 0) return false;
    char buf[8];
    ssize_t n = ::read(fd, buf, 8);
    ::close(fd);
    return n == 8 && std::memcmp(buf, kMagic, 8) == 0;
}

BlockStore::~BlockStore() = default;

void BlockStore::close() {
    if (!st_) return;
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    if (st_->fd >= 0) {
        ::fsync(st_->fd);
        ::close(st_->fd);
        st_->fd = -1;
    }
    st_->unregister();
}

// ---------------------------------------------------------------------------
// Public block layer

BlockAddress BlockStore::alloc(std::uint64_t size) {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    return st_->allocLocked(size);
}

void BlockStore::free(BlockAddress a) {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    st_->freeLocked(a);
}

BlockAddress BlockStore::resizeBlock(BlockAddress a, std::uint64_t newSize) {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    st_->requireWritable();
    State::Header h;
    st_->validateLive(a, h);
    if (st_->locked.count(a)) fail(Errc::BlockLocked, "block has an open handle");
    if (newSize <= h.capacity) return a;
    BlockAddress b = st_->allocLocked(newSize);
    std::vector<std::byte> data(std::size_t(h.capacity));
    st_->pread(a + kHeaderSize, data);
    st_->pwrite(b + kHeaderSize, data);
    st_->freeLocked(a);
    return b;
}

BlockHandle BlockStore::openBlock(BlockAddress a) {
    std::unique_lock<std::recursive_mutex> lock(st_->mu);
    State::Header h;
    st_->validateLive(a, h);
    while (st_->locked.count(a)) {
        if (st_->cfg.lockPolicy == BlockStoreConfig::LockPolicy::Fail)
            fail(Errc::BlockLocked, "block already has an open handle");
        st_->lockCv.wait(lock);
    }
    st_->validateLive(a, h);
    st_->locked.insert(a);
    std::vector<std::byte> data(std::size_t(h.capacity));
    st_->pread(a + kHeaderSize, data);
    return BlockHandle(shared_from_this(), a, std::move(data));
}

std::uint64_t BlockStore::blockCapacity(BlockAddress a) {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    State::Header h;
    st_->validateLive(a, h);
    return h.capacity;
}

std::uint64_t BlockStore::payloadWriteCount() const {
    return st_->payloadWrites.load(std::memory_order_relaxed);
}

std::size_t BlockStore::liveBlockCount() {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    std::size_t live = 0;
    BlockAddress a = kSuperSize;
    while (a < st_->fileLen) {
        State::Header h = st_->readHeader(a);
        if (h.live) ++live;
        a += kHeaderSize + h.capacity;
    }
    return live;
}

std::size_t BlockStore::freeBlockCount() {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    return st_->freeList.size();
}

BlockAddress BlockStore::rootAddress() {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    return st_->rootAddr;
}

// ---------------------------------------------------------------------------
// BlockHandle

BlockHandle::~BlockHandle() {
    if (open_) {
        try {
            release();
        } catch (...) {
        }
    }
}

BlockHandle::BlockHandle(BlockHandle&& other) noexcept
    : store_(std::move(other.store_)), addr_(other.addr_), data_(std::move(other.data_)),
      dirty_(other.dirty_), open_(other.open_) {
    other.open_ = false;
}

BlockHandle& BlockHandle::operator=(BlockHandle&& other) noexcept {
    if (this != &other) {
        if (open_) {
            try {
                release();
            } catch (...) {
            }
        }
        store_ = std::move(other.store_);
        addr_ = other.addr_;
        data_ = std::move(other.data_);
        dirty_ = other.dirty_;
        open_ = other.open_;
        other.open_ = false;
    }
    return *this;
}

void BlockHandle::release() {
    if (!open_) fail(Errc::DoubleRelease, "block handle already released");
    open_ = false;
    BlockStore::State& st = *store_->st_;
    std::lock_guard<std::recursive_mutex> lock(st.mu);
    if (dirty_) st.writePayload(addr_, 0, data_);
    st.locked.erase(addr_);
    st.lockCv.notify_all();
}

// ---------------------------------------------------------------------------
// Verifier

void BlockStore::verify() {
    std::lock_guard<std::recursive_mutex> lock(st_->mu);
    State& st = *st_;
    std::map<BlockAddress, std::uint64_t> diskFree;
    std::set<BlockAddress> diskLive;
    BlockAddress a = kSuperSize;
    BlockAddress prevFreeEnd = 0;  // end offset of the previous block if it was free
    while (a < st.fileLen) {
        if (a + kHeaderSize > st.fileLen)
            fail(Errc::StoreCorrupt, "partition: trailing bytes too short for a block header");
        State::Header h = st.readHeader(a);
        std::uint64_t end = a + kHeaderSize + h.capacity;
        if (h.capacity < kMinPayload && !h.live)
            fail(Errc::StoreCorrupt, "partition: free block below the minimum payload size");
        if (end > st.fileLen)
            fail(Errc::StoreCorrupt, "partition: block runs past the end of the body");
        if (h.live) {
            diskLive.insert(a);
            prevFreeEnd = 0;
        } else {
            if (prevFreeEnd == a)
                fail(Errc::StoreCorrupt, "coalescing: adjacent free blocks left unmerged");
            diskFree[a] = h.capacity;
            prevFreeEnd = end;
        }
        a = end;
    }
    if (a != st.fileLen)
        fail(Errc::StoreCorrupt, "partition: blocks do not cover the body exactly");

    // The free list must enumerate exactly the free blocks.
    std::set<BlockAddress> chain;
    BlockAddress f = st.freeHead;
    while (f != 0) {
        if (!diskFree.count(f))
            fail(Errc::StoreCorrupt, "free list: entry is not a free block");
        if (!chain.insert(f).second) fail(Errc::StoreCorrupt, "free list: cycle");
        f = st.readFreeNext(f);
    }
    if (chain.size() != diskFree.size())
        fail(Errc::StoreCorrupt, "free list: does not cover all free blocks");
    if (st.freeList.size() != diskFree.size())
        fail(Errc::StoreCorrupt, "free list: in-memory mirror out of sync");

    if (st.rootAddr && !diskLive.count(st.rootAddr))
        fail(Errc::StoreCorrupt, "superblock: root address is not a live block");
    if (st.typeAddr && !diskLive.count(st.typeAddr))
        fail(Errc::StoreCorrupt, "superblock: type address is not a live block");
}

}  // namespace structfile
