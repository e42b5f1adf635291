#pragma once

// On-disk layout and shared state of the block store; internal to the
// library.

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <climits>
#include <condition_variable>
#include <cstring>
#include <map>
#include <mutex>
#include <set>

#include "structfile/blockstore.hpp"

namespace structfile {

namespace blockdetail {

constexpr char kMagic[8] = {'S', 'F', 'B', 'S', 'T', 'O', 'R', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kSuperSize = 64;
constexpr std::uint64_t kHeaderSize = 8;
constexpr std::uint64_t kMinPayload = 16;
constexpr std::uint32_t kLiveFlag = 1;

inline std::uint64_t bucketOf(std::uint64_t size) {
    std::uint64_t cap = kMinPayload;
    while (cap < size) cap <<= 1;
    return cap;
}

inline void putU32(std::byte* p, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) p[i] = std::byte(std::uint8_t(v >> (8 * i)));
}
inline void putU64(std::byte* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = std::byte(std::uint8_t(v >> (8 * i)));
}
inline std::uint32_t getU32(const std::byte* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}
inline std::uint64_t getU64(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

// One writer or any number of readers per store file.
inline std::mutex g_registryMutex;
inline std::map<std::string, std::pair<int, int>> g_registry;  // path -> (writers, readers)

inline std::string canonicalPath(const std::string& path) {
    char buf[PATH_MAX];
    if (::realpath(path.c_str(), buf)) return buf;
    return path;
}



// Slot width inside a parent block: variable-size values are stored as
// 8-byte block addresses, fixed-size values inline.
inline std::uint64_t slotWidth(const TypePtr& t, const TypeEnv& env) {
    return isVariableSize(t, env) ? 8 : fixedByteSize(t, env);
}

// Payload size of a freshly materialized (all-zero) block for a
// variable-size value: zero counts, null addresses, absent optionals.
inline std::uint64_t initialBlockSize(const TypePtr& t, const EnvPtr& env) {
    TypePtr r = env->resolveFully(t);
    if (const auto* n = r->asNum()) {
        std::uint64_t freeDims = 0;
        for (Dim d : n->dims)
            if (d.isFree()) ++freeDims;
        return 4 * freeDims;  // all free counts zero, no cells
    }
    if (r->asString()) return 4;
    if (const auto* st = r->asStruct()) {
        if (st->isUnion) return 2 + slotWidth(st->fields[0].type, *env);
        std::uint64_t total = 0;
        for (const Field& f : st->fields)
            total += (f.optional ? 1 : 0) + slotWidth(f.type, *env);
        return total;
    }
    const auto* a = r->asArray();
    if (a->size.isFree()) return 4;
    return std::uint64_t(a->size.count()) * slotWidth(a->elem, *env);
}

}  // namespace blockdetail

using namespace blockdetail;

struct BlockStore::State {
    int fd = -1;
    std::string path;
    BlockStoreConfig cfg;
    std::recursive_mutex mu;
    std::condition_variable_any lockCv;
    std::set<BlockAddress> locked;

    BlockAddress rootAddr = 0;
    BlockAddress typeAddr = 0;
    BlockAddress freeHead = 0;
    std::uint64_t fileLen = kSuperSize;
    std::map<BlockAddress, std::uint64_t> freeList;  // addr -> capacity

    std::atomic<std::uint64_t> payloadWrites{0};
    bool registered = false;

    ~State() {
        if (fd >= 0) ::close(fd);
        unregister();
    }

    void unregister() {
        if (!registered) return;
        registered = false;
        std::lock_guard<std::mutex> lock(g_registryMutex);
        auto it = g_registry.find(path);
        if (it == g_registry.end()) return;
        (cfg.writable ? it->second.first : it->second.second)--;
        if (it->second.first <= 0 && it->second.second <= 0) g_registry.erase(it);
    }

    void pread(std::uint64_t off, std::span<std::byte> out) const {
        std::byte* p = out.data();
        std::size_t left = out.size();
        while (left > 0) {
            ssize_t n = ::pread(fd, p, left, off_t(off));
            if (n < 0) {
                if (errno == EINTR) continue;
                fail(Errc::IoError, std::strerror(errno));
            }
            if (n == 0) fail(Errc::StoreCorrupt, "store file shorter than its superblock says");
            p += n;
            left -= std::size_t(n);
            off += std::uint64_t(n);
        }
    }

    void pwrite(std::uint64_t off, std::span<const std::byte> data) {
        const std::byte* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            ssize_t n = ::pwrite(fd, p, left, off_t(off));
            if (n < 0) {
                if (errno == EINTR) continue;
                fail(Errc::IoError, std::strerror(errno));
            }
            p += n;
            left -= std::size_t(n);
            off += std::uint64_t(n);
        }
    }

    struct Header {
        std::uint64_t capacity;
        bool live;
    };

    Header readHeader(BlockAddress a) const {
        std::byte buf[kHeaderSize];
        pread(a, buf);
        return {getU32(buf), (getU32(buf + 4) & kLiveFlag) != 0};
    }

    void writeHeader(BlockAddress a, std::uint64_t cap, bool live) {
        std::byte buf[kHeaderSize];
        putU32(buf, std::uint32_t(cap));
        putU32(buf + 4, live ? kLiveFlag : 0);
        pwrite(a, buf);
    }

    void writeFreeNext(BlockAddress a, BlockAddress next) {
        std::byte buf[8];
        putU64(buf, next);
        pwrite(a + kHeaderSize, buf);
    }

    BlockAddress readFreeNext(BlockAddress a) const {
        std::byte buf[8];
        pread(a + kHeaderSize, buf);
        return getU64(buf);
    }

    // Payload writes go first; the superblock is rewritten afterwards so a
    // crash between the two never leaves the free list pointing into limbo.
    void writeSuper() {
        std::byte buf[kSuperSize] = {};
        std::memcpy(buf, kMagic, 8);
        putU32(buf + 8, kVersion);
        putU32(buf + 12, 0);
        putU64(buf + 16, rootAddr);
        putU64(buf + 24, typeAddr);
        putU64(buf + 32, freeHead);
        putU64(buf + 40, fileLen);
        pwrite(0, buf);
    }

    void requireWritable() const {
        if (!cfg.writable) fail(Errc::ReadOnly, "store is open read-only");
    }

    void validateLive(BlockAddress a, Header& h) const {
        if (a == 0) fail(Errc::BadAddress, "null block address");
        if (a < kSuperSize || a + kHeaderSize > fileLen)
            fail(Errc::BadAddress, "address outside the store body");
        h = readHeader(a);
        if (a + kHeaderSize + h.capacity > fileLen)
            fail(Errc::StoreCorrupt, "block capacity runs past the end of the store");
        if (!h.live) fail(Errc::BadAddress, "address does not name a live block");
    }

    // -- free-list maintenance. The mirror map is authoritative in memory;
    // every change patches the corresponding on-disk links.

    BlockAddress predecessorOf(BlockAddress a) const {
        auto it = freeList.lower_bound(a);
        if (it == freeList.begin()) return 0;
        return std::prev(it)->first;
    }

    void linkAfter(BlockAddress pred, BlockAddress a, BlockAddress next) {
        if (pred == 0) {
            freeHead = a;
        } else {
            writeFreeNext(pred, a);
        }
        writeFreeNext(a, next);
    }

    void unlink(BlockAddress a) {
        auto it = freeList.find(a);
        BlockAddress next = std::next(it) == freeList.end() ? 0 : std::next(it)->first;
        BlockAddress pred = predecessorOf(a);
        if (pred == 0)
            freeHead = next;
        else
            writeFreeNext(pred, next);
        freeList.erase(it);
    }

    BlockAddress allocLocked(std::uint64_t size) {
        requireWritable();
        // First fit from the address-ordered free list.
        for (auto it = freeList.begin(); it != freeList.end(); ++it) {
            BlockAddress a = it->first;
            std::uint64_t cap = it->second;
            if (cap < size) continue;
            std::uint64_t want = bucketOf(size);
            if (cap >= want + kHeaderSize + kMinPayload) {
                // Split off the tail as a new free block taking a's place.
                BlockAddress rem = a + kHeaderSize + want;
                std::uint64_t remCap = cap - want - kHeaderSize;
                BlockAddress next = std::next(it) == freeList.end() ? 0 : std::next(it)->first;
                BlockAddress pred = predecessorOf(a);
                writeHeader(rem, remCap, false);
                linkAfter(pred, rem, next);
                freeList.erase(it);
                freeList[rem] = remCap;
                writeHeader(a, want, true);
                zeroPayload(a, want);
                writeSuper();
                return a;
            }
            unlink(a);
            writeHeader(a, cap, true);
            zeroPayload(a, cap);
            writeSuper();
            return a;
        }
        // Extend the file.
        BlockAddress a = fileLen;
        std::uint64_t cap = bucketOf(size);
        if (::ftruncate(fd, off_t(a + kHeaderSize + cap)) != 0)
            fail(Errc::IoError, std::strerror(errno));
        writeHeader(a, cap, true);
        fileLen = a + kHeaderSize + cap;
        writeSuper();
        return a;
    }

    void zeroPayload(BlockAddress a, std::uint64_t cap) {
        std::vector<std::byte> zeros(std::size_t(std::min<std::uint64_t>(cap, 1 << 20)));
        std::uint64_t off = a + kHeaderSize;
        std::uint64_t left = cap;
        while (left > 0) {
            std::uint64_t n = std::min<std::uint64_t>(left, zeros.size());
            pwrite(off, {zeros.data(), std::size_t(n)});
            off += n;
            left -= n;
        }
    }

    void freeLocked(BlockAddress a) {
        requireWritable();
        Header h;
        validateLive(a, h);
        if (locked.count(a)) fail(Errc::BlockLocked, "block has an open handle");

        BlockAddress newAddr = a;
        std::uint64_t newCap = h.capacity;
        auto nextIt = freeList.lower_bound(a);
        // merge with the physical predecessor
        if (nextIt != freeList.begin()) {
            auto prevIt = std::prev(nextIt);
            if (prevIt->first + kHeaderSize + prevIt->second == a) {
                newAddr = prevIt->first;
                newCap = prevIt->second + kHeaderSize + h.capacity;
                unlink(prevIt->first);
                nextIt = freeList.lower_bound(a);
            }
        }
        // merge with the physical successor
        if (nextIt != freeList.end() && newAddr + kHeaderSize + newCap == nextIt->first) {
            newCap += kHeaderSize + nextIt->second;
            unlink(nextIt->first);
        }
        auto after = freeList.lower_bound(newAddr);
        BlockAddress next = after == freeList.end() ? 0 : after->first;
        BlockAddress pred = predecessorOf(newAddr);
        writeHeader(newAddr, newCap, false);
        linkAfter(pred, newAddr, next);
        freeList[newAddr] = newCap;
        writeSuper();
    }

    // -- payload access used by the data layer

    void readPayload(BlockAddress a, std::uint64_t off, std::span<std::byte> out) const {
        Header h;
        validateLive(a, h);
        if (off + out.size() > h.capacity)
            fail(Errc::StoreCorrupt, "read past the end of a block payload");
        pread(a + kHeaderSize + off, out);
    }

    void writePayload(BlockAddress a, std::uint64_t off, std::span<const std::byte> data) {
        requireWritable();
        Header h;
        validateLive(a, h);
        if (off + data.size() > h.capacity)
            fail(Errc::StoreCorrupt, "write past the end of a block payload");
        pwrite(a + kHeaderSize + off, data);
        payloadWrites.fetch_add(1, std::memory_order_relaxed);
    }
};


}  // namespace structfile
