#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "structfile/data.hpp"

namespace structfile {

// Address of a block inside the store file: the byte offset of its header.
// 0 is the null address and never a live block.
using BlockAddress = std::uint64_t;

class BlockStore;

// Locked in-memory copy of a block payload. While the handle is open the
// block cannot be freed or resized; release writes the copy back iff it was
// marked dirty.
class BlockHandle {
public:
    BlockHandle() = default;
    ~BlockHandle();
    BlockHandle(BlockHandle&& other) noexcept;
    BlockHandle& operator=(BlockHandle&& other) noexcept;
    BlockHandle(const BlockHandle&) = delete;
    BlockHandle& operator=(const BlockHandle&) = delete;

    BlockAddress address() const { return addr_; }
    std::span<std::byte> payload() { return {data_.data(), data_.size()}; }
    std::span<const std::byte> payload() const { return {data_.data(), data_.size()}; }
    void markDirty() { dirty_ = true; }
    void release();

private:
    friend class BlockStore;
    BlockHandle(std::shared_ptr<BlockStore> store, BlockAddress addr,
                std::vector<std::byte> data)
        : store_(std::move(store)), addr_(addr), data_(std::move(data)), open_(true) {}

    std::shared_ptr<BlockStore> store_;
    BlockAddress addr_ = 0;
    std::vector<std::byte> data_;
    bool dirty_ = false;
    bool open_ = false;
};

struct BlockStoreConfig {
    bool writable = true;
    // What a second openBlock on an already-locked address does.
    enum class LockPolicy { Fail, Wait } lockPolicy = LockPolicy::Fail;
};

// A block-structured random-access file managed like a heap: blocks of
// arbitrary size are allocated first-fit from an address-ordered free list,
// freed in any order (adjacent free blocks coalesce), and resized in place
// when the power-of-two allocation bucket leaves enough slack.
//
// Structured data maps onto blocks by the inlining rule: fixed-size values
// are stored in their parent's block, variable-size values as an 8-byte block
// address that stays null until the value is first written.
class BlockStore : public std::enable_shared_from_this<BlockStore> {
public:
    static std::shared_ptr<BlockStore> create(const std::string& path, const EnvPtr& env,
                                              BlockStoreConfig cfg = {});
    static std::shared_ptr<BlockStore> open(const std::string& path, BlockStoreConfig cfg = {});
    static bool isStoreFile(const std::string& path);

    ~BlockStore();
    void close();

    // -- block layer
    BlockAddress alloc(std::uint64_t size);
    void free(BlockAddress a);
    BlockAddress resizeBlock(BlockAddress a, std::uint64_t newSize);
    BlockHandle openBlock(BlockAddress a);
    std::uint64_t blockCapacity(BlockAddress a);

    // -- data layer
    const EnvPtr& typeEnv() const { return env_; }
    DataHandle rootHandle();

    // Checks the allocator invariants: the file body partitions into live and
    // free blocks, the free list matches the free blocks on disk, and no two
    // adjacent free blocks are left uncoalesced. Throws StoreCorrupt naming
    // the violated invariant.
    void verify();
    // Walks the stored data against the type tree: every slot is inline
    // exactly when its type has fixed size, every referenced address is null
    // or a live block large enough for its content.
    void auditLayout();

    // -- instrumentation
    std::uint64_t payloadWriteCount() const;
    std::size_t liveBlockCount();
    std::size_t freeBlockCount();
    BlockAddress rootAddress();

    struct State;  // on-disk layout and allocator state; internal

private:
    BlockStore() = default;
    friend class BlockHandle;
    friend class BlockNodeBase;
    std::unique_ptr<State> st_;
    EnvPtr env_;
};

}  // namespace structfile
