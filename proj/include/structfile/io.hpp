#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "structfile/error.hpp"

namespace structfile {

enum class ByteOrder { Big, Little };

// ---------------------------------------------------------------------------
// Sinks

class ByteSink {
public:
    virtual ~ByteSink() = default;
    virtual void write(std::span<const std::byte> bytes) = 0;
    virtual bool seekable() const { return false; }
    virtual void flush() {}

    void writeByte(std::uint8_t b) {
        std::byte x{b};
        write({&x, 1});
    }
    void writeText(std::string_view s) {
        write({reinterpret_cast<const std::byte*>(s.data()), s.size()});
    }
};

// Sink that additionally supports repositioning, needed by the streaming
// writer to patch count cells after the fact.
class SeekableSink : public ByteSink {
public:
    bool seekable() const override { return true; }
    virtual std::uint64_t tell() const = 0;
    virtual void seek(std::uint64_t pos) = 0;
};

class MemorySink final : public SeekableSink {
public:
    void write(std::span<const std::byte> bytes) override;
    std::uint64_t tell() const override { return pos_; }
    void seek(std::uint64_t pos) override;

    const std::vector<std::byte>& bytes() const { return buf_; }
    std::vector<std::byte> take() { return std::move(buf_); }

private:
    std::vector<std::byte> buf_;
    std::uint64_t pos_ = 0;
};

class FileSink final : public SeekableSink {
public:
    explicit FileSink(const std::string& path);
    ~FileSink() override;
    FileSink(const FileSink&) = delete;
    FileSink& operator=(const FileSink&) = delete;

    void write(std::span<const std::byte> bytes) override;
    std::uint64_t tell() const override { return pos_; }
    void seek(std::uint64_t pos) override;
    void flush() override;
    void close();

private:
    int fd_ = -1;
    std::uint64_t pos_ = 0;
};

// Forwards to a FILE-like stream without seeking; used for stdout.
class RawStreamSink final : public ByteSink {
public:
    explicit RawStreamSink(std::FILE* f) : f_(f) {}
    void write(std::span<const std::byte> bytes) override;
    void flush() override;

private:
    std::FILE* f_;
};

// ---------------------------------------------------------------------------
// Sources

// Positioned reads with no shared cursor; safe for concurrent readers.
class RandomAccessSource {
public:
    virtual ~RandomAccessSource() = default;
    virtual void readAt(std::uint64_t offset, std::span<std::byte> out) const = 0;
    virtual std::uint64_t size() const = 0;
};

class MemorySource final : public RandomAccessSource {
public:
    explicit MemorySource(std::vector<std::byte> bytes) : buf_(std::move(bytes)) {}
    explicit MemorySource(std::string_view text);

    void readAt(std::uint64_t offset, std::span<std::byte> out) const override;
    std::uint64_t size() const override { return buf_.size(); }

private:
    std::vector<std::byte> buf_;
};

class FileSource final : public RandomAccessSource {
public:
    explicit FileSource(const std::string& path);
    ~FileSource() override;
    FileSource(const FileSource&) = delete;
    FileSource& operator=(const FileSource&) = delete;

    void readAt(std::uint64_t offset, std::span<std::byte> out) const override;
    std::uint64_t size() const override { return size_; }

private:
    int fd_ = -1;
    std::uint64_t size_ = 0;
};

// Wrapper that counts the bytes fetched and the highest offset touched.
class CountingSource final : public RandomAccessSource {
public:
    explicit CountingSource(std::shared_ptr<const RandomAccessSource> inner)
        : inner_(std::move(inner)) {}

    void readAt(std::uint64_t offset, std::span<std::byte> out) const override {
        inner_->readAt(offset, out);
        bytesRead_ += out.size();
        std::uint64_t end = offset + out.size();
        std::uint64_t seen = maxOffset_.load();
        while (end > seen && !maxOffset_.compare_exchange_weak(seen, end)) {
        }
    }
    std::uint64_t size() const override { return inner_->size(); }

    std::uint64_t bytesRead() const { return bytesRead_.load(); }
    std::uint64_t maxOffsetRead() const { return maxOffset_.load(); }
    void resetCounters() { bytesRead_ = 0, maxOffset_ = 0; }

private:
    std::shared_ptr<const RandomAccessSource> inner_;
    mutable std::atomic<std::uint64_t> bytesRead_{0};
    mutable std::atomic<std::uint64_t> maxOffset_{0};
};

// Sequential view over a RandomAccessSource; the decoder works through this.
class SourceCursor {
public:
    explicit SourceCursor(const RandomAccessSource& src, std::uint64_t pos = 0)
        : src_(&src), pos_(pos) {}

    std::uint64_t position() const { return pos_; }
    std::uint64_t remaining() const {
        std::uint64_t n = src_->size();
        return pos_ >= n ? 0 : n - pos_;
    }
    bool atEnd() const { return remaining() == 0; }

    void read(std::span<std::byte> out) {
        if (out.size() > remaining())
            failAt(Errc::Truncated,
                   "need " + std::to_string(out.size()) + " bytes, " +
                       std::to_string(remaining()) + " remain",
                   pos_);
        src_->readAt(pos_, out);
        pos_ += out.size();
    }
    std::uint8_t readByte() {
        std::byte b;
        read({&b, 1});
        return std::to_integer<std::uint8_t>(b);
    }
    void skip(std::uint64_t n) {
        if (n > remaining()) failAt(Errc::Truncated, "skip past end of input", pos_);
        pos_ += n;
    }
    // Reads through the next '\n' (or end of input); strips "\n" and "\r\n".
    // Returns false when the input is already exhausted.
    bool readLine(std::string& line);

private:
    const RandomAccessSource* src_;
    std::uint64_t pos_;
};

// ---------------------------------------------------------------------------
// Wire-order scalar helpers

namespace wire {

inline void putUint(std::uint64_t v, int width, ByteOrder order, std::byte* out) {
    for (int i = 0; i < width; ++i) {
        int shift = (order == ByteOrder::Little) ? 8 * i : 8 * (width - 1 - i);
        out[i] = std::byte(std::uint8_t(v >> shift));
    }
}

inline std::uint64_t getUint(const std::byte* in, int width, ByteOrder order) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
        int shift = (order == ByteOrder::Little) ? 8 * i : 8 * (width - 1 - i);
        v |= std::uint64_t(std::to_integer<std::uint8_t>(in[i])) << shift;
    }
    return v;
}

inline void writeUint(ByteSink& out, std::uint64_t v, int width, ByteOrder order) {
    std::byte buf[8];
    putUint(v, width, order, buf);
    out.write({buf, std::size_t(width)});
}

inline std::int32_t readInt32(SourceCursor& in, ByteOrder order) {
    std::byte buf[4];
    in.read({buf, 4});
    return std::int32_t(std::uint32_t(getUint(buf, 4, order)));
}

inline std::uint16_t readUint16(SourceCursor& in, ByteOrder order) {
    std::byte buf[2];
    in.read({buf, 2});
    return std::uint16_t(getUint(buf, 2, order));
}

}  // namespace wire

}  // namespace structfile
