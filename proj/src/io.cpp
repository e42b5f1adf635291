#include "structfile/io.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>

namespace structfile {

// ---------------------------------------------------------------------------
// MemorySink

void MemorySink::write(std::span<const std::byte> bytes) {
    std::uint64_t end = pos_ + bytes.size();
    if (end > buf_.size()) buf_.resize(end);
    std::memcpy(buf_.data() + pos_, bytes.data(), bytes.size());
    pos_ = end;
}

void MemorySink::seek(std::uint64_t pos) {
    if (pos > buf_.size()) fail(Errc::IoError, "seek past end of buffer");
    pos_ = pos;
}

// ---------------------------------------------------------------------------
// FileSink

FileSink::FileSink(const std::string& path) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (fd_ < 0) fail(Errc::IoError, "cannot open '" + path + "' for writing: " + std::strerror(errno));
}

FileSink::~FileSink() {
    if (fd_ >= 0) ::close(fd_);
}

void FileSink::write(std::span<const std::byte> bytes) {
    const std::byte* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
        ssize_t n = ::pwrite(fd_, p, left, off_t(pos_));
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(Errc::IoError, std::strerror(errno));
        }
        p += n;
        left -= std::size_t(n);
        pos_ += std::uint64_t(n);
    }
}

void FileSink::seek(std::uint64_t pos) { pos_ = pos; }

void FileSink::flush() {
    if (fd_ >= 0 && ::fsync(fd_) != 0) fail(Errc::IoError, std::strerror(errno));
}

void FileSink::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

// ---------------------------------------------------------------------------
// RawStreamSink

void RawStreamSink::write(std::span<const std::byte> bytes) {
    if (std::fwrite(bytes.data(), 1, bytes.size(), f_) != bytes.size())
        fail(Errc::IoError, "short write to stream");
}

void RawStreamSink::flush() { std::fflush(f_); }

// ---------------------------------------------------------------------------
// Sources

MemorySource::MemorySource(std::string_view text) {
    buf_.resize(text.size());
    std::memcpy(buf_.data(), text.data(), text.size());
}

void MemorySource::readAt(std::uint64_t offset, std::span<std::byte> out) const {
    if (offset + out.size() > buf_.size())
        failAt(Errc::Truncated, "read past end of buffer", offset);
    std::memcpy(out.data(), buf_.data() + offset, out.size());
}

FileSource::FileSource(const std::string& path) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) fail(Errc::IoError, "cannot open '" + path + "': " + std::strerror(errno));
    struct stat st {};
    if (::fstat(fd_, &st) != 0) {
        ::close(fd_);
        fail(Errc::IoError, std::strerror(errno));
    }
    size_ = std::uint64_t(st.st_size);
}

FileSource::~FileSource() {
    if (fd_ >= 0) ::close(fd_);
}

void FileSource::readAt(std::uint64_t offset, std::span<std::byte> out) const {
    if (offset + out.size() > size_) failAt(Errc::Truncated, "read past end of file", offset);
    std::byte* p = out.data();
    std::size_t left = out.size();
    std::uint64_t off = offset;
    while (left > 0) {
        ssize_t n = ::pread(fd_, p, left, off_t(off));
        if (n < 0) {
            if (errno == EINTR) continue;
            fail(Errc::IoError, std::strerror(errno));
        }
        if (n == 0) failAt(Errc::Truncated, "unexpected end of file", off);
        p += n;
        left -= std::size_t(n);
        off += std::uint64_t(n);
    }
}

// ---------------------------------------------------------------------------
// SourceCursor

bool SourceCursor::readLine(std::string& line) {
    line.clear();
    if (atEnd()) return false;
    while (!atEnd()) {
        std::byte b;
        read({&b, 1});
        char c = char(std::to_integer<std::uint8_t>(b));
        if (c == '\n') break;
        line.push_back(c);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

}  // namespace structfile
