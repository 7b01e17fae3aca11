#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace lbdmids {

// FNV-1a over the byte range; used as the integrity checksum trailer in the
// model and dataset file formats.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len);

// Little-endian primitive append/read. Readers bounds-check and throw IoError
// with the failing offset so truncated files surface as clean diagnostics.
void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v);
void append_u64(std::vector<std::uint8_t>& buf, std::uint64_t v);
void append_f64(std::vector<std::uint8_t>& buf, double v);
void append_bytes(std::vector<std::uint8_t>& buf, const void* data, std::size_t len);

struct ByteReader {
    const std::vector<std::uint8_t>& buf;
    std::size_t pos = 0;

    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    std::string bytes(std::size_t len);
    std::size_t remaining() const { return buf.size() - pos; }

  private:
    void need(std::size_t n) const;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);

// Writes to <path>.tmp then renames, so failures never leave a partial file
// at the destination.
void atomic_write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
void atomic_write_text(const std::string& path, const std::string& text);

} // namespace lbdmids
