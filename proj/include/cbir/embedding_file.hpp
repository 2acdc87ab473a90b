#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

#include "cbir/manifest.hpp"

namespace cbir {

/// Binary embedding file, little-endian:
///   "CBIR" | u32 version (=1) | u32 dimension | u64 count |
///   count x (u64 record_id, dimension x f32)
/// Vectors may be unnormalized.
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8;

struct EmbeddingRecord {
    RecordId record_id = 0;
    std::vector<float> vector;
};

struct FileHeader {
    std::uint32_t version = kFormatVersion;
    std::uint32_t dimension = 0;
    std::uint64_t count = 0;
};

/// Streams records from an embedding file. The file size is checked against
/// the header up front, so a truncated file fails at open().
class EmbeddingReader {
public:
    explicit EmbeddingReader(const std::filesystem::path& path);

    std::uint32_t dimension() const noexcept { return header_.dimension; }
    std::uint64_t count() const noexcept { return header_.count; }

    /// Reads the next record into `out`; false once all records are consumed.
    bool next(EmbeddingRecord& out);

private:
    std::ifstream in_;
    FileHeader header_;
    std::uint64_t consumed_ = 0;
};

/// Streams records into an embedding file in call order.
class EmbeddingWriter {
public:
    EmbeddingWriter(const std::filesystem::path& path, std::uint32_t dimension, std::uint64_t count);
    ~EmbeddingWriter();

    EmbeddingWriter(const EmbeddingWriter&) = delete;
    EmbeddingWriter& operator=(const EmbeddingWriter&) = delete;

    void write(RecordId id, std::span<const float> vector);
    /// Throws CorruptFile unless exactly `count` records were written.
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::uint32_t dimension_;
    std::uint64_t expected_;
    std::uint64_t written_ = 0;
    bool closed_ = false;
};

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path);
void write_embedding_file(const std::filesystem::path& path, std::uint32_t dimension,
                          std::span<const EmbeddingRecord> records);

namespace detail {
// Little-endian primitives shared with the index file format.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f32s(std::ostream& out, std::span<const float> values);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
void read_f32s(std::istream& in, std::span<float> values);
FileHeader read_header(std::istream& in);
void write_header(std::ostream& out, const FileHeader& header);
}  // namespace detail

}  // namespace cbir
