#include "cbir/embedding_file.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "cbir/error.hpp"

namespace cbir {

namespace detail {

namespace {

constexpr char kMagic[4] = {'C', 'B', 'I', 'R'};

void require(std::istream& in, const char* what) {
    if (!in) {
        throw Error(ErrorCode::CorruptFile, std::string("truncated file while reading ") + what);
    }
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

void write_f32s(std::ostream& out, std::span<const float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
        for (float f : values) write_u32(out, std::bit_cast<std::uint32_t>(f));
    }
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    require(in, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    require(in, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void read_f32s(std::istream& in, std::span<float> values) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
        require(in, "vector payload");
    } else {
        for (auto& f : values) f = std::bit_cast<float>(read_u32(in));
    }
}

FileHeader read_header(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    require(in, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw Error(ErrorCode::CorruptFile, "bad magic bytes (expected \"CBIR\")");
    }
    FileHeader header;
    header.version = read_u32(in);
    if (header.version != kFormatVersion) {
        throw Error(ErrorCode::CorruptFile, "unsupported format version " + std::to_string(header.version));
    }
    header.dimension = read_u32(in);
    if (header.dimension == 0) {
        throw Error(ErrorCode::CorruptFile, "dimension must be at least 1");
    }
    header.count = read_u64(in);
    return header;
}

void write_header(std::ostream& out, const FileHeader& header) {
    out.write(kMagic, 4);
    write_u32(out, header.version);
    write_u32(out, header.dimension);
    write_u64(out, header.count);
}

}  // namespace detail

EmbeddingReader::EmbeddingReader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) {
        throw Error(ErrorCode::MissingInput, "cannot open embedding file '" + path.string() + "'");
    }
    header_ = detail::read_header(in_);
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) {
        throw Error(ErrorCode::Io, "cannot stat '" + path.string() + "'");
    }
    const std::uint64_t record_bytes = 8 + 4ull * header_.dimension;
    if (header_.count > (size - kHeaderBytes) / record_bytes ||
        kHeaderBytes + header_.count * record_bytes != size) {
        throw Error(ErrorCode::CorruptFile, "embedding file '" + path.string() + "' size " + std::to_string(size) +
                                                " does not match header (count " + std::to_string(header_.count) +
                                                ", dimension " + std::to_string(header_.dimension) + ")");
    }
}

bool EmbeddingReader::next(EmbeddingRecord& out) {
    if (consumed_ == header_.count) return false;
    out.record_id = detail::read_u64(in_);
    out.vector.resize(header_.dimension);
    detail::read_f32s(in_, out.vector);
    ++consumed_;
    return true;
}

EmbeddingWriter::EmbeddingWriter(const std::filesystem::path& path, std::uint32_t dimension, std::uint64_t count)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), dimension_(dimension), expected_(count) {
    if (!out_) {
        throw Error(ErrorCode::Io, "cannot write embedding file '" + path.string() + "'");
    }
    if (dimension == 0) {
        throw Error(ErrorCode::InvalidArgument, "embedding dimension must be at least 1");
    }
    detail::write_header(out_, FileHeader{kFormatVersion, dimension, count});
}

EmbeddingWriter::~EmbeddingWriter() = default;

void EmbeddingWriter::write(RecordId id, std::span<const float> vector) {
    if (vector.size() != dimension_) {
        throw Error(ErrorCode::DimensionMismatch,
                    "record " + std::to_string(id) + " has dimension " + std::to_string(vector.size()) +
                        ", file declares " + std::to_string(dimension_),
                    id);
    }
    if (written_ == expected_) {
        throw Error(ErrorCode::InvalidArgument, "more records written than declared");
    }
    detail::write_u64(out_, id);
    detail::write_f32s(out_, vector);
    ++written_;
}

void EmbeddingWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.flush();
    if (!out_) {
        throw Error(ErrorCode::Io, "failed writing '" + path_.string() + "'");
    }
    if (written_ != expected_) {
        throw Error(ErrorCode::CorruptFile, "declared " + std::to_string(expected_) + " records, wrote " +
                                                std::to_string(written_));
    }
    out_.close();
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path) {
    EmbeddingReader reader(path);
    std::vector<EmbeddingRecord> records;
    records.reserve(reader.count());
    EmbeddingRecord record;
    while (reader.next(record)) records.push_back(record);
    return records;
}

void write_embedding_file(const std::filesystem::path& path, std::uint32_t dimension,
                          std::span<const EmbeddingRecord> records) {
    EmbeddingWriter writer(path, dimension, records.size());
    for (const auto& r : records) writer.write(r.record_id, r.vector);
    writer.close();
}

}  // namespace cbir
