#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maka/embedding.hpp"

namespace maka {

// APEB embedding file, version 1, little-endian:
//
//   offset  size  field
//   0       4     magic "APEB"
//   4       4     format version (u32) = 1
//   8       1     dtype code (u8) = 1 (float32)
//   9       1     normalized flag (u8, 0 or 1)
//   10      2     flags (u16); 0 for plain embedding matrices
//   12      8     rows (u64)
//   20      8     dim (u64)
//   28      -     payload: rows*dim float32, row-major
//
// The flags field doubles as the payload-kind marker for adapter files:
// bit 0 set = payload is a linear adapter (d x d weight in the first d rows),
// bit 1 set = a bias row is appended after the weight rows.
inline constexpr char kApebMagic[4] = {'A', 'P', 'E', 'B'};
inline constexpr std::uint32_t kApebVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint16_t kFlagAdapter = 1u << 0;
inline constexpr std::uint16_t kFlagAdapterBias = 1u << 1;
inline constexpr std::size_t kApebHeaderSize = 28;

struct ApebHeader {
    std::uint32_t version = kApebVersion;
    std::uint8_t dtype = kDtypeF32;
    std::uint8_t normalized = 0;
    std::uint16_t flags = 0;
    std::uint64_t rows = 0;
    std::uint64_t dim = 0;
};

// FNV-1a 64-bit; used for file checksums and cache keys.
std::uint64_t fnv1a64(const void* bytes, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::string to_hex64(std::uint64_t value);

// Serializes the matrix to the APEB format and returns the checksum of the
// written bytes. The write goes to a temporary file in the same directory
// followed by a rename, so concurrent readers never see a partial file.
std::uint64_t save_matrix(const EmbeddingMatrix& m, const std::filesystem::path& path,
                          std::uint16_t flags = 0);

// Reads the file exactly as stored (no normalization pass), validating magic,
// version, dtype, declared shape against payload length, and finiteness.
// Errors: BadMagic, ShapeMismatch, TruncatedFile, NonFiniteValue.
EmbeddingMatrix load_matrix(const std::filesystem::path& path, ApebHeader* header = nullptr);

// load_matrix, then l2-normalize when the header's normalized flag is unset.
// Scoring paths go through this; raw round-trips go through load_matrix.
EmbeddingMatrix load_matrix_normalized(const std::filesystem::path& path);

// Reads only the header (for manifest validation).
ApebHeader read_header(const std::filesystem::path& path);

std::uint64_t file_checksum(const std::filesystem::path& path);

// JSON manifest listing embedding files relative to the manifest's directory.
struct ManifestEntry {
    std::string id;
    std::string path;  // relative to the manifest file
    std::uint64_t rows = 0;
    std::uint64_t dim = 0;
    std::string checksum;  // 16 hex digits (fnv1a64 of the file bytes)
};

struct EmbeddingManifest {
    std::string kind;  // "video_frames" | "prompt_texts"
    std::vector<ManifestEntry> entries;

    const ManifestEntry* find(const std::string& id) const;
};

EmbeddingManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const EmbeddingManifest& m, const std::filesystem::path& path);

// Checks id uniqueness, file existence, and header agreement with the
// declared (rows, dim). With verify_checksums, also re-hashes every file.
void validate_manifest(const EmbeddingManifest& m, const std::filesystem::path& base_dir,
                       bool verify_checksums = false);

// Atomic text-file write (temp + rename), shared by all exporters.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace maka
