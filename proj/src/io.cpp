#include "maka/io.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "maka/error.hpp"

namespace maka {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "APEB I/O assumes a little-endian host");

std::uint64_t fnv1a64(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string to_hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return std::string(buf);
}

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::string encode_header(const ApebHeader& h) {
    std::string out;
    out.reserve(kApebHeaderSize);
    out.append(kApebMagic, 4);
    put_u32(out, h.version);
    out.push_back(static_cast<char>(h.dtype));
    out.push_back(static_cast<char>(h.normalized));
    put_u16(out, h.flags);
    put_u64(out, h.rows);
    put_u64(out, h.dim);
    return out;
}

void rename_over(const fs::path& tmp, const fs::path& path) {
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        fail("IoError", "rename to '" + path.string() + "' failed: " + ec.message());
    }
}

fs::path temp_sibling(const fs::path& path) {
    static std::atomic<std::uint64_t> counter{0};
    fs::path dir = path.parent_path();
    if (dir.empty()) dir = ".";
    std::ostringstream name;
    name << "." << path.filename().string() << ".tmp." << ::getpid() << "."
         << counter.fetch_add(1);
    return dir / name.str();
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& contents) {
    const fs::path tmp = temp_sibling(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("IoError", "cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp);
            fail("IoError", "write to '" + tmp.string() + "' failed");
        }
    }
    rename_over(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) fail("IoError", "read from '" + path.string() + "' failed");
    return ss.str();
}

std::uint64_t save_matrix(const EmbeddingMatrix& m, const fs::path& path, std::uint16_t flags) {
    validate_matrix(m);
    ApebHeader h;
    h.normalized = m.normalized ? 1 : 0;
    h.flags = flags;
    h.rows = m.rows;
    h.dim = m.dim;

    std::string bytes = encode_header(h);
    bytes.resize(kApebHeaderSize + m.data.size() * sizeof(float));
    std::memcpy(bytes.data() + kApebHeaderSize, m.data.data(), m.data.size() * sizeof(float));

    write_file_atomic(path, bytes);
    return fnv1a64(bytes.data(), bytes.size());
}

namespace {

ApebHeader decode_header(const std::string& bytes, const fs::path& path) {
    if (bytes.size() < kApebHeaderSize)
        fail("TruncatedFile", "'" + path.string() + "' is shorter than the header");
    if (std::memcmp(bytes.data(), kApebMagic, 4) != 0)
        fail("BadMagic", "'" + path.string() + "' does not start with APEB");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    ApebHeader h;
    h.version = get_u32(p + 4);
    h.dtype = p[8];
    h.normalized = p[9];
    h.flags = get_u16(p + 10);
    h.rows = get_u64(p + 12);
    h.dim = get_u64(p + 20);
    if (h.version != kApebVersion)
        fail("BadMagic", "'" + path.string() + "' has unsupported version " +
                             std::to_string(h.version));
    if (h.dtype != kDtypeF32)
        fail("BadMagic", "'" + path.string() + "' has unsupported dtype code " +
                             std::to_string(h.dtype));
    return h;
}

}  // namespace

ApebHeader read_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open '" + path.string() + "'");
    std::string bytes(kApebHeaderSize, '\0');
    in.read(bytes.data(), static_cast<std::streamsize>(kApebHeaderSize));
    if (in.gcount() != static_cast<std::streamsize>(kApebHeaderSize))
        fail("TruncatedFile", "'" + path.string() + "' is shorter than the header");
    return decode_header(bytes, path);
}

EmbeddingMatrix load_matrix(const fs::path& path, ApebHeader* header) {
    const std::string bytes = read_file(path);
    const ApebHeader h = decode_header(bytes, path);
    if (h.rows < 1 || h.dim < 1)
        fail("ShapeMismatch", "'" + path.string() + "' declares shape " +
                                  std::to_string(h.rows) + "x" + std::to_string(h.dim));
    const std::size_t expected = kApebHeaderSize + h.rows * h.dim * sizeof(float);
    if (bytes.size() != expected)
        fail("TruncatedFile", "'" + path.string() + "' holds " + std::to_string(bytes.size()) +
                                  " bytes, expected " + std::to_string(expected));

    EmbeddingMatrix m(h.rows, h.dim);
    std::memcpy(m.data.data(), bytes.data() + kApebHeaderSize, m.data.size() * sizeof(float));
    m.normalized = h.normalized != 0;
    for (std::size_t i = 0; i < m.data.size(); ++i) {
        if (!std::isfinite(m.data[i]))
            fail("NonFiniteValue", "'" + path.string() + "' has a non-finite value at flat index " +
                                       std::to_string(i));
    }
    if (header) *header = h;
    return m;
}

EmbeddingMatrix load_matrix_normalized(const fs::path& path) {
    EmbeddingMatrix m = load_matrix(path);
    if (!m.normalized) l2_normalize_in_place(m);
    return m;
}

std::uint64_t file_checksum(const fs::path& path) {
    const std::string bytes = read_file(path);
    return fnv1a64(bytes.data(), bytes.size());
}

const ManifestEntry* EmbeddingManifest::find(const std::string& id) const {
    for (const auto& e : entries)
        if (e.id == id) return &e;
    return nullptr;
}

EmbeddingManifest load_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail("MalformedJson", "manifest '" + path.string() + "': " + e.what());
    }
    EmbeddingManifest m;
    try {
        m.kind = j.at("kind").get<std::string>();
        for (const auto& e : j.at("entries")) {
            ManifestEntry entry;
            entry.id = e.at("id").get<std::string>();
            entry.path = e.at("path").get<std::string>();
            entry.rows = e.at("rows").get<std::uint64_t>();
            entry.dim = e.at("dim").get<std::uint64_t>();
            entry.checksum = e.at("checksum").get<std::string>();
            m.entries.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        fail("SchemaError", "manifest '" + path.string() + "': " + e.what());
    }
    if (m.kind != "video_frames" && m.kind != "prompt_texts")
        fail("SchemaError", "manifest '" + path.string() + "' has unknown kind '" + m.kind + "'");
    return m;
}

void save_manifest(const EmbeddingManifest& m, const fs::path& path) {
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back({{"id", e.id},
                           {"path", e.path},
                           {"rows", e.rows},
                           {"dim", e.dim},
                           {"checksum", e.checksum}});
    }
    json j{{"kind", m.kind}, {"entries", entries}};
    write_file_atomic(path, j.dump(2) + "\n");
}

void validate_manifest(const EmbeddingManifest& m, const fs::path& base_dir,
                       bool verify_checksums) {
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        for (std::size_t j = i + 1; j < m.entries.size(); ++j) {
            if (m.entries[i].id == m.entries[j].id)
                fail("SchemaError", "manifest has duplicate id '" + m.entries[i].id + "'");
        }
    }
    for (const auto& e : m.entries) {
        const fs::path p = base_dir / e.path;
        if (!fs::exists(p)) fail("IoError", "manifest entry '" + e.id + "': missing file " + p.string());
        const ApebHeader h = read_header(p);
        if (h.rows != e.rows || h.dim != e.dim)
            fail("ShapeMismatch", "manifest entry '" + e.id + "': header says " +
                                      std::to_string(h.rows) + "x" + std::to_string(h.dim) +
                                      ", manifest says " + std::to_string(e.rows) + "x" +
                                      std::to_string(e.dim));
        if (verify_checksums && to_hex64(file_checksum(p)) != e.checksum)
            fail("ChecksumMismatch", "manifest entry '" + e.id + "': checksum mismatch");
    }
}

}  // namespace maka
