#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "maka/embedding.hpp"
#include "maka/error.hpp"
#include "maka/io.hpp"
#include "maka/rng.hpp"
#include "oracle.hpp"

using namespace maka;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("maka_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

}  // namespace

TEST_CASE("l2_normalize basic rows") {
    EmbeddingMatrix m(2, 2, {3.0f, 4.0f, 1.0f, 0.0f});
    const EmbeddingMatrix n = l2_normalize(m);
    CHECK(n.row(0)[0] == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(n.row(0)[1] == doctest::Approx(0.8).epsilon(1e-7));
    CHECK(n.row(1)[0] == 1.0f);
    CHECK(n.row(1)[1] == 0.0f);
    CHECK(n.normalized);
}

TEST_CASE("l2_normalize rejects zero rows") {
    EmbeddingMatrix m(1, 2, {0.0f, 0.0f});
    CHECK(error_code([&] { l2_normalize(m); }) == "ZeroNormRow");
}

TEST_CASE("l2_normalize is idempotent within 1e-7") {
    SplitMix64 rng(101);
    for (int it = 0; it < 50; ++it) {
        const std::size_t rows = 1 + rng.next_below(6), dim = 1 + rng.next_below(24);
        EmbeddingMatrix m(rows, dim);
        for (auto& x : m.data) x = static_cast<float>(rng.next_gaussian() * 3.0);
        bool zero_row = false;
        for (std::size_t i = 0; i < rows; ++i) zero_row = zero_row || row_norm(m, i) <= 1e-12;
        if (zero_row) continue;
        const EmbeddingMatrix once = l2_normalize(m);
        const EmbeddingMatrix twice = l2_normalize(once);
        for (std::size_t i = 0; i < once.data.size(); ++i)
            CHECK(std::fabs(once.data[i] - twice.data[i]) < 1e-7);
    }
}

TEST_CASE("validate_matrix flags NaN and shape problems") {
    EmbeddingMatrix bad(1, 2, {1.0f, std::numeric_limits<float>::quiet_NaN()});
    CHECK(error_code([&] { validate_matrix(bad); }) == "NonFiniteValue");
    EmbeddingMatrix short_buf;
    short_buf.rows = 2;
    short_buf.dim = 2;
    short_buf.data = {1.0f, 2.0f};
    CHECK(error_code([&] { validate_matrix(short_buf); }) == "ShapeMismatch");
}

TEST_CASE("save/load round-trips bit-exactly over random matrices") {
    const fs::path dir = temp_dir("roundtrip");
    SplitMix64 rng(7);
    for (int it = 0; it < 30; ++it) {
        const std::size_t rows = 1 + rng.next_below(8), dim = 1 + rng.next_below(33);
        EmbeddingMatrix m(rows, dim);
        for (auto& x : m.data) x = static_cast<float>(rng.next_gaussian() * 10.0);
        m.normalized = rng.next_below(2) == 0;

        const fs::path p = dir / ("m" + std::to_string(it) + ".apeb");
        const std::uint64_t checksum = save_matrix(m, p);
        const EmbeddingMatrix back = load_matrix(p);
        REQUIRE(back.rows == m.rows);
        REQUIRE(back.dim == m.dim);
        CHECK(back.normalized == m.normalized);
        CHECK(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)) == 0);
        CHECK(checksum == file_checksum(p));
    }
}

TEST_CASE("checksums are deterministic and content-sensitive") {
    const fs::path dir = temp_dir("checksum");
    EmbeddingMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
    const std::uint64_t a = save_matrix(m, dir / "a.apeb");
    const std::uint64_t b = save_matrix(m, dir / "b.apeb");
    CHECK(a == b);
    m.data[4] = -m.data[4];
    const std::uint64_t c = save_matrix(m, dir / "c.apeb");
    CHECK(a != c);
}

TEST_CASE("load_matrix validates header and payload") {
    const fs::path dir = temp_dir("badfiles");
    EmbeddingMatrix m(2, 3, {1, 2, 3, 4, 5, 6});
    save_matrix(m, dir / "good.apeb");
    std::string bytes = read_file(dir / "good.apeb");

    SUBCASE("truncated payload") {
        // declared 2x3 but only 5 floats of payload
        write_file_atomic(dir / "short.apeb", bytes.substr(0, bytes.size() - 4));
        CHECK(error_code([&] { load_matrix(dir / "short.apeb"); }) == "TruncatedFile");
    }
    SUBCASE("trailing bytes") {
        write_file_atomic(dir / "long.apeb", bytes + "xx");
        CHECK(error_code([&] { load_matrix(dir / "long.apeb"); }) == "TruncatedFile");
    }
    SUBCASE("bad magic") {
        bytes[0] = 'X';
        write_file_atomic(dir / "magic.apeb", bytes);
        CHECK(error_code([&] { load_matrix(dir / "magic.apeb"); }) == "BadMagic");
    }
    SUBCASE("unsupported version") {
        bytes[4] = 9;
        write_file_atomic(dir / "ver.apeb", bytes);
        CHECK(error_code([&] { load_matrix(dir / "ver.apeb"); }) == "BadMagic");
    }
    SUBCASE("NaN payload") {
        const std::uint32_t nan_bits = 0x7FC00000u;
        std::memcpy(bytes.data() + kApebHeaderSize, &nan_bits, 4);
        write_file_atomic(dir / "nan.apeb", bytes);
        CHECK(error_code([&] { load_matrix(dir / "nan.apeb"); }) == "NonFiniteValue");
    }
    SUBCASE("zero rows") {
        std::memset(bytes.data() + 12, 0, 8);
        write_file_atomic(dir / "rows0.apeb", bytes.substr(0, kApebHeaderSize));
        CHECK(error_code([&] { load_matrix(dir / "rows0.apeb"); }) == "ShapeMismatch");
    }
}

TEST_CASE("load_matrix_normalized normalizes only when flag is unset") {
    const fs::path dir = temp_dir("loadnorm");
    EmbeddingMatrix raw(1, 2, {3.0f, 4.0f});
    save_matrix(raw, dir / "raw.apeb");
    const EmbeddingMatrix n = load_matrix_normalized(dir / "raw.apeb");
    CHECK(n.normalized);
    CHECK(n.row(0)[0] == doctest::Approx(0.6));

    SplitMix64 rng(3);
    const EmbeddingMatrix unit = oracle::random_unit_matrix(2, 5, rng);
    save_matrix(unit, dir / "unit.apeb");
    const EmbeddingMatrix same = load_matrix_normalized(dir / "unit.apeb");
    CHECK(std::memcmp(same.data.data(), unit.data.data(), unit.data.size() * sizeof(float)) == 0);
}

TEST_CASE("manifest round trip and validation") {
    const fs::path dir = temp_dir("manifest");
    EmbeddingMatrix m(4, 6);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = static_cast<float>(i + 1);
    const std::uint64_t checksum = save_matrix(m, dir / "a.apeb");

    EmbeddingManifest manifest;
    manifest.kind = "video_frames";
    manifest.entries.push_back({"vid_a", "a.apeb", 4, 6, to_hex64(checksum)});
    save_manifest(manifest, dir / "m.json");

    const EmbeddingManifest back = load_manifest(dir / "m.json");
    REQUIRE(back.entries.size() == 1);
    CHECK(back.kind == "video_frames");
    CHECK(back.entries[0].id == "vid_a");
    validate_manifest(back, dir, true);

    SUBCASE("header disagreement is rejected") {
        EmbeddingManifest bad = back;
        bad.entries[0].rows = 5;
        CHECK(error_code([&] { validate_manifest(bad, dir); }) == "ShapeMismatch");
    }
    SUBCASE("duplicate ids are rejected") {
        EmbeddingManifest bad = back;
        bad.entries.push_back(bad.entries[0]);
        CHECK(error_code([&] { validate_manifest(bad, dir); }) == "SchemaError");
    }
    SUBCASE("missing file is rejected") {
        EmbeddingManifest bad = back;
        bad.entries[0].path = "missing.apeb";
        CHECK(error_code([&] { validate_manifest(bad, dir); }) == "IoError");
    }
    SUBCASE("checksum verification") {
        EmbeddingManifest bad = back;
        bad.entries[0].checksum = "0000000000000000";
        validate_manifest(bad, dir);  // headers still fine
        CHECK(error_code([&] { validate_manifest(bad, dir, true); }) == "ChecksumMismatch");
    }
}

TEST_CASE("VideoRecord validation") {
    VideoRecord r;
    r.video_id = "v";
    CHECK(error_code([&] { r.validate(); }) == "ShapeMismatch");
    r.views.push_back(EmbeddingMatrix(1, 3, {1, 0, 0}, true));
    r.views.push_back(EmbeddingMatrix(1, 4, {1, 0, 0, 0}, true));
    CHECK(error_code([&] { r.validate(); }) == "DimMismatch");
}
