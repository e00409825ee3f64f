#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "flowreg/grid.hpp"
#include "flowreg/io.hpp"
#include "test_support.hpp"

using namespace flowreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("flowreg_io_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const char* name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("raw arrays round-trip bit-exactly") {
    TempDir tmp;
    const GridShape s{{5, 7}};
    const Image img = testsup::random_image(s, 7);
    write_image(tmp.file("img.raw"), img);
    const Image back = read_image(tmp.file("img.raw"));
    CHECK(back.shape == s);
    CHECK(back.values == img.values);

    const VoxelCloud cloud = testsup::random_cloud(s, 8, 2.0);
    write_cloud(tmp.file("cloud.raw"), cloud);
    const VoxelCloud cback = read_cloud(tmp.file("cloud.raw"));
    CHECK(cback.coords == cloud.coords);

    LabelMap labels = make_labels(s);
    for (std::size_t i = 0; i < labels.labels.size(); ++i)
        labels.labels[i] = static_cast<std::uint16_t>(i % 5);
    write_labels(tmp.file("labels.raw"), labels);
    CHECK(read_labels(tmp.file("labels.raw")).labels == labels.labels);
}

TEST_CASE("f32 payloads read back converted") {
    TempDir tmp;
    const GridShape s{{4, 4}};
    std::vector<double> data(16);
    for (std::size_t i = 0; i < 16; ++i) data[i] = 0.125 * static_cast<double>(i);
    write_array(tmp.file("a.raw"), ArrayInfo{s, 1, "f32", {}}, data);
    const ArrayData back = read_array(tmp.file("a.raw"));
    CHECK(back.info.dtype == "f32");
    for (std::size_t i = 0; i < 16; ++i)
        CHECK(back.values[i] == doctest::Approx(data[i]));  // exact in f32 here
}

TEST_CASE("PGM quantization contract") {
    TempDir tmp;
    Image img = make_image(GridShape{{2, 2}});
    img.values = {0.0, 1.0, 0.5, 0.25};
    write_pgm(tmp.file("q.pgm"), img, 255);
    const Image back = read_pgm(tmp.file("q.pgm"));
    CHECK(back.values[0] == doctest::Approx(0.0));
    CHECK(back.values[1] == doctest::Approx(1.0));  // value 1.0 -> byte 255 -> 1.0
    CHECK(back.values[2] == doctest::Approx(128.0 / 255.0));
    CHECK(back.values[3] == doctest::Approx(64.0 / 255.0));
}

TEST_CASE("PGM P2 and 16-bit P5 round-trip after quantization") {
    TempDir tmp;
    const Image img = testsup::random_image(GridShape{{6, 5}}, 17);
    write_pgm(tmp.file("a.pgm"), img, 255, /*binary=*/false);
    const Image a = read_pgm(tmp.file("a.pgm"));
    write_pgm(tmp.file("b.pgm"), a, 255, false);
    const Image b = read_pgm(tmp.file("b.pgm"));
    CHECK(a.values == b.values);  // stable after the first quantization

    write_pgm(tmp.file("c.pgm"), img, 65535, true);
    const Image c = read_pgm(tmp.file("c.pgm"));
    for (std::size_t i = 0; i < img.values.size(); ++i)
        CHECK(c.values[i] == doctest::Approx(img.values[i]).epsilon(1e-4));
}

TEST_CASE("truncated payloads are reported as truncation, not zero-fill") {
    TempDir tmp;
    const Image img = testsup::random_image(GridShape{{4, 4}}, 27);
    write_image(tmp.file("img.raw"), img);
    fs::resize_file(tmp.file("img.raw"), 16 * 8 - 4);
    try {
        read_image(tmp.file("img.raw"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.fault() == IoFault::truncated_payload);
    }

    write_pgm(tmp.file("img.pgm"), img);
    fs::resize_file(tmp.file("img.pgm"), fs::file_size(tmp.file("img.pgm")) - 3);
    try {
        read_pgm(tmp.file("img.pgm"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.fault() == IoFault::truncated_payload);
    }
}

TEST_CASE("malformed headers and mismatches are distinct faults") {
    TempDir tmp;
    {
        std::ofstream bad(tmp.file("bad.pgm"));
        bad << "P7 4 4 255\n";
    }
    try {
        read_pgm(tmp.file("bad.pgm"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.fault() == IoFault::malformed_header);
    }

    {
        std::ofstream side(tmp.file("arr.json"));
        side << "{\"shape\": [4, 4], \"channels\": }";  // invalid JSON
    }
    {
        std::ofstream raw(tmp.file("arr.raw"), std::ios::binary);
        raw << "xx";
    }
    try {
        read_array(tmp.file("arr.raw"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.fault() == IoFault::malformed_header);
    }

    // shape/dtype mismatch: labels expected but floats stored
    const Image img = testsup::random_image(GridShape{{4, 4}}, 37);
    write_image(tmp.file("f.raw"), img);
    try {
        read_labels(tmp.file("f.raw"));
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(e.fault() == IoFault::format_mismatch);
    }

    CHECK_THROWS_AS(read_image(tmp.file("missing.raw")), IoError);
}

TEST_CASE("model parameters round-trip with their descriptor") {
    TempDir tmp;
    std::vector<double> theta = {0.5, -1.25, 3.0, 0.0};
    nlohmann::json desc = {{"kind", "tensor"}, {"grid", {4, 4}}, {"steps", 2}, {"horizon", 1.0}};
    write_params(tmp.file("theta.raw"), theta, desc);
    const ParamsData back = read_params(tmp.file("theta.raw"));
    CHECK(back.theta == theta);
    CHECK(back.descriptor.at("kind") == "tensor");
}
