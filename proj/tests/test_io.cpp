#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "mpda/io.hpp"
#include "mpda/oracle.hpp"
#include "test_util.hpp"

using namespace mpda;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/mpda_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("field files round-trip bitwise") {
    const GridSpec g(7, 5, 1.0 / 6, 0.3, Boundary::Periodic);
    Field f = Field::zeros(g);
    f.values = test_util::random_vector(g.num_nodes(), 77);
    f.values[3] = 0.1 + 0.2;  // not exactly representable
    f.values[4] = -0.0;
    f.values[5] = 1e-308;

    const TempFile tmp("field.mpda");
    write_field(f, tmp.path);
    const Field back = read_field(tmp.path);

    CHECK(back.grid.nx == g.nx);
    CHECK(back.grid.ny == g.ny);
    CHECK(back.grid.dx == g.dx);
    CHECK(back.grid.dy == g.dy);
    CHECK(back.grid.boundary == g.boundary);
    for (std::size_t i = 0; i < f.values.size(); ++i)
        CHECK(std::bit_cast<std::uint64_t>(back.values[i]) ==
              std::bit_cast<std::uint64_t>(f.values[i]));
}

TEST_CASE("field reader rejects bad files") {
    const TempFile tmp("bad.mpda");
    {
        std::ofstream out(tmp.path, std::ios::binary);
        out << "NOTME\n4 4 1.0 1.0 dirichlet\n";
    }
    CHECK_THROWS(read_field(tmp.path));

    {
        std::ofstream out(tmp.path, std::ios::binary);
        out << "MPDA1\n4 4 1.0 1.0 dirichlet\n";  // no payload
    }
    CHECK_THROWS(read_field(tmp.path));

    CHECK_THROWS(read_field("/tmp/mpda_test_does_not_exist.mpda"));
}

TEST_CASE("observation files round-trip") {
    const GridSpec g(8, 6, 1.0, 1.0);
    ObservationSet obs;
    obs.entries.push_back({g.linear_index(0, 0), 1.25, 0.1});
    obs.entries.push_back({g.linear_index(7, 5), -0.75, 0.01});
    obs.entries.push_back({g.linear_index(3, 2), 1e-9, 2.5});

    const TempFile tmp("obs.txt");
    write_observations(obs, g, tmp.path);
    const ObservationSet back = read_observations(tmp.path, g);
    REQUIRE(back.entries.size() == obs.entries.size());
    for (std::size_t i = 0; i < obs.entries.size(); ++i) {
        CHECK(back.entries[i].node == obs.entries[i].node);
        CHECK(back.entries[i].value == obs.entries[i].value);
        CHECK(back.entries[i].noise_variance == obs.entries[i].noise_variance);
    }
}

TEST_CASE("observation reader handles comments and snapping") {
    const GridSpec g(4, 4, 1.0, 1.0);
    const TempFile tmp("obs_snap.txt");
    {
        std::ofstream out(tmp.path);
        out << "# header comment\n"
            << "\n"
            << "1 2 0.5 0.1   # trailing comment\n"
            << "2.4 0.6 1.0 0.2\n"     // snaps to (2, 1)
            << "1.5 1.5 2.0 0.3\n"     // ties go to the lower index: (1, 1)
            << "-0.4 9.7 3.0 0.4\n";   // clamps into the grid: (0, 3)
    }
    const ObservationSet obs = read_observations(tmp.path, g);
    REQUIRE(obs.entries.size() == 4);
    CHECK(obs.entries[0].node == g.linear_index(1, 2));
    CHECK(obs.entries[1].node == g.linear_index(2, 1));
    CHECK(obs.entries[2].node == g.linear_index(1, 1));
    CHECK(obs.entries[3].node == g.linear_index(0, 3));
    CHECK(obs.entries[2].value == 2.0);
}

TEST_CASE("observation reader rejects malformed records") {
    const GridSpec g(4, 4, 1.0, 1.0);
    const TempFile tmp("obs_bad.txt");
    {
        std::ofstream out(tmp.path);
        out << "1 2 0.5\n";  // missing variance
    }
    CHECK_THROWS(read_observations(tmp.path, g));
    {
        std::ofstream out(tmp.path);
        out << "1 1 0.5 0.0\n";  // nonpositive variance fails validation
    }
    CHECK_THROWS(read_observations(tmp.path, g));
}

TEST_CASE("gray rendering of a 2x2 field") {
    const GridSpec g(2, 2, 1.0, 1.0);
    const Field f(g, {0.0, 1.0, 1.0, 0.0});
    const TempFile tmp("render.pgm");
    render_field(f, tmp.path, RenderMode::Gray);
    const std::string data = slurp(tmp.path);
    const std::string header = "P5\n2 2\n255\n";
    REQUIRE(data.size() == header.size() + 4);
    CHECK(data.substr(0, header.size()) == header);
    const auto* px = reinterpret_cast<const unsigned char*>(data.data() + header.size());
    CHECK(px[0] == 0);
    CHECK(px[1] == 255);
    CHECK(px[2] == 255);
    CHECK(px[3] == 0);
}

TEST_CASE("constant fields render mid-gray") {
    const GridSpec g(3, 2, 1.0, 1.0);
    const Field f(g, std::vector<double>(6, 4.2));
    const TempFile tmp("flat.pgm");
    render_field(f, tmp.path, RenderMode::Gray);
    const std::string data = slurp(tmp.path);
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(data.size() == header.size() + 6);
    for (std::size_t i = header.size(); i < data.size(); ++i)
        CHECK(static_cast<unsigned char>(data[i]) == 128);
}

TEST_CASE("diverging rendering is symmetric around zero") {
    const GridSpec g(3, 2, 1.0, 1.0);
    const Field f(g, {-2.0, 0.0, 2.0, 0.0, 0.0, 0.0});
    const TempFile tmp("div.ppm");
    render_field(f, tmp.path, RenderMode::Diverging);
    const std::string data = slurp(tmp.path);
    const std::string header = "P6\n3 2\n255\n";
    REQUIRE(data.size() == header.size() + 18);
    const auto* px = reinterpret_cast<const unsigned char*>(data.data() + header.size());
    // full blue, white, full red
    CHECK(px[0] == 0);
    CHECK(px[1] == 0);
    CHECK(px[2] == 255);
    CHECK(px[3] == 255);
    CHECK(px[4] == 255);
    CHECK(px[5] == 255);
    CHECK(px[6] == 255);
    CHECK(px[7] == 0);
    CHECK(px[8] == 0);
}
