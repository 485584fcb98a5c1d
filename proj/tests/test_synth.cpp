#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rose/dataset.hpp"
#include "rose/synth.hpp"
#include "fingerprint_oracles.hpp"

using namespace rose;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("orientation_field basics") {
    SECTION("no points: constant background angle") {
        const auto theta = orientation_field({}, {}, 32, 32, 0.7);
        for (double v : theta.values) CHECK(v == Catch::Approx(0.7).margin(1e-12));
    }

    SECTION("one core: half-arg geometry") {
        const auto theta = orientation_field({{16, 16}}, {}, 32, 32, 0.0);
        // directly to the right of the core: arg = 0
        CHECK(theta.at(0, 16, 20) == Catch::Approx(0.0).margin(1e-12));
        // directly above (smaller row): arg = pi/2, so theta = pi/4
        CHECK(theta.at(0, 12, 16) == Catch::Approx(testutil::kPi / 4).margin(1e-12));
        // directly below: arg = -pi/2 -> -pi/4, wrapped into [0, pi)
        CHECK(theta.at(0, 20, 16) == Catch::Approx(3 * testutil::kPi / 4).margin(1e-12));
        // values wrapped into [0, pi)
        for (double v : theta.values) {
            CHECK(v >= 0.0);
            CHECK(v < testutil::kPi);
        }
    }

    SECTION("point outside the image is rejected") {
        CHECK_THROWS_AS(orientation_field({{40, 10}}, {}, 32, 32), std::invalid_argument);
    }

    SECTION("pixel exactly on a point borrows a neighbor") {
        const auto theta = orientation_field({{16, 16}}, {}, 32, 32, 0.0);
        CHECK(std::isfinite(theta.at(0, 16, 16)));
        CHECK(theta.at(0, 16, 16) == theta.at(0, 16, 17));
    }
}

TEST_CASE("Poincare indices of planted singular points") {
    const std::vector<Point> cores = {{40, 44}};
    const std::vector<Point> deltas = {{88, 84}};
    const auto theta = orientation_field(cores, deltas, 128, 128, 0.4);

    CHECK_THAT(testutil::poincare_index(theta, 40, 44),
               Catch::Matchers::WithinAbs(0.5, 0.05));
    CHECK_THAT(testutil::poincare_index(theta, 88, 84),
               Catch::Matchers::WithinAbs(-0.5, 0.05));
    // far from both points the loop winds nothing
    CHECK_THAT(testutil::poincare_index(theta, 20, 100),
               Catch::Matchers::WithinAbs(0.0, 0.05));
}

TEST_CASE("render is deterministic and respects the spec") {
    SynthSpec spec;
    spec.seed = 77;
    const auto a = render(spec);
    const auto b = render(spec);
    CHECK(a.image.values == b.image.values);
    REQUIRE(a.annotation.cores.size() == 1);
    REQUIRE(a.annotation.deltas.size() == 1);
    CHECK(a.annotation.cores[0].x == b.annotation.cores[0].x);

    for (float v : a.image.values) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }

    SECTION("no singular points: plain parallel ridges, empty annotation") {
        SynthSpec flat;
        flat.n_cores = 0;
        flat.n_deltas = 0;
        flat.seed = 3;
        const auto r = render(flat);
        CHECK(r.annotation.cores.empty());
        CHECK(r.annotation.deltas.empty());
        // constant field
        const double t0 = r.orientation.at(0, 0, 0);
        for (double v : r.orientation.values) CHECK(v == Catch::Approx(t0).margin(1e-12));
    }

    SECTION("impossible spacing is a structural error") {
        SynthSpec bad;
        bad.size = 112;  // margin 48 leaves a 16x16 box
        bad.n_cores = 1;
        bad.n_deltas = 1;  // min separation 32 cannot fit
        CHECK_THROWS_AS(render(bad), std::invalid_argument);
    }

    SECTION("spec validation") {
        SynthSpec bad;
        bad.size = 100;
        CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
        SynthSpec m;
        m.margin = 70;
        m.size = 128;
        CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    }
}

TEST_CASE("rendered ridges follow the orientation field") {
    SynthSpec spec;
    spec.seed = 5;
    const auto r = render(spec);

    std::vector<Point> pts = r.annotation.cores;
    pts.insert(pts.end(), r.annotation.deltas.begin(), r.annotation.deltas.end());
    const auto agg = testutil::structure_tensor_agreement(r.image, r.orientation, pts);
    INFO("blocks " << agg.blocks << " within " << agg.within);
    REQUIRE(agg.blocks > 10);
    CHECK(agg.fraction() >= 0.9);
}

TEST_CASE("generate_dataset writes a loadable, margin-respecting corpus") {
    const fs::path dir = fs::temp_directory_path() / "rose_synth_test";
    fs::remove_all(dir);

    SynthSpec spec;  // 128, 1 core, 1 delta
    const std::string ann_path = generate_dataset(4, spec, 900, dir.string());

    const auto records = load_annotations(ann_path);
    REQUIRE(records.size() == 4);
    for (const auto& rec : records) {
        REQUIRE(rec.cores.size() == 1);
        REQUIRE(rec.deltas.size() == 1);
        for (const auto& p : {rec.cores[0], rec.deltas[0]}) {
            CHECK(p.x >= 48);
            CHECK(p.x <= 128 - 1 - 48);
            CHECK(p.y >= 48);
            CHECK(p.y <= 128 - 1 - 48);
        }
        CHECK(distance(rec.cores[0], rec.deltas[0]) >= spec.min_separation);
    }

    // loads through the training path with no padding needed
    const auto dataset = load_dataset(ann_path, dir.string());
    REQUIRE(dataset.size() == 4);
    for (const auto& s : dataset) {
        CHECK(s.image.height == 128);
        CHECK(s.image.width == 128);
        CHECK(s.orig_height == 128);
    }

    SECTION("byte-identical across reruns with the same seed") {
        const fs::path dir2 = fs::temp_directory_path() / "rose_synth_test2";
        fs::remove_all(dir2);
        generate_dataset(4, spec, 900, dir2.string());
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto other = dir2 / entry.path().filename();
            REQUIRE(fs::exists(other));
            CHECK(read_bytes(entry.path()) == read_bytes(other));
        }
    }

    SECTION("count 0 gives an empty annotation array and nothing else") {
        const fs::path dir0 = fs::temp_directory_path() / "rose_synth_test0";
        fs::remove_all(dir0);
        const std::string ann0 = generate_dataset(0, spec, 1, dir0.string());
        CHECK(load_annotations(ann0).empty());
        int files = 0;
        for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir0)) ++files;
        CHECK(files == 1);  // just annotations.json
    }
}

TEST_CASE("every planted point in a generated corpus has the right index") {
    SynthSpec spec;
    for (int i = 0; i < 3; ++i) {
        SynthSpec s = spec;
        s.seed = 400 + static_cast<std::uint64_t>(i);
        const auto r = render(s);
        for (const auto& c : r.annotation.cores)
            CHECK_THAT(testutil::poincare_index(r.orientation, c.x, c.y),
                       Catch::Matchers::WithinAbs(0.5, 0.05));
        for (const auto& d : r.annotation.deltas)
            CHECK_THAT(testutil::poincare_index(r.orientation, d.x, d.y),
                       Catch::Matchers::WithinAbs(-0.5, 0.05));
    }
}
