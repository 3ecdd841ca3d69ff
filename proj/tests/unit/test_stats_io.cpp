#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include <json.hpp>

#include <sdpse/error.hpp>
#include <sdpse/io.hpp>
#include <sdpse/stats.hpp>

#include "fixtures.hpp"

using namespace sdpse;

TEST_CASE("identical states give zero statistics") {
    const auto m = fixtures::radial_feeder(20, 1);
    const auto v = fixtures::smooth_state(m, 1);
    const auto s = compute_error_stats(v, v);
    CHECK(s.vmag.rms == 0.0);
    CHECK(s.vmag.average == 0.0);
    CHECK(s.vmag.maximum == 0.0);
    CHECK(s.angle.maximum == 0.0);
    CHECK(s.vmag.histogram[0] == 20);
    CHECK(s.nodes == 20);
}

TEST_CASE("one node off by 0.01 among 100") {
    std::vector<Complex> truth(100, Complex(1.0, 0.0)), est = truth;
    est[37] = Complex(1.01, 0.0);
    const auto s = compute_error_stats(est, truth);
    CHECK(s.vmag.maximum == doctest::Approx(0.01));
    CHECK(s.vmag.average == doctest::Approx(1e-4));
    CHECK(s.vmag.rms == doctest::Approx(std::sqrt(1e-4 / 100)));
    CHECK(s.vmag.histogram[histogram_bin(0.01)] == 1);
    CHECK(s.vmag.histogram[0] == 99);
    long sum = 0;
    for (long c : s.vmag.histogram) sum += c;
    CHECK(sum == 100);
}

TEST_CASE("decade bins") {
    CHECK(histogram_bin(0.0) == 0);
    CHECK(histogram_bin(9.9e-7) == 0);
    CHECK(histogram_bin(1e-6) == 1);
    CHECK(histogram_bin(5e-3) == 4);
    CHECK(histogram_bin(0.5) == 6);
    CHECK(histogram_bin(3.0) == 7);
    CHECK(bin_label(0) == "[0,1e-6)");
    CHECK(bin_label(6) == "[1e-1,1)");
    CHECK(bin_label(7) == "[1,inf)");
}

TEST_CASE("angle errors wrap into (-180, 180]") {
    CHECK(wrap_degrees(190.0) == doctest::Approx(-170.0));
    CHECK(wrap_degrees(-180.0) == doctest::Approx(180.0));
    CHECK(wrap_degrees(180.0) == doctest::Approx(180.0));
    CHECK(wrap_degrees(-359.0) == doctest::Approx(1.0));
    const std::vector<Complex> truth{std::polar(1.0, 179.5 * std::numbers::pi / 180.0)};
    const std::vector<Complex> est{std::polar(1.0, -179.5 * std::numbers::pi / 180.0)};
    CHECK(compute_error_stats(est, truth).angle.maximum == doctest::Approx(1.0));
}

TEST_CASE("statistics layout") {
    std::vector<Complex> truth(4, Complex(1.0, 0.0)), est = truth;
    est[1] = Complex(0.99, 0.0);
    const auto s = compute_error_stats(est, truth);
    const auto j = nlohmann::json::parse(stats_to_json(s));
    for (const char* q : {"vmag_pu", "angle_deg"}) {
        CHECK(j[q].contains("rms"));
        CHECK(j[q].contains("average"));
        CHECK(j[q].contains("maximum"));
        CHECK(j[q]["histogram"].size() == kHistogramBins);
    }
    const auto csv = histogram_csv(s);
    CHECK(csv.rfind("bin,vmag_count,angle_count\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == kHistogramBins + 1);
    CHECK_THROWS_AS(compute_error_stats(est, {Complex(1, 0)}), ValidationError);
}

TEST_CASE("measurement file round trip") {
    const auto m = fixtures::ieee13_like();
    const auto meas = synthesize(m, stack_state(fixtures::smooth_state(m, 2)), one_sided_placement(m),
                                 NoiseSpec::level(3, 4));
    const auto text = measurements_to_json(m, meas);
    const auto back = parse_measurements(m, text);
    CHECK(back == meas);
    CHECK(measurements_to_json(m, back) == text);
    CHECK_THROWS_AS(parse_measurements(m, R"([{"kind":"Vmag","bus":"650","phase":"A","value":1,"sigma":0.01,"extra":1}])"),
                    ValidationError);
    CHECK_THROWS_AS(parse_measurements(m, R"([{"kind":"Vmag","bus":"nowhere","phase":"A","value":1,"sigma":0.01}])"),
                    ValidationError);
    CHECK_THROWS_AS(parse_measurements(m, R"([{"kind":"P_flow","bus":"650","phase":"A","value":1,"sigma":0.01}])"),
                    ValidationError);
}

TEST_CASE("state file round trip") {
    const auto m = fixtures::ieee13_like();
    const auto v = fixtures::smooth_state(m, 3);
    const auto back = parse_state(m, state_to_json(m, v));
    for (int k = 0; k < m.node_count(); ++k) CHECK(std::abs(back[k] - v[k]) < 1e-12);
    auto j = nlohmann::json::parse(state_to_json(m, v));
    j.erase(j.size() - 1);
    CHECK_THROWS_AS(parse_state(m, j.dump()), ValidationError);
}

TEST_CASE("anchor file round trip") {
    const auto m = fixtures::ieee13_like();
    const std::vector<Anchor> a{{0, 0.0}, {1, -120.0}};
    const auto back = parse_anchors(m, anchors_to_json(m, a));
    REQUIRE(back.size() == 2);
    CHECK(back[1].node == 1);
    CHECK(back[1].angle_deg == -120.0);
}

TEST_CASE("files") {
    const auto path = (std::filesystem::temp_directory_path() / "sdpse_io_test.txt").string();
    write_text_file(path, "abc\n");
    CHECK(read_text_file(path) == "abc\n");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_text_file(path), ValidationError);
}
