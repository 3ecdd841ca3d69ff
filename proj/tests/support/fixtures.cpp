#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <sdpse/rng.hpp>

namespace fixtures {

using sdpse::Branch;
using sdpse::BranchSpec;
using sdpse::Bus;
using sdpse::Phase;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Uniform {
    sdpse::CounterRng rng;
    double operator()(double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }
    int index(int n) { return static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n)); }
};

std::vector<Phase> phases(const std::string& s) {
    std::vector<Phase> out;
    for (char c : s) out.push_back(sdpse::parse_phase(std::string(1, c)));
    return out;
}

// Self branch per shared phase plus a weak coupling branch between every
// pair of distinct phases across the segment. Coupled nodes sit 120 degrees
// apart, so coupling impedance is kept large to hold those flows near 1 pu.
void segment(std::vector<BranchSpec>& out, const std::string& a, const std::string& b, const std::string& ph,
             double len, double shunt = 0.0, bool sw = false) {
    const auto p = phases(ph);
    for (Phase s : p) {
        const std::string id = a + "-" + b + "." + sdpse::phase_letter(s);
        out.push_back({id, a, s, b, s, 0.012 * len, 0.025 * len, shunt, sw, true});
    }
    for (Phase s : p)
        for (Phase t : p) {
            if (s == t) continue;
            const std::string id = a + "-" + b + "." + sdpse::phase_letter(s) + sdpse::phase_letter(t);
            const double k = std::max(len, 1.0);
            out.push_back({id, a, s, b, t, 1.0 * k, 2.0 * k, 0.0, sw, true});
        }
}

}  // namespace

NetworkModel ieee13_like() {
    std::vector<Bus> buses;
    auto bus = [&](const char* id, const char* ph, bool head = false) {
        buses.push_back(Bus{id, phases(ph), head, head ? 115.0 : 4.16});
    };
    bus("sourcebus", "ABC", true);
    bus("650", "ABC");
    bus("rg60", "ABC");
    bus("632", "ABC");
    bus("633", "ABC");
    bus("634", "ABC");
    bus("645", "BC");
    bus("646", "BC");
    bus("671", "ABC");
    bus("680", "ABC");
    bus("684", "AC");
    bus("611", "C");
    bus("652", "A");
    bus("692", "ABC");
    bus("675", "ABC");

    std::vector<BranchSpec> br;
    segment(br, "sourcebus", "650", "ABC", 0.2);
    segment(br, "650", "rg60", "ABC", 0.1);
    segment(br, "rg60", "632", "ABC", 2.0, 2e-4);
    segment(br, "632", "633", "ABC", 0.5);
    segment(br, "633", "634", "ABC", 0.3);
    segment(br, "632", "645", "BC", 0.5);
    segment(br, "645", "646", "BC", 0.3);
    segment(br, "632", "671", "ABC", 2.0, 2e-4);
    segment(br, "671", "680", "ABC", 1.0);
    segment(br, "671", "684", "AC", 0.3);
    segment(br, "684", "611", "C", 0.3);
    segment(br, "684", "652", "A", 0.8);
    segment(br, "671", "692", "ABC", 0.05, 0.0, true);
    segment(br, "692", "675", "ABC", 0.5);
    return NetworkModel::build(std::move(buses), br, 5.0);
}

NetworkModel radial_feeder(int n, std::uint64_t seed) {
    Uniform u{sdpse::CounterRng(sdpse::derive_seed(seed, "radial_feeder"))};
    std::vector<Bus> buses;
    auto name = [](int i) {
        std::string s = std::to_string(i);
        return "b" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
    };
    for (int i = 0; i < n; ++i) buses.push_back(Bus{name(i), {Phase::A}, i == 0, 12.47});
    std::vector<BranchSpec> br;
    for (int i = 1; i < n; ++i) {
        const int parent = u(0.0, 1.0) < 0.7 ? i - 1 : u.index(i);
        br.push_back({"l" + name(i).substr(1), name(parent), Phase::A, name(i), Phase::A, u(0.002, 0.01),
                      u(0.004, 0.02), 0.0, false, true});
    }
    return NetworkModel::build(std::move(buses), br, 10.0);
}

NetworkModel random_network(int n, int extra, std::uint64_t seed) {
    Uniform u{sdpse::CounterRng(sdpse::derive_seed(seed, "random_network"))};
    std::vector<Bus> buses;
    for (int i = 0; i < n; ++i) buses.push_back(Bus{"n" + std::to_string(i), {Phase::A}, i == 0, 1.0});
    std::vector<BranchSpec> br;
    std::vector<std::pair<int, int>> used;
    auto add = [&](int a, int b) {
        br.push_back({"e" + std::to_string(br.size()), buses[a].id, Phase::A, buses[b].id, Phase::A, u(0.01, 0.2),
                      u(0.02, 0.4), 0.0, false, true});
        used.emplace_back(std::min(a, b), std::max(a, b));
    };
    for (int i = 1; i < n; ++i) add(u.index(i), i);
    for (int tries = 0, added = 0; added < extra && tries < 50 * (extra + 1); ++tries) {
        const int a = u.index(n), b = u.index(n);
        if (a == b) continue;
        const std::pair<int, int> key{std::min(a, b), std::max(a, b)};
        if (std::find(used.begin(), used.end(), key) != used.end()) continue;
        add(a, b);
        ++added;
    }
    return NetworkModel::build(std::move(buses), br, 1.0);
}

std::vector<Complex> smooth_state(const NetworkModel& model, std::uint64_t seed) {
    Uniform u{sdpse::CounterRng(sdpse::derive_seed(seed, "smooth_state"))};
    const auto adj = sdpse::bus_adjacency(model);
    const int head = model.feeder_head();

    std::vector<int> order{head}, parent(model.bus_count(), -1), depth(model.bus_count(), -1);
    depth[head] = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
        for (int c : adj[order[i]])
            if (depth[c] < 0) {
                depth[c] = depth[order[i]] + 1;
                parent[c] = order[i];
                order.push_back(c);
            }
    // Per-step drop sized so the deepest bus lands near 0.94 pu.
    const double step = 0.06 / std::max(1, *std::max_element(depth.begin(), depth.end()));

    std::vector<Complex> v(model.node_count());
    auto nominal = [](Phase p) { return std::polar(1.0, -120.0 * static_cast<int>(p) * kDeg); };
    for (Phase p : model.buses()[head].phases) v[*model.node_index(head, p)] = nominal(p);
    for (std::size_t i = 1; i < order.size(); ++i) {
        const int c = order[i], b = parent[c];
        const Complex drop(step * u(0.5, 1.5), 0.5 * step * u(0.5, 1.5));
        for (Phase p : model.buses()[c].phases) {
            const auto from = model.node_index(b, p);
            const Complex base = from ? v[*from] : nominal(p);
            const Complex jitter(step * u(-0.1, 0.1), step * u(-0.1, 0.1));
            v[*model.node_index(c, p)] = base * (1.0 - drop - jitter);
        }
    }
    return v;
}

std::vector<Complex> random_state(const NetworkModel& model, std::uint64_t seed) {
    Uniform u{sdpse::CounterRng(sdpse::derive_seed(seed, "random_state"))};
    std::vector<Complex> v(model.node_count());
    for (auto& x : v) {
        const double mag = u(0.8, 1.2);
        x = std::polar(mag, u(-std::numbers::pi, std::numbers::pi));
    }
    return v;
}

std::vector<sdpse::Anchor> head_anchors(const NetworkModel& model, const std::vector<Complex>& truth) {
    std::vector<sdpse::Anchor> out;
    const int head = model.feeder_head();
    for (Phase p : model.buses()[head].phases) {
        const int k = *model.node_index(head, p);
        out.push_back({k, std::arg(truth[k]) / kDeg});
    }
    return out;
}

}  // namespace fixtures
