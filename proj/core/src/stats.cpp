#include "sdpse/stats.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "sdpse/error.hpp"

namespace sdpse {

namespace {

constexpr std::array<double, kHistogramBins + 1> kEdges{0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0,
                                                        std::numeric_limits<double>::infinity()};

QuantityStats summarize(const std::vector<double>& err) {
    QuantityStats q;
    double sum = 0.0, sq = 0.0;
    for (double e : err) {
        sum += e;
        sq += e * e;
        q.maximum = std::max(q.maximum, e);
        ++q.histogram[histogram_bin(e)];
    }
    const double n = static_cast<double>(err.size());
    q.average = sum / n;
    q.rms = std::sqrt(sq / n);
    return q;
}

nlohmann::ordered_json to_json(const QuantityStats& q) {
    nlohmann::ordered_json h = nlohmann::ordered_json::array();
    for (int b = 0; b < kHistogramBins; ++b) h.push_back({{"bin", bin_label(b)}, {"count", q.histogram[b]}});
    return {{"rms", q.rms}, {"average", q.average}, {"maximum", q.maximum}, {"histogram", h}};
}

}  // namespace

int histogram_bin(double e) {
    for (int b = 0; b < kHistogramBins; ++b)
        if (e < kEdges[b + 1]) return b;
    return kHistogramBins - 1;
}

std::string bin_label(int bin) {
    auto edge = [](double v) {
        if (std::isinf(v)) return std::string("inf");
        if (v == 0.0) return std::string("0");
        if (v == 1.0) return std::string("1");
        std::ostringstream os;
        os << "1e" << static_cast<int>(std::lround(std::log10(v)));
        return os.str();
    };
    return "[" + edge(kEdges[bin]) + "," + edge(kEdges[bin + 1]) + ")";
}

double wrap_degrees(double d) {
    double w = std::fmod(d, 360.0);
    if (w <= -180.0) w += 360.0;
    if (w > 180.0) w -= 360.0;
    return w;
}

ErrorStats compute_error_stats(const std::vector<Complex>& estimate, const std::vector<Complex>& truth) {
    if (estimate.size() != truth.size())
        throw ValidationError("estimate has " + std::to_string(estimate.size()) + " nodes, truth has " +
                              std::to_string(truth.size()));
    if (truth.empty()) throw ValidationError("no nodes to compare");
    std::vector<double> em, ea;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        em.push_back(std::abs(std::abs(estimate[i]) - std::abs(truth[i])));
        const double d = (std::arg(estimate[i]) - std::arg(truth[i])) * 180.0 / std::numbers::pi;
        ea.push_back(std::abs(wrap_degrees(d)));
    }
    return ErrorStats{summarize(em), summarize(ea), static_cast<int>(truth.size())};
}

std::string stats_to_json(const ErrorStats& s) {
    nlohmann::ordered_json j{{"nodes", s.nodes}, {"vmag_pu", to_json(s.vmag)}, {"angle_deg", to_json(s.angle)}};
    return j.dump(2) + "\n";
}

std::string histogram_csv(const ErrorStats& s) {
    std::ostringstream os;
    os << "bin,vmag_count,angle_count\n";
    for (int b = 0; b < kHistogramBins; ++b)
        os << '"' << bin_label(b) << "\"," << s.vmag.histogram[b] << ',' << s.angle.histogram[b] << '\n';
    return os.str();
}

}  // namespace sdpse
