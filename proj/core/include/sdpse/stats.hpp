#pragma once

#include <array>
#include <string>
#include <vector>

#include "sdpse/network.hpp"

namespace sdpse {

/// Decade bins of absolute error: [0,1e-6), [1e-6,1e-5), ..., [1e-1,1), [1,inf).
inline constexpr int kHistogramBins = 8;

struct QuantityStats {
    double rms = 0.0;
    double average = 0.0;
    double maximum = 0.0;
    std::array<long, kHistogramBins> histogram{};
};

/// Absolute-error statistics over nodes. Vmag in pu, angle in degrees.
struct ErrorStats {
    QuantityStats vmag;
    QuantityStats angle;
    int nodes = 0;
};

int histogram_bin(double abs_error);
std::string bin_label(int bin);

/// Wraps an angle difference into (-180, 180].
double wrap_degrees(double d);

/// Throws ValidationError if the vectors differ in length or are empty.
ErrorStats compute_error_stats(const std::vector<Complex>& estimate, const std::vector<Complex>& truth);

std::string stats_to_json(const ErrorStats& s);
/// bin,lower,upper,vmag_count,angle_count
std::string histogram_csv(const ErrorStats& s);

}  // namespace sdpse
