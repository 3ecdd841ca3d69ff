#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sdpse/measurement.hpp"

namespace sdpse {

enum class Verdict { Observable, Repairable, Unobservable };
std::string_view to_string(Verdict v);

struct RedundancyPoint {
    enum class Kind { Node, Branch } kind;
    int index;  // node index or branch index
};

struct ObservabilityReport {
    long long distinct_vars = 0;  // 3N' + 4M'
    long long ceiling = 0;        // N' + 2M'
    long long measurement_count = 0;
    long long deductions = 0;
    long long independent_eqs_available = 0;
    std::vector<RedundancyPoint> redundancy_points;
    /// Directed branch ends (l, m): flows read at l, nothing at m.
    std::vector<std::pair<int, int>> one_sided_ends;
    /// Nodes whose |V|² appears in no reading, even after far-end repair.
    std::vector<int> unsupported_nodes;
    /// Closed branches whose cross terms appear in no reading.
    std::vector<int> unsupported_branches;
    Verdict verdict = Verdict::Observable;
};

/// Structural analysis from the coefficient supports of the readings.
ObservabilityReport analyze(const NetworkModel& model, const std::vector<Measurement>& meas);

std::string report_to_json(const NetworkModel& model, const ObservabilityReport& r);

}  // namespace sdpse
