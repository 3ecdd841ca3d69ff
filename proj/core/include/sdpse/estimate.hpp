#pragma once

#include <string>
#include <vector>

#include "sdpse/observability.hpp"
#include "sdpse/pseudo.hpp"
#include "sdpse/solver.hpp"

namespace sdpse {

/// μPMU angle reference on one node.
struct Anchor {
    int node = 0;
    double angle_deg = 0.0;
};

struct EstimateOptions {
    bool repair = true;
    RepairMethod repair_method = RepairMethod::Negate;
    double efficiency = 0.98;
    SolverConfig solver;
};

struct EstimationResult {
    std::vector<Complex> voltages;  // per node, in the anchors' absolute frame
    double rank1_ratio = 0.0;
    SolveReport report;
    std::vector<Measurement> measurements;  // as solved, after repair
    std::vector<RepairEntry> repairs;
    ObservabilityReport observability;
    Residuals residuals;
    std::vector<std::string> warnings;
};

/// Observability repair, structural check, SDP solve, rank-one extraction
/// and rotation into the anchor frame. Only the first anchor of each
/// connected component constrains the solve; its reference angle sets the
/// frame. Throws UnobservableError when the set cannot pin the state
/// (including a rank-one ratio above kRankRatioReject) and SolverError on
/// numerical failure.
EstimationResult estimate(const NetworkModel& model, const std::vector<Measurement>& meas,
                          const std::vector<Anchor>& anchors, const EstimateOptions& opts = {});

/// Model-predicted readings for a voltage vector.
std::vector<double> regenerate(const NetworkModel& model, const std::vector<Measurement>& meas,
                               const std::vector<Complex>& voltages);

}  // namespace sdpse
