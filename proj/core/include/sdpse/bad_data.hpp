#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sdpse/estimate.hpp"

namespace sdpse {

/// How the variance of the branch voltage-flow residual folds in the
/// voltage term. Additive treats it as an independent sum; Printed
/// subtracts it and floors the result at 1e-18.
enum class VarianceMode { Additive, Printed };

struct RedundancyResidual {
    enum class Kind { NodeP, NodeQ, Branch1, Branch2 } kind;
    int location = 0;  // node for NodeP/NodeQ, branch otherwise
    double u = 0.0;
    double sigma = 0.0;
    double normalized = 0.0;
    std::vector<int> members;  // measurement indices in the identity
    // u = Σ coefs[j] · g(z_members[j]), g squaring Vmag readings.
    std::vector<double> coefs;
    std::vector<char> squared;
    bool floored = false;      // Printed mode went non-positive
};

std::string_view to_string(RedundancyResidual::Kind k);

struct SuspectSet {
    RedundancyResidual trigger;
    std::vector<int> members;
};

struct PrefilterResult {
    std::vector<Measurement> kept;
    std::vector<std::pair<Measurement, std::string>> removed;
};

/// Drops readings that are bad on their face: non-finite values, sigma <= 0
/// and Vmag <= 0. Does not validate references.
PrefilterResult prefilter(const std::vector<Measurement>& meas);

/// Residuals of every node balance and branch identity whose signals are
/// all measured. Branch identities are used only on branches without shunt.
std::vector<RedundancyResidual> redundancy_residuals(const NetworkModel& model, const std::vector<Measurement>& meas,
                                                     VarianceMode mode = VarianceMode::Additive);

std::vector<SuspectSet> detect(const std::vector<RedundancyResidual>& residuals, double threshold = 3.0);
std::vector<SuspectSet> detect(const NetworkModel& model, const std::vector<Measurement>& meas,
                               double threshold = 3.0, VarianceMode mode = VarianceMode::Additive);

/// Value and sigma of `target` implied by the other members of `identity`.
Measurement recompute_from_identity(const NetworkModel& model, const std::vector<Measurement>& meas,
                                    const RedundancyResidual& identity, int target);

inline constexpr int kDefaultMaxCombinations = 256;

struct Identification {
    std::vector<int> culprits;  // measurement indices, one per suspect set
    EstimationResult result;
    double fit_error = 0.0;
    int combinations_evaluated = 0;
    std::vector<double> fits;  // per combination, +inf where the solve failed
};

/// Tries one hypothesised bad reading per suspect set, replaces it from its
/// identity, re-estimates and keeps the combination whose untouched readings
/// fit best. With no suspects the plain estimate is returned. Throws
/// BudgetError past max_combinations and SolverError when every solve fails.
Identification identify_and_reestimate(const NetworkModel& model, const std::vector<Measurement>& meas,
                                       const std::vector<SuspectSet>& suspects, const std::vector<Anchor>& anchors,
                                       const EstimateOptions& opts = {},
                                       int max_combinations = kDefaultMaxCombinations);

/// Weighted squared misfit of the readings not in `skip`, regenerated from
/// the estimated voltages.
double fit_error(const NetworkModel& model, const std::vector<Measurement>& meas, const std::vector<Complex>& v,
                 const std::vector<int>& skip);

std::string bad_data_report_json(const NetworkModel& model, const std::vector<Measurement>& meas,
                                 const std::vector<RedundancyResidual>& residuals,
                                 const std::vector<SuspectSet>& suspects, const Identification& id);

}  // namespace sdpse
