#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdpse/measurement.hpp"

namespace sdpse {

inline constexpr double kPseudoSigmaFactor = 1000.0;

/// Far-end flow from the near-end reading with the line loss taken as zero.
/// Sigma is kept when the matching line parameter (r for P, x for Q) is zero
/// and inflated 1000x otherwise.
Measurement pseudo_negate(const NetworkModel& model, const Measurement& near);

/// Far-end active flow from a historical efficiency eta in (0, 1].
Measurement pseudo_efficiency(const NetworkModel& model, const Measurement& near_p, double eta);

/// Inputs to the loss-corrected far-end estimate.
struct AnalyticInputs {
    double p = 0.0, sigma_p = 0.0;
    double q = 0.0, sigma_q = 0.0;
    double v = 1.0, sigma_v = 0.0;
    double coef = 0.0;  // r for the active flow, x for the reactive one
    bool reactive = false;
};

/// -P - r(P² + Q²)/|V|² (or the reactive analogue with x).
double analytic_far_end(const AnalyticInputs& in);

/// Upper bound on the variance of analytic_far_end under independent
/// Gaussian errors on P, Q and |V|, built from ±3σ bounds on each moment.
/// Returns nullopt when |V| - 3σ_V <= 0.
std::optional<double> analytic_variance_bound(const AnalyticInputs& in);

/// Loss-corrected far-end pseudo flow. `vmag` is the near-end magnitude
/// reading if available; |V| = 1 is assumed otherwise and the sigma falls
/// back to 1000x the near-end one.
Measurement pseudo_analytic(const NetworkModel& model, const Measurement& near_p, const Measurement& near_q,
                            const Measurement* vmag, bool reactive = false);

enum class RepairMethod { Negate, Efficiency, Analytic };
std::string_view to_string(RepairMethod m);
RepairMethod parse_repair_method(std::string_view s);

struct RepairEntry {
    std::string branch;
    Measurement added;
    RepairMethod method = RepairMethod::Negate;
    std::string note;
};

struct RepairResult {
    std::vector<Measurement> measurements;
    std::vector<RepairEntry> log;
};

/// For each closed branch with flow readings at one end only, appends one
/// far-end pseudo flow. Idempotent.
RepairResult repair_observability(const NetworkModel& model, const std::vector<Measurement>& meas,
                                  RepairMethod method, double eta = 0.98);

}  // namespace sdpse
