#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sdpse/measurement.hpp"
#include "sdpse/sdp_matrices.hpp"

namespace sdpse {

/// One weighted term (z - Tr(A W))² / sigma².
struct ProblemTerm {
    SymSparse a;
    double z = 0.0;
    double sigma = 1.0;
    int measurement = -1;  // index into the measurement list it came from
};

/// minimize Σ (z_i - Tr(A_i W))²/σ_i² over W ⪰ 0 with the imaginary part of
/// every anchor node pinned to zero.
struct SdpProblem {
    int dim = 0;  // 2N'
    std::vector<ProblemTerm> terms;
    std::vector<int> anchors;  // node indices
};

/// Builds the problem from readings. Vmag readings enter as |V|² with
/// sigma 2|V|σ. Throws ValidationError on bad references or sigma <= 0 and
/// UnobservableError if a connected node component has no anchor.
SdpProblem assemble_problem(const NetworkModel& model, const MeasurementMatrixSet& set,
                            const std::vector<Measurement>& meas, const std::vector<int>& anchors);

struct SolverConfig {
    int max_iterations = 200;
    double convergence_tol = 1e-9;
    double barrier_reduction = 0.2;
    std::optional<Eigen::MatrixXd> warm_start;  // identity when empty
    /// Refine a near rank-one result by least squares on its factor. The
    /// refined W replaces the relaxed one only if it fits better.
    bool polish = true;
};

enum class SolveStatus { Converged, MaxIter, NumericalFailure };
std::string_view to_string(SolveStatus s);

struct SolveReport {
    Eigen::MatrixXd w;
    double objective = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
    double kkt_residual = 0.0;
    /// λ2/λ1 of the relaxed solution, before any rank-one refinement.
    double relaxed_rank1_ratio = 0.0;
    bool polished = false;
    /// Objective at the end of each centering phase.
    std::vector<double> objective_history;
};

class SdpSolver {
  public:
    virtual ~SdpSolver() = default;
    virtual SolveReport solve(const SdpProblem& problem, const SolverConfig& config) const = 0;
};

/// Primal log-barrier path following with Newton centering steps. Newton
/// systems are solved in the space of measurements (size m) rather than
/// the space of W entries, so each step costs O(m³ + n³).
class BarrierSolver final : public SdpSolver {
  public:
    SolveReport solve(const SdpProblem& problem, const SolverConfig& config) const override;
};

SolveReport solve(const SdpProblem& problem, const SolverConfig& config = {});

struct Residuals {
    std::vector<double> raw;         // z_i - Tr(A_i W)
    std::vector<double> normalized;  // raw / sigma_i
};

Residuals compute_residuals(const SdpProblem& problem, const Eigen::MatrixXd& w);

double objective_value(const SdpProblem& problem, const Eigen::MatrixXd& w);

}  // namespace sdpse
