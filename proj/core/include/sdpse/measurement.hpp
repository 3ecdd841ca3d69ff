#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sdpse/network.hpp"
#include "sdpse/sdp_matrices.hpp"

namespace sdpse {

enum class MeasKind { PInj, QInj, PFlow, QFlow, Vmag };
enum class Provenance { Real, Pseudo, ZeroInjection };

std::string_view to_string(MeasKind k);
std::string_view to_string(Provenance p);
MeasKind parse_kind(std::string_view s);
Provenance parse_provenance(std::string_view s);

inline bool is_flow(MeasKind k) { return k == MeasKind::PFlow || k == MeasKind::QFlow; }
inline bool is_injection(MeasKind k) { return k == MeasKind::PInj || k == MeasKind::QInj; }

/// One scalar reading. Flow readings refer to the directed branch end
/// (node, to_node) and give the power drawn at `node`. Vmag readings hold
/// the magnitude; the squared value is formed at problem assembly.
struct Measurement {
    MeasKind kind = MeasKind::Vmag;
    int node = 0;
    int to_node = -1;
    double value = 0.0;
    double sigma = 1.0;
    Provenance provenance = Provenance::Real;

    friend bool operator==(const Measurement&, const Measurement&) = default;
};

/// Coefficient matrix for the quantity a measurement observes (|V|² for Vmag).
const SymSparse& matrix_for(const MeasurementMatrixSet& set, const Measurement& m);

/// Throws ValidationError if a reading references a missing node or branch
/// end, or carries a non-positive sigma.
void validate_measurements(const NetworkModel& model, const std::vector<Measurement>& meas);

/// Model-predicted value of a measurement for state x (magnitude for Vmag).
double predict(const MeasurementMatrixSet& set, const Measurement& m, const Eigen::VectorXd& x);

std::string measurement_label(const NetworkModel& model, const Measurement& m);

/// Where a reading is taken.
struct Site {
    MeasKind kind = MeasKind::Vmag;
    int node = 0;
    int to_node = -1;
};

/// Vmag, P/Q injection at every node and P/Q flow at both ends of every
/// closed branch: the 3N' + 4M' readings.
std::vector<Site> full_placement(const NetworkModel& model);

/// P/Q flow at the sending (from) end of every closed branch, P/Q injection
/// at the feeder-head nodes and Vmag at the given nodes (all nodes if empty).
std::vector<Site> one_sided_placement(const NetworkModel& model, const std::vector<int>& vmag_nodes = {});

/// Noise standard deviations per reading class, in pu. `recorded_*` is the
/// sigma written into the measurement and used for weighting.
struct NoiseSpec {
    double injection = 0.0;
    double flow = 0.0;
    double vmag = 0.0;
    double recorded_injection = 0.015;
    double recorded_flow = 0.02;
    double recorded_vmag = 0.01;
    std::uint64_t seed = 0;

    /// Levels 0..4. Level 0 draws no noise and records the default sigmas.
    static NoiseSpec level(int lvl, std::uint64_t seed);
};

/// z = exact value + N(0, sigma²), one draw per site in order. Throws
/// ValidationError for sites that reference missing nodes or branches.
std::vector<Measurement> synthesize(const NetworkModel& model, const Eigen::VectorXd& x_true,
                                    const std::vector<Site>& sites, const NoiseSpec& noise);

inline constexpr double kZeroInjectionSigma = 1e-4;

/// P_inj = Q_inj = 0 at every node of the listed buses.
std::vector<Measurement> add_zero_injection(const NetworkModel& model, const std::vector<int>& buses,
                                            double sigma = kZeroInjectionSigma);

}  // namespace sdpse
