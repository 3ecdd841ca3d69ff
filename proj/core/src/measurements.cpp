#include "sdpse/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "sdpse/error.hpp"
#include "sdpse/rng.hpp"

namespace sdpse {

std::string_view to_string(MeasKind k) {
    switch (k) {
        case MeasKind::PInj: return "P_inj";
        case MeasKind::QInj: return "Q_inj";
        case MeasKind::PFlow: return "P_flow";
        case MeasKind::QFlow: return "Q_flow";
        case MeasKind::Vmag: return "Vmag";
    }
    return "?";
}

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::Real: return "real";
        case Provenance::Pseudo: return "pseudo";
        case Provenance::ZeroInjection: return "zero_injection";
    }
    return "?";
}

MeasKind parse_kind(std::string_view s) {
    for (auto k : {MeasKind::PInj, MeasKind::QInj, MeasKind::PFlow, MeasKind::QFlow, MeasKind::Vmag})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown measurement kind '" + std::string(s) + "'");
}

Provenance parse_provenance(std::string_view s) {
    for (auto p : {Provenance::Real, Provenance::Pseudo, Provenance::ZeroInjection})
        if (to_string(p) == s) return p;
    throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

const SymSparse& matrix_for(const MeasurementMatrixSet& set, const Measurement& m) {
    switch (m.kind) {
        case MeasKind::PInj: return set.p_inj(m.node);
        case MeasKind::QInj: return set.q_inj(m.node);
        case MeasKind::PFlow: return set.p_flow(m.node, m.to_node);
        case MeasKind::QFlow: return set.q_flow(m.node, m.to_node);
        case MeasKind::Vmag: return set.vsq(m.node);
    }
    throw ValidationError("bad measurement kind");
}

void validate_measurements(const NetworkModel& model, const std::vector<Measurement>& meas) {
    const int n = model.node_count();
    for (std::size_t i = 0; i < meas.size(); ++i) {
        const auto& m = meas[i];
        const std::string where = "measurement " + std::to_string(i) + ": ";
        if (m.node < 0 || m.node >= n) throw ValidationError(where + "node out of range");
        if (!(m.sigma > 0.0) || !std::isfinite(m.sigma))
            throw ValidationError(where + "sigma must be positive");
        if (!std::isfinite(m.value)) throw ValidationError(where + "value is not finite");
        if (is_flow(m.kind)) {
            if (m.to_node < 0 || m.to_node >= n) throw ValidationError(where + "to-node out of range");
            if (!model.branch_between(m.node, m.to_node))
                throw ValidationError(where + "no closed branch " + model.node_label(m.node) + " - " +
                                      model.node_label(m.to_node));
        }
        if (m.kind == MeasKind::Vmag && m.value < 0.0)
            throw ValidationError(where + "negative voltage magnitude");
    }
}

double predict(const MeasurementMatrixSet& set, const Measurement& m, const Eigen::VectorXd& x) {
    const double v = eval_measurement(matrix_for(set, m), x);
    return m.kind == MeasKind::Vmag ? std::sqrt(std::max(v, 0.0)) : v;
}

std::string measurement_label(const NetworkModel& model, const Measurement& m) {
    std::string s(to_string(m.kind));
    s += '(' + model.node_label(m.node);
    if (is_flow(m.kind)) s += "->" + model.node_label(m.to_node);
    return s + ')';
}

}  // namespace sdpse

namespace sdpse {

std::vector<Site> full_placement(const NetworkModel& model) {
    std::vector<Site> out;
    for (int k = 0; k < model.node_count(); ++k) {
        out.push_back({MeasKind::Vmag, k, -1});
        out.push_back({MeasKind::PInj, k, -1});
        out.push_back({MeasKind::QInj, k, -1});
    }
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        for (auto [l, m] : {std::pair{br.from_node, br.to_node}, std::pair{br.to_node, br.from_node}}) {
            out.push_back({MeasKind::PFlow, l, m});
            out.push_back({MeasKind::QFlow, l, m});
        }
    }
    return out;
}

std::vector<Site> one_sided_placement(const NetworkModel& model, const std::vector<int>& vmag_nodes) {
    std::vector<Site> out;
    if (vmag_nodes.empty()) {
        for (int k = 0; k < model.node_count(); ++k) out.push_back({MeasKind::Vmag, k, -1});
    } else {
        for (int k : vmag_nodes) out.push_back({MeasKind::Vmag, k, -1});
    }
    for (const auto& node : model.nodes())
        if (node.bus == model.feeder_head()) {
            out.push_back({MeasKind::PInj, node.index, -1});
            out.push_back({MeasKind::QInj, node.index, -1});
        }
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        out.push_back({MeasKind::PFlow, br.from_node, br.to_node});
        out.push_back({MeasKind::QFlow, br.from_node, br.to_node});
    }
    return out;
}

NoiseSpec NoiseSpec::level(int lvl, std::uint64_t seed) {
    if (lvl < 0 || lvl > 4) throw ValidationError("noise level must be between 0 and 4");
    NoiseSpec s;
    s.seed = seed;
    if (lvl > 0) {
        const double scale = std::pow(10.0, lvl - 1);
        s.injection = 1.5e-5 * scale;
        s.flow = 2e-5 * scale;
        s.vmag = 1e-5 * scale;
        s.recorded_injection = s.injection;
        s.recorded_flow = s.flow;
        s.recorded_vmag = s.vmag;
    }
    return s;
}

std::vector<Measurement> synthesize(const NetworkModel& model, const Eigen::VectorXd& x_true,
                                    const std::vector<Site>& sites, const NoiseSpec& noise) {
    if (x_true.size() != 2 * model.node_count()) throw ValidationError("state size does not match network");
    const auto set = MeasurementMatrixSet::build(model);
    CounterRng rng(derive_seed(noise.seed, "synthesize"));
    std::vector<Measurement> out;
    out.reserve(sites.size());
    for (const auto& s : sites) {
        Measurement m;
        m.kind = s.kind;
        m.node = s.node;
        m.to_node = is_flow(s.kind) ? s.to_node : -1;
        double sd = 0.0;
        if (is_injection(s.kind)) {
            sd = noise.injection;
            m.sigma = noise.recorded_injection;
        } else if (is_flow(s.kind)) {
            sd = noise.flow;
            m.sigma = noise.recorded_flow;
        } else {
            sd = noise.vmag;
            m.sigma = noise.recorded_vmag;
        }
        m.value = 0.0;
        validate_measurements(model, {m});
        m.value = predict(set, m, x_true);
        const double g = rng.gaussian();
        if (sd > 0.0) m.value += sd * g;
        out.push_back(m);
    }
    return out;
}

std::vector<Measurement> add_zero_injection(const NetworkModel& model, const std::vector<int>& buses,
                                            double sigma) {
    std::vector<Measurement> out;
    for (int b : buses) {
        if (b < 0 || b >= model.bus_count()) throw ValidationError("zero-injection bus out of range");
        for (const auto& node : model.nodes())
            if (node.bus == b)
                for (auto k : {MeasKind::PInj, MeasKind::QInj})
                    out.push_back(Measurement{k, node.index, -1, 0.0, sigma, Provenance::ZeroInjection});
    }
    return out;
}

}  // namespace sdpse
