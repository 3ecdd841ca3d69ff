#include "sdpse/pseudo.hpp"

#include <cmath>
#include <map>

#include "sdpse/error.hpp"

namespace sdpse {

namespace {

const Branch& branch_of(const NetworkModel& model, const Measurement& m) {
    if (!is_flow(m.kind)) throw ValidationError("pseudo measurements derive from flow readings");
    const auto b = model.branch_between(m.node, m.to_node);
    if (!b) throw ValidationError("flow reading does not match a closed branch");
    return model.branches()[*b];
}

Measurement far_end(const Measurement& near, double value, double sigma) {
    Measurement m = near;
    std::swap(m.node, m.to_node);
    m.value = value;
    m.sigma = sigma;
    m.provenance = Provenance::Pseudo;
    return m;
}

}  // namespace

Measurement pseudo_negate(const NetworkModel& model, const Measurement& near) {
    const auto& br = branch_of(model, near);
    const double param = near.kind == MeasKind::PFlow ? br.r : br.x;
    const double sigma = param == 0.0 ? near.sigma : kPseudoSigmaFactor * near.sigma;
    return far_end(near, -near.value, sigma);
}

Measurement pseudo_efficiency(const NetworkModel& model, const Measurement& near_p, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("efficiency must lie in (0, 1]");
    branch_of(model, near_p);
    if (near_p.kind != MeasKind::PFlow) throw ValidationError("efficiency rule applies to active flow");
    const double v = near_p.value >= 0.0 ? -near_p.value / eta : -eta * near_p.value;
    return far_end(near_p, v, kPseudoSigmaFactor * near_p.sigma);
}

double analytic_far_end(const AnalyticInputs& in) {
    const double base = in.reactive ? in.q : in.p;
    return -base - in.coef * (in.p * in.p + in.q * in.q) / (in.v * in.v);
}

std::optional<double> analytic_variance_bound(const AnalyticInputs& in) {
    const double vlo = in.v - 3.0 * in.sigma_v;
    if (!(vlo > 0.0)) return std::nullopt;
    const double vhi = in.v + 3.0 * in.sigma_v;
    const double ap = std::abs(in.p), aq = std::abs(in.q);
    const double sp = in.sigma_p, sq = in.sigma_q;

    // Second moments of the squared flows and of 1/|V|².
    const double e_p2 = (ap + 3.0 * sp) * (ap + 3.0 * sp);
    const double e_q2 = (aq + 3.0 * sq) * (aq + 3.0 * sq);
    const double var_p2 = 2.0 * std::pow(sp, 4) + 4.0 * sp * sp * e_p2;
    const double var_q2 = 2.0 * std::pow(sq, 4) + 4.0 * sq * sq * e_q2;
    const double cov = std::max(0.0, e_p2 * e_q2 - std::pow(std::max(0.0, ap - 3.0 * sp), 2) *
                                                      std::pow(std::max(0.0, aq - 3.0 * sq), 2));
    const double e_u = 1.0 / (vlo * vlo);
    const double var_u = std::max(0.0, 1.0 / std::pow(vlo, 4) - 1.0 / std::pow(vhi, 4));

    // S = P² + Q² and U = 1/|V|² are independent.
    const double e_s = e_p2 + e_q2;
    const double var_s = var_p2 + var_q2 + 2.0 * cov;
    const double var_su = var_s * var_u + var_s * e_u * e_u + e_s * e_s * var_u;

    const double sd_base = in.reactive ? sq : sp;
    const double sd = sd_base + std::abs(in.coef) * std::sqrt(var_su);
    return sd * sd;
}

Measurement pseudo_analytic(const NetworkModel& model, const Measurement& near_p, const Measurement& near_q,
                            const Measurement* vmag, bool reactive) {
    const auto& br = branch_of(model, near_p);
    if (near_p.kind != MeasKind::PFlow || near_q.kind != MeasKind::QFlow || near_q.node != near_p.node ||
        near_q.to_node != near_p.to_node)
        throw ValidationError("analytic rule needs P and Q at the same branch end");
    AnalyticInputs in;
    in.p = near_p.value;
    in.sigma_p = near_p.sigma;
    in.q = near_q.value;
    in.sigma_q = near_q.sigma;
    in.coef = reactive ? br.x : br.r;
    in.reactive = reactive;
    if (vmag) {
        in.v = vmag->value;
        in.sigma_v = vmag->sigma;
    }
    const auto& base = reactive ? near_q : near_p;
    double sigma = kPseudoSigmaFactor * base.sigma;
    if (vmag) {
        if (auto var = analytic_variance_bound(in)) sigma = std::sqrt(*var);
    }
    if (!vmag) in.v = 1.0;
    const double value = in.v > 0.0 ? analytic_far_end(in) : -base.value;
    return far_end(base, value, sigma);
}

std::string_view to_string(RepairMethod m) {
    switch (m) {
        case RepairMethod::Negate: return "negate";
        case RepairMethod::Efficiency: return "efficiency";
        case RepairMethod::Analytic: return "analytic";
    }
    return "?";
}

RepairMethod parse_repair_method(std::string_view s) {
    for (auto m : {RepairMethod::Negate, RepairMethod::Efficiency, RepairMethod::Analytic})
        if (to_string(m) == s) return m;
    throw ValidationError("unknown repair method '" + std::string(s) + "'");
}

RepairResult repair_observability(const NetworkModel& model, const std::vector<Measurement>& meas,
                                  RepairMethod method, double eta) {
    validate_measurements(model, meas);
    RepairResult out{meas, {}};
    // (node, to_node, kind) -> first reading
    std::map<std::tuple<int, int, MeasKind>, const Measurement*> flows;
    std::map<int, const Measurement*> vmag;
    for (const auto& m : meas) {
        if (is_flow(m.kind)) flows.emplace(std::tuple{m.node, m.to_node, m.kind}, &m);
        if (m.kind == MeasKind::Vmag && m.provenance == Provenance::Real) vmag.emplace(m.node, &m);
    }
    auto find = [&](int l, int m, MeasKind k) -> const Measurement* {
        auto it = flows.find({l, m, k});
        return it == flows.end() ? nullptr : it->second;
    };

    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        const int ends[2][2] = {{br.from_node, br.to_node}, {br.to_node, br.from_node}};
        for (const auto& e : ends) {
            const int l = e[0], m = e[1];
            const auto* p = find(l, m, MeasKind::PFlow);
            const auto* q = find(l, m, MeasKind::QFlow);
            if (!p && !q) continue;
            if (find(m, l, MeasKind::PFlow) || find(m, l, MeasKind::QFlow)) continue;

            // The reactive relation is the exact one on a purely resistive line.
            bool reactive = br.x == 0.0 && br.r != 0.0;
            if (reactive && !q) reactive = false;
            if (!reactive && !p) reactive = true;

            RepairEntry entry;
            entry.branch = br.id;
            entry.method = method;
            const Measurement* vm = nullptr;
            if (auto it = vmag.find(l); it != vmag.end()) vm = it->second;
            switch (method) {
                case RepairMethod::Negate:
                    entry.added = pseudo_negate(model, reactive ? *q : *p);
                    break;
                case RepairMethod::Efficiency:
                    if (reactive) {
                        entry.added = pseudo_negate(model, *q);
                        entry.note = "reactive target uses negation";
                    } else {
                        entry.added = pseudo_efficiency(model, *p, eta);
                    }
                    break;
                case RepairMethod::Analytic:
                    if (p && q) {
                        entry.added = pseudo_analytic(model, *p, *q, vm, reactive);
                        if (!vm) entry.note = "no voltage reading, |V| = 1 assumed";
                    } else {
                        entry.added = pseudo_negate(model, reactive ? *q : *p);
                        entry.note = "one of P/Q missing, fell back to negation";
                    }
                    break;
            }
            out.measurements.push_back(entry.added);
            out.log.push_back(std::move(entry));
            break;
        }
    }
    return out;
}

}  // namespace sdpse
