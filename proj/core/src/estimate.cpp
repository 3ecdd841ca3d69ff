#include "sdpse/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sdpse/error.hpp"

namespace sdpse {

EstimationResult estimate(const NetworkModel& model, const std::vector<Measurement>& meas,
                          const std::vector<Anchor>& anchors, const EstimateOptions& opts) {
    validate_measurements(model, meas);
    EstimationResult out;
    if (opts.repair) {
        auto rep = repair_observability(model, meas, opts.repair_method, opts.efficiency);
        out.measurements = std::move(rep.measurements);
        out.repairs = std::move(rep.log);
    } else {
        out.measurements = meas;
    }
    out.observability = analyze(model, out.measurements);
    if (out.observability.verdict == Verdict::Unobservable)
        throw UnobservableError("measurement set does not cover every node and branch");
    if (out.observability.verdict == Verdict::Repairable)
        throw UnobservableError(std::to_string(out.observability.one_sided_ends.size()) +
                                " branch(es) have flow readings at one end only; enable repair");

    // One constraining anchor per connected component.
    const auto comps = node_components(model);
    std::vector<int> comp_of(model.node_count());
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (int k : comps[c]) comp_of[k] = static_cast<int>(c);
    std::vector<const Anchor*> chosen(comps.size(), nullptr);
    for (const auto& a : anchors) {
        if (a.node < 0 || a.node >= model.node_count()) throw ValidationError("anchor node out of range");
        auto& slot = chosen[comp_of[a.node]];
        if (!slot)
            slot = &a;
        else
            out.warnings.push_back("extra anchor at " + model.node_label(a.node) + " ignored");
    }
    std::vector<int> anchor_nodes;
    for (const auto* a : chosen)
        if (a) anchor_nodes.push_back(a->node);

    const auto set = MeasurementMatrixSet::build(model);
    const auto problem = assemble_problem(model, set, out.measurements, anchor_nodes);
    out.report = solve(problem, opts.solver);
    if (out.report.status == SolveStatus::NumericalFailure) throw SolverError("interior-point solve failed");
    if (out.report.status == SolveStatus::MaxIter)
        out.warnings.push_back("solver stopped at the iteration limit");

    // Components share no coefficients, so each has its own rank-one factor.
    const int n = model.node_count();
    std::vector<Complex> v(n);
    out.rank1_ratio = 0.0;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        const auto& members = comps[c];
        const auto k = static_cast<Eigen::Index>(members.size());
        std::vector<int> idx;
        for (int node : members) idx.push_back(node);
        for (int node : members) idx.push_back(n + node);
        Eigen::MatrixXd sub(2 * k, 2 * k);
        for (Eigen::Index i = 0; i < 2 * k; ++i)
            for (Eigen::Index j = 0; j < 2 * k; ++j) sub(i, j) = out.report.w(idx[i], idx[j]);
        const int local = static_cast<int>(std::find(members.begin(), members.end(), chosen[c]->node) - members.begin());
        const int anchor_local[] = {local};
        const auto ex = extract_state(sub, anchor_local);
        out.rank1_ratio = std::max(out.rank1_ratio, ex.rank1_ratio);
        const Complex rot = std::polar(1.0, chosen[c]->angle_deg * std::numbers::pi / 180.0);
        for (Eigen::Index i = 0; i < k; ++i) v[members[i]] = Complex(ex.x[i], ex.x[k + i]) * rot;
    }
    out.rank1_ratio = std::max(out.rank1_ratio, out.report.relaxed_rank1_ratio);
    if (out.rank1_ratio > kRankRatioReject)
        throw UnobservableError("relaxed solution is far from rank one (ratio " + std::to_string(out.rank1_ratio) +
                                ")");
    if (out.rank1_ratio > kRankRatioAccept)
        out.warnings.push_back("rank-one ratio " + std::to_string(out.rank1_ratio) + " above 1e-4");

    out.voltages = std::move(v);
    out.residuals = compute_residuals(problem, out.report.w);
    return out;
}

std::vector<double> regenerate(const NetworkModel& model, const std::vector<Measurement>& meas,
                               const std::vector<Complex>& voltages) {
    const auto set = MeasurementMatrixSet::build(model);
    const auto x = stack_state(voltages);
    std::vector<double> out;
    out.reserve(meas.size());
    for (const auto& m : meas) out.push_back(predict(set, m, x));
    return out;
}

}  // namespace sdpse
