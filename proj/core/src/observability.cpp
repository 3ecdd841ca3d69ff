#include "sdpse/observability.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

namespace sdpse {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Observable: return "observable";
        case Verdict::Repairable: return "repairable";
        case Verdict::Unobservable: return "unobservable";
    }
    return "?";
}

ObservabilityReport analyze(const NetworkModel& model, const std::vector<Measurement>& meas) {
    validate_measurements(model, meas);
    const int n = model.node_count();
    ObservabilityReport r;
    const auto counts = count_variables(n, model.closed_branch_count());
    r.distinct_vars = counts.distinct;
    r.ceiling = counts.independent;
    r.measurement_count = static_cast<long long>(meas.size());

    std::set<std::pair<int, MeasKind>> at_node;
    std::set<std::tuple<int, int, MeasKind>> flows;
    for (const auto& m : meas) {
        if (is_flow(m.kind))
            flows.insert({m.node, m.to_node, m.kind});
        else
            at_node.insert({m.node, m.kind});
    }
    auto has_flow = [&](int l, int m, MeasKind k) { return flows.count({l, m, k}) != 0; };
    auto any_flow = [&](int l, int m) { return has_flow(l, m, MeasKind::PFlow) || has_flow(l, m, MeasKind::QFlow); };

    // Node KCL: both injections plus both flows at every incident near end.
    for (int k = 0; k < n; ++k) {
        if (!at_node.count({k, MeasKind::PInj}) || !at_node.count({k, MeasKind::QInj})) continue;
        bool all = true;
        for (int b : model.incident(k)) {
            const int o = model.other_end(b, k);
            all = all && has_flow(k, o, MeasKind::PFlow) && has_flow(k, o, MeasKind::QFlow);
        }
        if (all) {
            r.redundancy_points.push_back({RedundancyPoint::Kind::Node, k});
            r.deductions += 2;
        }
    }
    // Branch identities: P, Q at both ends and both magnitudes.
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        const int l = br.from_node, m = br.to_node;
        if (has_flow(l, m, MeasKind::PFlow) && has_flow(l, m, MeasKind::QFlow) && has_flow(m, l, MeasKind::PFlow) &&
            has_flow(m, l, MeasKind::QFlow) && at_node.count({l, MeasKind::Vmag}) && at_node.count({m, MeasKind::Vmag})) {
            r.redundancy_points.push_back({RedundancyPoint::Kind::Branch, b});
            r.deductions += 2;
        }
    }
    r.independent_eqs_available = std::clamp(r.measurement_count - r.deductions, 0LL, r.ceiling);

    // Supports, counting a far-end pseudo reading wherever one could be added.
    std::vector<char> node_ok(n, 0);
    for (int k = 0; k < n; ++k)
        node_ok[k] = at_node.count({k, MeasKind::Vmag}) || at_node.count({k, MeasKind::PInj}) ||
                     at_node.count({k, MeasKind::QInj});
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        const int l = br.from_node, m = br.to_node;
        const bool fl = any_flow(l, m), fm = any_flow(m, l);
        if (fl) node_ok[l] = 1;
        if (fm) node_ok[m] = 1;
        if (fl && !fm) r.one_sided_ends.emplace_back(l, m);
        if (fm && !fl) r.one_sided_ends.emplace_back(m, l);
        if (fl || fm) {
            node_ok[l] = node_ok[m] = 1;
        }
        const bool inj = at_node.count({l, MeasKind::PInj}) || at_node.count({l, MeasKind::QInj}) ||
                         at_node.count({m, MeasKind::PInj}) || at_node.count({m, MeasKind::QInj});
        if (!(fl || fm || inj)) r.unsupported_branches.push_back(b);
    }
    for (int k = 0; k < n; ++k)
        if (!node_ok[k]) r.unsupported_nodes.push_back(k);

    if (!r.unsupported_nodes.empty() || !r.unsupported_branches.empty())
        r.verdict = Verdict::Unobservable;
    else if (!r.one_sided_ends.empty())
        r.verdict = Verdict::Repairable;
    return r;
}

std::string report_to_json(const NetworkModel& model, const ObservabilityReport& r) {
    nlohmann::ordered_json j;
    j["verdict"] = to_string(r.verdict);
    j["distinct_vars"] = r.distinct_vars;
    j["ceiling"] = r.ceiling;
    j["measurement_count"] = r.measurement_count;
    j["deductions"] = r.deductions;
    j["independent_eqs_available"] = r.independent_eqs_available;
    auto points = nlohmann::ordered_json::array();
    for (const auto& p : r.redundancy_points) {
        if (p.kind == RedundancyPoint::Kind::Node)
            points.push_back({{"type", "node"}, {"node", model.node_label(p.index)}});
        else
            points.push_back({{"type", "branch"}, {"branch", model.branches()[p.index].id}});
    }
    j["redundancy_points"] = points;
    auto ends = nlohmann::ordered_json::array();
    for (auto [l, m] : r.one_sided_ends)
        ends.push_back({{"measured_at", model.node_label(l)}, {"missing_at", model.node_label(m)}});
    j["unobservable_branches"] = ends;
    auto nodes = nlohmann::ordered_json::array();
    for (int k : r.unsupported_nodes) nodes.push_back(model.node_label(k));
    j["unsupported_nodes"] = nodes;
    auto brs = nlohmann::ordered_json::array();
    for (int b : r.unsupported_branches) brs.push_back(model.branches()[b].id);
    j["unsupported_branches"] = brs;
    return j.dump(2) + "\n";
}

}  // namespace sdpse
