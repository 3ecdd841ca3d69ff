#include "sdpse/partition.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <future>
#include <numeric>

#include <json.hpp>

#include "sdpse/error.hpp"

namespace sdpse {

TopologyInfo detect_topology(const NetworkModel& model) {
    const int nb = model.bus_count();
    const auto adj = bus_adjacency(model);
    TopologyInfo t;
    t.head = model.feeder_head();
    t.parent.assign(nb, -1);
    t.children.assign(nb, {});
    t.ancestors.assign(nb, {});
    t.generation.assign(nb, {});
    t.rank.assign(nb, 0);
    t.depth.assign(nb, 0);

    // Iterative DFS; a bus already reached is never entered again.
    std::vector<char> seen(nb, 0);
    std::vector<int> order;
    std::vector<std::pair<int, std::size_t>> stack{{t.head, 0}};
    seen[t.head] = 1;
    order.push_back(t.head);
    while (!stack.empty()) {
        auto& [b, next] = stack.back();
        if (next == adj[b].size()) {
            stack.pop_back();
            continue;
        }
        const int c = adj[b][next++];
        if (seen[c]) continue;
        seen[c] = 1;
        t.parent[c] = b;
        t.children[b].push_back(c);
        t.depth[c] = t.depth[b] + 1;
        t.ancestors[c].push_back(b);
        t.ancestors[c].insert(t.ancestors[c].end(), t.ancestors[b].begin(), t.ancestors[b].end());
        order.push_back(c);
        stack.emplace_back(c, 0);
    }
    std::string unreached;
    for (int b = 0; b < nb; ++b)
        if (!seen[b]) unreached += (unreached.empty() ? "" : ", ") + model.buses()[b].id;
    if (!unreached.empty()) throw ValidationError("disconnected graph: unreached buses " + unreached);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const int b = *it;
        auto& g = t.generation[b];
        for (int c : t.children[b]) {
            g.push_back(c);
            g.insert(g.end(), t.generation[c].begin(), t.generation[c].end());
        }
        std::sort(g.begin(), g.end());
        std::sort(t.children[b].begin(), t.children[b].end());
        t.rank[b] = static_cast<int>(g.size());
    }
    return t;
}

std::string_view to_string(TiePolicy p) { return p == TiePolicy::Ignore ? "ignore" : "update"; }

TiePolicy parse_tie_policy(std::string_view s) {
    if (s == "ignore") return TiePolicy::Ignore;
    if (s == "update") return TiePolicy::Update;
    throw ValidationError("unknown tie-line policy '" + std::string(s) + "'");
}

std::vector<int> tie_lines_of(const NetworkModel& model, const std::vector<std::vector<int>>& subs) {
    std::vector<int> owner(model.bus_count(), -1);
    for (std::size_t k = 0; k < subs.size(); ++k)
        for (int b : subs[k]) owner[b] = static_cast<int>(k);
    std::vector<int> ties;
    for (int br : model.closed_branches()) {
        const auto& b = model.branches()[br];
        if (owner[model.nodes()[b.from_node].bus] != owner[model.nodes()[b.to_node].bus]) ties.push_back(br);
    }
    return ties;
}

PartitionPlan separate(const NetworkModel& model, const TopologyInfo& topo, int d) {
    if (d < 1) throw ValidationError("sub-network size must be at least 1");
    const int nb = model.bus_count();
    std::vector<int> rank = topo.rank;
    std::vector<char> carved(nb, 0);
    PartitionPlan plan;
    for (;;) {
        int pick = -1;
        int best = 0;
        for (int b = 0; b < nb; ++b) {
            if (carved[b] || rank[b] == 0) continue;
            const int gap = std::abs(d - (rank[b] + 1));
            if (pick < 0 || gap < best) {
                pick = b;
                best = gap;
            }
        }
        if (pick < 0) break;
        // The root plus its not-yet-carved descendants.
        std::vector<int> part;
        std::vector<int> stack{pick};
        while (!stack.empty()) {
            const int b = stack.back();
            stack.pop_back();
            part.push_back(b);
            for (int c : topo.children[b])
                if (!carved[c]) stack.push_back(c);
        }
        for (int b : part) {
            carved[b] = 1;
            rank[b] = 0;
        }
        for (int a : topo.ancestors[pick]) rank[a] -= static_cast<int>(part.size());
        std::sort(part.begin(), part.end());
        plan.sub_networks.push_back(std::move(part));
    }
    std::vector<int> rest;
    for (int b = 0; b < nb; ++b)
        if (!carved[b]) rest.push_back(b);
    if (!rest.empty()) plan.sub_networks.push_back(std::move(rest));
    plan.tie_lines = tie_lines_of(model, plan.sub_networks);
    return plan;
}

PartitionPlan separate_on_switches(const NetworkModel& model) {
    const int nb = model.bus_count();
    std::vector<int> parent(nb);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (int br : model.closed_branches()) {
        const auto& b = model.branches()[br];
        if (b.is_switch) continue;
        const int x = root(model.nodes()[b.from_node].bus), y = root(model.nodes()[b.to_node].bus);
        if (x != y) parent[std::max(x, y)] = std::min(x, y);
    }
    PartitionPlan plan;
    std::vector<int> slot(nb, -1);
    for (int b = 0; b < nb; ++b) {
        const int r = root(b);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(plan.sub_networks.size());
            plan.sub_networks.emplace_back();
        }
        plan.sub_networks[slot[r]].push_back(b);
    }
    plan.tie_lines = tie_lines_of(model, plan.sub_networks);
    return plan;
}

void validate_plan(const NetworkModel& model, const PartitionPlan& plan) {
    const int nb = model.bus_count();
    std::vector<int> owner(nb, -1);
    for (std::size_t k = 0; k < plan.sub_networks.size(); ++k) {
        if (plan.sub_networks[k].empty()) throw ValidationError("sub-network " + std::to_string(k) + " is empty");
        for (int b : plan.sub_networks[k]) {
            if (b < 0 || b >= nb) throw ValidationError("plan references an unknown bus");
            if (owner[b] >= 0)
                throw ValidationError("bus " + model.buses()[b].id + " appears in two sub-networks");
            owner[b] = static_cast<int>(k);
        }
    }
    for (int b = 0; b < nb; ++b)
        if (owner[b] < 0) throw ValidationError("bus " + model.buses()[b].id + " is in no sub-network");

    const auto adj = bus_adjacency(model);
    for (std::size_t k = 0; k < plan.sub_networks.size(); ++k) {
        const auto& sub = plan.sub_networks[k];
        std::vector<char> seen(nb, 0);
        std::vector<int> stack{sub.front()};
        seen[sub.front()] = 1;
        std::size_t count = 0;
        while (!stack.empty()) {
            const int b = stack.back();
            stack.pop_back();
            ++count;
            for (int c : adj[b])
                if (!seen[c] && owner[c] == static_cast<int>(k)) {
                    seen[c] = 1;
                    stack.push_back(c);
                }
        }
        if (count != sub.size()) throw ValidationError("sub-network " + std::to_string(k) + " is not connected");
    }
    for (const auto& a : plan.anchors) {
        if (a.sub < 0 || a.sub >= static_cast<int>(plan.sub_networks.size()))
            throw ValidationError("anchor refers to a missing sub-network");
        if (a.node < 0 || a.node >= model.node_count()) throw ValidationError("anchor node out of range");
        if (owner[model.nodes()[a.node].bus] != a.sub)
            throw ValidationError("anchor " + model.node_label(a.node) + " lies outside sub-network " +
                                  std::to_string(a.sub));
    }
}

std::vector<PlanAnchor> propose_anchors(const NetworkModel& model, const PartitionPlan& plan) {
    std::vector<PlanAnchor> out;
    for (std::size_t k = 0; k < plan.sub_networks.size(); ++k) {
        int best = -1;
        std::size_t best_deg = 0;
        for (const auto& node : model.nodes()) {
            if (!std::binary_search(plan.sub_networks[k].begin(), plan.sub_networks[k].end(), node.bus)) continue;
            const auto deg = model.incident(node.index).size();
            if (best < 0 || deg > best_deg) {
                best = node.index;
                best_deg = deg;
            }
        }
        out.push_back(PlanAnchor{static_cast<int>(k), best, std::nullopt});
    }
    return out;
}

DecoupledResult estimate_decoupled(const NetworkModel& model, const std::vector<Measurement>& meas,
                                   const PartitionPlan& plan, const EstimateOptions& opts) {
    validate_plan(model, plan);
    validate_measurements(model, meas);
    const auto topo = detect_topology(model);
    const int n = model.node_count();
    const auto ties = tie_lines_of(model, plan.sub_networks);
    std::vector<char> is_tie(model.branches().size(), 0);
    for (int b : ties) is_tie[b] = 1;

    // Tie-line flows read at each boundary node, by kind.
    std::vector<std::vector<int>> tie_at(n);
    for (int b : ties) {
        tie_at[model.branches()[b].from_node].push_back(b);
        tie_at[model.branches()[b].to_node].push_back(b);
    }
    auto tie_flow = [&](int l, int b, MeasKind kind) -> const Measurement* {
        const int m = model.other_end(b, l);
        for (const auto& x : meas)
            if (x.kind == kind && x.node == l && x.to_node == m) return &x;
        return nullptr;
    };

    DecoupledResult out;
    out.voltages.assign(n, Complex{});
    struct Job {
        SubNetwork sub;
        std::vector<Measurement> meas;
        Anchor anchor;
    };
    std::vector<Job> jobs;
    for (std::size_t k = 0; k < plan.sub_networks.size(); ++k) {
        const auto& buses = plan.sub_networks[k];
        const PlanAnchor* anchor = nullptr;
        for (const auto& a : plan.anchors)
            if (a.sub == static_cast<int>(k)) {
                anchor = &a;
                break;
            }
        if (!anchor) throw ValidationError("sub-network " + std::to_string(k) + " has no anchor");
        if (!anchor->ref_angle_deg)
            throw ValidationError("anchor " + model.node_label(anchor->node) + " of sub-network " +
                                  std::to_string(k) + " has no reference angle");

        int head = buses.front();
        for (int b : buses)
            if (topo.depth[b] < topo.depth[head]) head = b;
        auto sub = restrict_to_buses(model, buses, head);
        std::vector<int> local(n, -1);
        for (std::size_t i = 0; i < sub.node_map.size(); ++i) local[sub.node_map[i]] = static_cast<int>(i);

        std::vector<Measurement> sub_meas;
        std::size_t dropped = 0;
        for (const auto& m : meas) {
            if (local[m.node] < 0) continue;
            Measurement x = m;
            x.node = local[m.node];
            if (is_flow(m.kind)) {
                const auto b = model.branch_between(m.node, m.to_node);
                if (is_tie[*b]) continue;
                x.to_node = local[m.to_node];
            } else if (is_injection(m.kind) && !tie_at[m.node].empty()) {
                if (plan.policy == TiePolicy::Ignore) {
                    ++dropped;
                    continue;
                }
                const auto flow_kind = m.kind == MeasKind::PInj ? MeasKind::PFlow : MeasKind::QFlow;
                double var = m.sigma * m.sigma;
                bool complete = true;
                for (int b : tie_at[m.node]) {
                    const auto* f = tie_flow(m.node, b, flow_kind);
                    if (!f) {
                        complete = false;
                        break;
                    }
                    x.value += f->value;
                    var += f->sigma * f->sigma;
                }
                if (!complete) {
                    ++dropped;
                    continue;
                }
                x.sigma = std::sqrt(var);
            }
            sub_meas.push_back(x);
        }
        if (dropped > 0)
            out.warnings.push_back("sub-network " + std::to_string(k) + ": " + std::to_string(dropped) +
                                   " boundary injection reading(s) dropped");

        jobs.push_back(Job{std::move(sub), std::move(sub_meas), Anchor{local[anchor->node], *anchor->ref_angle_deg}});
    }

    // Sub-networks are independent; solve them concurrently and merge in order.
    std::vector<std::future<EstimationResult>> futures;
    for (const auto& job : jobs)
        futures.push_back(std::async(std::launch::async, [&job, &opts] {
            return estimate(job.sub.model, job.meas, {job.anchor}, opts);
        }));
    std::vector<EstimationResult> results(jobs.size());
    std::exception_ptr first_error;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        try {
            results[k] = futures[k].get();
        } catch (const UnobservableError& e) {
            if (!first_error)
                first_error = std::make_exception_ptr(UnobservableError("sub-network " + std::to_string(k) + ": " + e.what()));
        } catch (const SolverError& e) {
            if (!first_error)
                first_error = std::make_exception_ptr(SolverError("sub-network " + std::to_string(k) + ": " + e.what()));
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const auto& map = jobs[k].sub.node_map;
        for (std::size_t i = 0; i < map.size(); ++i) out.voltages[map[i]] = results[k].voltages[i];
        for (const auto& w : results[k].warnings) out.warnings.push_back("sub-network " + std::to_string(k) + ": " + w);
        out.node_maps.push_back(map);
        out.subs.push_back(std::move(results[k]));
    }
    return out;
}

std::string plan_to_json(const NetworkModel& model, const PartitionPlan& plan) {
    nlohmann::ordered_json j;
    auto subs = nlohmann::ordered_json::array();
    for (const auto& s : plan.sub_networks) {
        auto ids = nlohmann::ordered_json::array();
        for (int b : s) ids.push_back(model.buses()[b].id);
        subs.push_back(ids);
    }
    j["sub_networks"] = subs;
    auto ties = nlohmann::ordered_json::array();
    for (int b : plan.tie_lines) ties.push_back(model.branches()[b].id);
    j["tie_lines"] = ties;
    auto anchors = nlohmann::ordered_json::array();
    for (const auto& a : plan.anchors) {
        const auto& node = model.nodes()[a.node];
        nlohmann::ordered_json e{{"sub", a.sub},
                                 {"bus", model.buses()[node.bus].id},
                                 {"phase", std::string(1, phase_letter(node.phase))}};
        if (a.ref_angle_deg) e["ref_angle_deg"] = *a.ref_angle_deg;
        anchors.push_back(e);
    }
    j["anchors"] = anchors;
    j["policy"] = to_string(plan.policy);
    return j.dump(2) + "\n";
}

PartitionPlan parse_plan(const NetworkModel& model, std::string_view text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("plan: malformed JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("plan: top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "sub_networks" && key != "tie_lines" && key != "anchors" && key != "policy")
            throw ValidationError("plan: unknown key '" + key + "'");
    PartitionPlan plan;
    try {
        for (const auto& s : doc.at("sub_networks")) {
            std::vector<int> buses;
            for (const auto& id : s) {
                const auto b = model.bus_index(id.get<std::string>());
                if (!b) throw ValidationError("plan: unknown bus '" + id.get<std::string>() + "'");
                buses.push_back(*b);
            }
            std::sort(buses.begin(), buses.end());
            plan.sub_networks.push_back(std::move(buses));
        }
        if (doc.contains("anchors"))
            for (const auto& a : doc.at("anchors")) {
                for (const auto& [key, _] : a.items())
                    if (key != "sub" && key != "bus" && key != "phase" && key != "ref_angle_deg")
                        throw ValidationError("plan anchor: unknown key '" + key + "'");
                PlanAnchor pa;
                pa.sub = a.at("sub").get<int>();
                const auto bus = a.at("bus").get<std::string>();
                const auto node = model.node_index(bus, parse_phase(a.at("phase").get<std::string>()));
                if (!node) throw ValidationError("plan anchor: no node " + bus + "." + a.at("phase").get<std::string>());
                pa.node = *node;
                if (a.contains("ref_angle_deg")) pa.ref_angle_deg = a.at("ref_angle_deg").get<double>();
                plan.anchors.push_back(pa);
            }
        if (doc.contains("policy")) plan.policy = parse_tie_policy(doc.at("policy").get<std::string>());
    } catch (const json::exception& e) {
        throw ValidationError(std::string("plan: ") + e.what());
    }
    plan.tie_lines = tie_lines_of(model, plan.sub_networks);
    if (doc.contains("tie_lines")) {
        std::vector<std::string> given, expected;
        try {
            for (const auto& t : doc.at("tie_lines")) given.push_back(t.get<std::string>());
        } catch (const json::exception& e) {
            throw ValidationError(std::string("plan: ") + e.what());
        }
        for (int b : plan.tie_lines) expected.push_back(model.branches()[b].id);
        std::sort(given.begin(), given.end());
        std::sort(expected.begin(), expected.end());
        if (given != expected) throw ValidationError("plan: tie_lines do not match the sub-network boundaries");
    }
    validate_plan(model, plan);
    return plan;
}

}  // namespace sdpse
