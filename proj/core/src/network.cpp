#include "sdpse/network.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sdpse/error.hpp"

namespace sdpse {

using json = nlohmann::json;

char phase_letter(Phase p) {
    switch (p) {
        case Phase::A: return 'A';
        case Phase::B: return 'B';
        case Phase::C: return 'C';
    }
    return '?';
}

Phase parse_phase(std::string_view s) {
    if (s == "A" || s == "a") return Phase::A;
    if (s == "B" || s == "b") return Phase::B;
    if (s == "C" || s == "c") return Phase::C;
    throw ValidationError("unknown phase '" + std::string(s) + "'");
}

ComplexSparse assemble_ybus(int node_count, const std::vector<Branch>& branches) {
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(branches.size() * 4);
    for (const auto& br : branches) {
        if (!br.closed) continue;
        const Complex y = br.series_admittance;
        trip.emplace_back(br.from_node, br.from_node, y + br.shunt_admittance);
        trip.emplace_back(br.to_node, br.to_node, y + br.shunt_admittance);
        trip.emplace_back(br.from_node, br.to_node, -y);
        trip.emplace_back(br.to_node, br.from_node, -y);
    }
    ComplexSparse y(node_count, node_count);
    y.setFromTriplets(trip.begin(), trip.end());
    y.makeCompressed();
    return y;
}

NetworkModel NetworkModel::build(std::vector<Bus> buses, const std::vector<BranchSpec>& specs,
                                 double base_mva) {
    if (buses.empty()) throw ValidationError("network has no buses");
    if (!(base_mva > 0.0)) throw ValidationError("base_mva must be positive");

    NetworkModel m;
    m.base_mva_ = base_mva;
    int heads = 0;
    for (std::size_t b = 0; b < buses.size(); ++b) {
        auto& bus = buses[b];
        if (bus.id.empty()) throw ValidationError("bus with empty id");
        if (bus.phases.empty()) throw ValidationError("bus '" + bus.id + "' has no phases");
        if (!(bus.base_kv > 0.0)) throw ValidationError("bus '" + bus.id + "' has non-positive base_kV");
        std::sort(bus.phases.begin(), bus.phases.end());
        if (std::adjacent_find(bus.phases.begin(), bus.phases.end()) != bus.phases.end())
            throw ValidationError("duplicate node: bus '" + bus.id + "' lists a phase twice");
        if (!m.bus_lookup_.emplace(bus.id, static_cast<int>(b)).second)
            throw ValidationError("duplicate node: bus id '" + bus.id + "' appears twice");
        if (bus.is_feeder_head) {
            ++heads;
            m.feeder_head_ = static_cast<int>(b);
        }
    }
    if (heads != 1)
        throw ValidationError("exactly one feeder head bus required, found " + std::to_string(heads));
    m.buses_ = std::move(buses);

    m.bus_nodes_.assign(m.buses_.size(), std::vector<int>(3, -1));
    for (std::size_t b = 0; b < m.buses_.size(); ++b) {
        for (Phase p : m.buses_[b].phases) {
            const int idx = static_cast<int>(m.nodes_.size());
            m.nodes_.push_back(Node{idx, static_cast<int>(b), p});
            m.bus_nodes_[b][static_cast<int>(p)] = idx;
        }
    }

    std::set<std::string> branch_ids;
    for (const auto& s : specs) {
        if (!branch_ids.insert(s.id).second)
            throw ValidationError("duplicate branch id '" + s.id + "'");
        auto from = m.node_index(s.from_bus, s.from_phase);
        auto to = m.node_index(s.to_bus, s.to_phase);
        if (!from || !to)
            throw ValidationError("dangling branch endpoint in branch '" + s.id + "'");
        if (*from == *to) throw ValidationError("branch '" + s.id + "' connects a node to itself");
        const Complex z(s.r, s.x);
        if (s.closed && std::abs(z) == 0.0)
            throw ValidationError("branch '" + s.id + "' has zero series impedance");
        Branch br;
        br.id = s.id;
        br.from_node = *from;
        br.to_node = *to;
        br.r = s.r;
        br.x = s.x;
        br.series_admittance = std::abs(z) == 0.0 ? Complex{} : 1.0 / z;
        br.shunt_admittance = Complex(0.0, s.shunt_b);
        br.is_switch = s.is_switch;
        br.closed = s.closed;
        m.branches_.push_back(br);
    }

    m.incident_.assign(m.nodes_.size(), {});
    for (std::size_t i = 0; i < m.branches_.size(); ++i) {
        const auto& br = m.branches_[i];
        if (!br.closed) continue;
        const auto key = std::minmax(br.from_node, br.to_node);
        if (!m.pair_to_branch_.emplace(key, static_cast<int>(i)).second)
            throw ValidationError("parallel closed branches between " + m.node_label(br.from_node) +
                                  " and " + m.node_label(br.to_node) + " (merge them)");
        m.closed_.push_back(static_cast<int>(i));
        m.incident_[br.from_node].push_back(static_cast<int>(i));
        m.incident_[br.to_node].push_back(static_cast<int>(i));
    }

    m.ybus_ = assemble_ybus(m.node_count(), m.branches_);

    // Bus-level connectivity over closed branches.
    auto adj = bus_adjacency(m);
    std::vector<char> seen(m.buses_.size(), 0);
    std::queue<int> q;
    q.push(m.feeder_head_);
    seen[m.feeder_head_] = 1;
    while (!q.empty()) {
        int b = q.front();
        q.pop();
        for (int nb : adj[b])
            if (!seen[nb]) {
                seen[nb] = 1;
                q.push(nb);
            }
    }
    std::string unreached;
    for (std::size_t b = 0; b < seen.size(); ++b)
        if (!seen[b]) unreached += (unreached.empty() ? "" : ", ") + m.buses_[b].id;
    if (!unreached.empty())
        throw ValidationError("disconnected graph: buses unreachable from feeder head: " + unreached);
    return m;
}

std::optional<int> NetworkModel::bus_index(std::string_view id) const {
    auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> NetworkModel::node_index(int bus, Phase phase) const {
    if (bus < 0 || bus >= bus_count()) return std::nullopt;
    int idx = bus_nodes_[bus][static_cast<int>(phase)];
    if (idx < 0) return std::nullopt;
    return idx;
}

std::optional<int> NetworkModel::node_index(std::string_view bus_id, Phase phase) const {
    auto b = bus_index(bus_id);
    if (!b) return std::nullopt;
    return node_index(*b, phase);
}

std::optional<int> NetworkModel::branch_between(int l, int m) const {
    auto it = pair_to_branch_.find(std::minmax(l, m));
    if (it == pair_to_branch_.end()) return std::nullopt;
    return it->second;
}

int NetworkModel::other_end(int branch, int node) const {
    const auto& br = branches_[branch];
    return br.from_node == node ? br.to_node : br.from_node;
}

std::string NetworkModel::node_label(int node) const {
    const auto& n = nodes_[node];
    return buses_[n.bus].id + "." + phase_letter(n.phase);
}

std::vector<BranchSpec> NetworkModel::branch_specs() const {
    std::vector<BranchSpec> out;
    out.reserve(branches_.size());
    for (const auto& br : branches_) {
        const auto& f = nodes_[br.from_node];
        const auto& t = nodes_[br.to_node];
        out.push_back(BranchSpec{br.id, buses_[f.bus].id, f.phase, buses_[t.bus].id, t.phase, br.r,
                                 br.x, br.shunt_admittance.imag(), br.is_switch, br.closed});
    }
    return out;
}

std::vector<std::vector<int>> bus_adjacency(const NetworkModel& model) {
    std::vector<std::set<int>> sets(model.bus_count());
    const auto& y = model.ybus();
    for (int col = 0; col < y.outerSize(); ++col) {
        for (ComplexSparse::InnerIterator it(y, col); it; ++it) {
            if (it.row() == it.col() || it.value() == Complex{}) continue;
            int bi = model.nodes()[it.row()].bus;
            int bj = model.nodes()[it.col()].bus;
            if (bi != bj) {
                sets[bi].insert(bj);
                sets[bj].insert(bi);
            }
        }
    }
    std::vector<std::vector<int>> out(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) out[i].assign(sets[i].begin(), sets[i].end());
    return out;
}

std::vector<std::vector<int>> node_components(const NetworkModel& model) {
    const int n = model.node_count();
    std::vector<int> comp(n, -1);
    std::vector<std::vector<int>> out;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> members;
        std::vector<int> stack{s};
        comp[s] = static_cast<int>(out.size());
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            members.push_back(u);
            for (int b : model.incident(u)) {
                int v = model.other_end(b, u);
                if (comp[v] < 0) {
                    comp[v] = comp[s];
                    stack.push_back(v);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing key '" + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": key '" + key + "' has the wrong type");
    }
}

template <typename T>
T optional_key(const json& obj, const char* key, T fallback, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + ": key '" + key + "' has the wrong type");
    }
}

std::pair<std::string, Phase> parse_endpoint(const json& j, const std::string& where) {
    reject_unknown_keys(j, {"bus", "phase"}, where);
    return {required<std::string>(j, "bus", where),
            parse_phase(required<std::string>(j, "phase", where))};
}

}  // namespace

NetworkModel parse_network(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("network document is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(doc, {"buses", "branches", "base_mva"}, "network");
    const double base_mva = optional_key<double>(doc, "base_mva", 1.0, "network");
    auto jb = doc.find("buses");
    auto jr = doc.find("branches");
    if (jb == doc.end() || !jb->is_array()) throw ValidationError("network: 'buses' must be an array");
    if (jr == doc.end() || !jr->is_array())
        throw ValidationError("network: 'branches' must be an array");

    std::vector<Bus> buses;
    for (std::size_t i = 0; i < jb->size(); ++i) {
        const auto& o = (*jb)[i];
        const std::string where = "buses[" + std::to_string(i) + "]";
        reject_unknown_keys(o, {"id", "phases", "feeder_head", "base_kV"}, where);
        Bus b;
        b.id = required<std::string>(o, "id", where);
        for (const auto& p : required<std::vector<std::string>>(o, "phases", where))
            b.phases.push_back(parse_phase(p));
        b.is_feeder_head = optional_key<bool>(o, "feeder_head", false, where);
        b.base_kv = optional_key<double>(o, "base_kV", 1.0, where);
        buses.push_back(std::move(b));
    }

    std::vector<BranchSpec> branches;
    for (std::size_t i = 0; i < jr->size(); ++i) {
        const auto& o = (*jr)[i];
        const std::string where = "branches[" + std::to_string(i) + "]";
        reject_unknown_keys(o, {"id", "from", "to", "r", "x", "shunt_b", "is_switch", "closed"},
                            where);
        BranchSpec s;
        s.id = required<std::string>(o, "id", where);
        if (!o.contains("from") || !o.contains("to"))
            throw ValidationError(where + ": missing 'from' or 'to'");
        std::tie(s.from_bus, s.from_phase) = parse_endpoint(o["from"], where + ".from");
        std::tie(s.to_bus, s.to_phase) = parse_endpoint(o["to"], where + ".to");
        s.r = required<double>(o, "r", where);
        s.x = required<double>(o, "x", where);
        s.shunt_b = optional_key<double>(o, "shunt_b", 0.0, where);
        s.is_switch = optional_key<bool>(o, "is_switch", false, where);
        s.closed = optional_key<bool>(o, "closed", true, where);
        branches.push_back(std::move(s));
    }
    return NetworkModel::build(std::move(buses), branches, base_mva);
}

NetworkModel load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open network file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

std::string network_to_json(const NetworkModel& model) {
    json doc;
    doc["base_mva"] = model.base_mva();
    json buses = json::array();
    for (const auto& b : model.buses()) {
        json phases = json::array();
        for (Phase p : b.phases) phases.push_back(std::string(1, phase_letter(p)));
        buses.push_back(
            {{"id", b.id}, {"phases", phases}, {"feeder_head", b.is_feeder_head}, {"base_kV", b.base_kv}});
    }
    doc["buses"] = buses;
    json branches = json::array();
    for (const auto& s : model.branch_specs()) {
        branches.push_back({{"id", s.id},
                            {"from", {{"bus", s.from_bus}, {"phase", std::string(1, phase_letter(s.from_phase))}}},
                            {"to", {{"bus", s.to_bus}, {"phase", std::string(1, phase_letter(s.to_phase))}}},
                            {"r", s.r},
                            {"x", s.x},
                            {"shunt_b", s.shunt_b},
                            {"is_switch", s.is_switch},
                            {"closed", s.closed}});
    }
    doc["branches"] = branches;
    return doc.dump(2) + "\n";
}

SubNetwork restrict_to_buses(const NetworkModel& model, const std::vector<int>& bus_list, int head_bus) {
    std::vector<int> sorted = bus_list;
    std::sort(sorted.begin(), sorted.end());
    std::vector<char> inside(model.bus_count(), 0);
    for (int b : sorted) inside[b] = 1;
    if (!inside[head_bus]) throw ValidationError("sub-network head bus is not a member");

    std::vector<Bus> buses;
    SubNetwork out;
    for (int b : sorted) {
        Bus bus = model.buses()[b];
        bus.is_feeder_head = (b == head_bus);
        buses.push_back(std::move(bus));
        out.bus_map.push_back(b);
    }
    std::vector<BranchSpec> specs;
    const auto all = model.branch_specs();
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& br = model.branches()[i];
        if (inside[model.nodes()[br.from_node].bus] && inside[model.nodes()[br.to_node].bus])
            specs.push_back(all[i]);
    }
    out.model = NetworkModel::build(std::move(buses), specs, model.base_mva());
    for (const auto& n : out.model.nodes())
        out.node_map.push_back(*model.node_index(out.bus_map[n.bus], n.phase));
    return out;
}

}  // namespace sdpse
