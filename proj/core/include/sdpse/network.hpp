#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

namespace sdpse {

using Complex = std::complex<double>;
using ComplexSparse = Eigen::SparseMatrix<Complex>;

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

char phase_letter(Phase p);
Phase parse_phase(std::string_view s);

struct Bus {
    std::string id;
    std::vector<Phase> phases;  // sorted A, B, C; never empty
    bool is_feeder_head = false;
    double base_kv = 1.0;
};

/// One phase of one bus. Indices are dense: 0..N'-1.
struct Node {
    int index = 0;
    int bus = 0;  // index into NetworkModel::buses()
    Phase phase = Phase::A;
};

/// Branch as it appears in a network document, endpoints by (bus id, phase).
struct BranchSpec {
    std::string id;
    std::string from_bus;
    Phase from_phase = Phase::A;
    std::string to_bus;
    Phase to_phase = Phase::A;
    double r = 0.0;
    double x = 0.0;
    double shunt_b = 0.0;  // susceptance placed at each end
    bool is_switch = false;
    bool closed = true;
};

/// Node-to-node branch. series_admittance is the physical series admittance
/// y = 1/(r + jx); the assembled ybus carries -y off the diagonal.
struct Branch {
    std::string id;
    int from_node = 0;
    int to_node = 0;
    Complex series_admittance{};
    Complex shunt_admittance{};  // at each end
    double r = 0.0;
    double x = 0.0;
    bool is_switch = false;
    bool closed = true;
};

/// Immutable single- or multiphase network with its reduced admittance matrix.
class NetworkModel {
  public:
    /// Validates and assembles. Throws ValidationError on duplicate nodes,
    /// dangling endpoints, zero impedance, or a disconnected bus graph.
    static NetworkModel build(std::vector<Bus> buses, const std::vector<BranchSpec>& branches,
                              double base_mva = 1.0);

    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Branch>& branches() const { return branches_; }
    const ComplexSparse& ybus() const { return ybus_; }
    double base_mva() const { return base_mva_; }

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int bus_count() const { return static_cast<int>(buses_.size()); }
    /// M': closed branches only.
    int closed_branch_count() const { return static_cast<int>(closed_.size()); }
    const std::vector<int>& closed_branches() const { return closed_; }
    /// Bus index of the feeder head.
    int feeder_head() const { return feeder_head_; }

    std::optional<int> bus_index(std::string_view id) const;
    std::optional<int> node_index(int bus, Phase phase) const;
    std::optional<int> node_index(std::string_view bus_id, Phase phase) const;
    /// Closed branch joining nodes l and m in either direction.
    std::optional<int> branch_between(int l, int m) const;
    /// Closed branches incident to a node.
    const std::vector<int>& incident(int node) const { return incident_[node]; }
    /// Node at the other end of a branch.
    int other_end(int branch, int node) const;

    std::string node_label(int node) const;
    std::vector<BranchSpec> branch_specs() const;

  private:
    std::vector<Bus> buses_;
    std::vector<Node> nodes_;
    std::vector<Branch> branches_;
    std::vector<int> closed_;
    std::vector<std::vector<int>> incident_;
    std::map<std::pair<int, int>, int> pair_to_branch_;
    std::map<std::string, int, std::less<>> bus_lookup_;
    std::vector<std::vector<int>> bus_nodes_;  // bus -> node per phase (-1 when absent)
    ComplexSparse ybus_;
    double base_mva_ = 1.0;
    int feeder_head_ = 0;
};

/// ybus(l,l) = sum of (y + shunt) over incident closed branches,
/// ybus(l,m) = -y for connected pairs.
ComplexSparse assemble_ybus(int node_count, const std::vector<Branch>& branches);

/// Bus-level adjacency derived from the nonzero pattern of ybus.
std::vector<std::vector<int>> bus_adjacency(const NetworkModel& model);

/// Connected components of the node graph over closed branches.
std::vector<std::vector<int>> node_components(const NetworkModel& model);

NetworkModel parse_network(std::string_view json_text);
NetworkModel load_network(const std::string& path);
std::string network_to_json(const NetworkModel& model);

/// Model restricted to a subset of buses. Branches leaving the subset are
/// dropped. node_map[k] is the parent-model index of sub-model node k.
struct SubNetwork {
    NetworkModel model;
    std::vector<int> node_map;
    std::vector<int> bus_map;
};

SubNetwork restrict_to_buses(const NetworkModel& model, const std::vector<int>& buses, int head_bus);

}  // namespace sdpse
