#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sdpse/estimate.hpp"

namespace sdpse {

/// Feeder tree over buses, rooted at the feeder head. Meshed networks give
/// the DFS spanning tree (neighbours visited in index order).
struct TopologyInfo {
    int head = 0;
    std::vector<int> parent;                  // -1 for the head
    std::vector<std::vector<int>> children;   // sorted
    std::vector<std::vector<int>> ancestors;  // nearest first
    std::vector<std::vector<int>> generation; // all descendants, sorted
    std::vector<int> rank;                    // |generation|
    std::vector<int> depth;
};

TopologyInfo detect_topology(const NetworkModel& model);

enum class TiePolicy { Ignore, Update };
std::string_view to_string(TiePolicy p);
TiePolicy parse_tie_policy(std::string_view s);

struct PlanAnchor {
    int sub = 0;
    int node = 0;
    std::optional<double> ref_angle_deg;
};

struct PartitionPlan {
    std::vector<std::vector<int>> sub_networks;  // bus indices, sorted
    std::vector<int> tie_lines;                  // closed branches between subs
    std::vector<PlanAnchor> anchors;
    TiePolicy policy = TiePolicy::Ignore;
};

/// Carves subtrees whose size (root plus descendants) is closest to d,
/// lowest bus index on ties, until no bus has descendants left; the
/// uncarved remainder around the feeder head is the last sub-network.
PartitionPlan separate(const NetworkModel& model, const TopologyInfo& topo, int d);

/// Components left after removing every switch branch; closed switches
/// become the tie lines.
PartitionPlan separate_on_switches(const NetworkModel& model);

/// Closed branches whose end buses lie in different sub-networks.
std::vector<int> tie_lines_of(const NetworkModel& model, const std::vector<std::vector<int>>& subs);

/// Throws ValidationError unless the sub-networks are disjoint, cover every
/// bus and are each connected, and every anchor lies in its sub-network.
void validate_plan(const NetworkModel& model, const PartitionPlan& plan);

/// Highest-degree node of each sub-network (lowest index on ties), with no
/// reference angle.
std::vector<PlanAnchor> propose_anchors(const NetworkModel& model, const PartitionPlan& plan);

struct DecoupledResult {
    std::vector<Complex> voltages;
    std::vector<EstimationResult> subs;
    std::vector<std::vector<int>> node_maps;  // sub node -> parent node
    std::vector<std::string> warnings;
};

/// Independent estimate per sub-network, each anchored at its μPMU and
/// rotated by that anchor's reference angle, merged into one state.
/// Throws ValidationError when a sub-network lacks an anchor with a
/// reference angle; per-sub failures are rethrown naming the sub-network.
DecoupledResult estimate_decoupled(const NetworkModel& model, const std::vector<Measurement>& meas,
                                   const PartitionPlan& plan, const EstimateOptions& opts = {});

std::string plan_to_json(const NetworkModel& model, const PartitionPlan& plan);
PartitionPlan parse_plan(const NetworkModel& model, std::string_view text);

}  // namespace sdpse
