#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <sdpse/bad_data.hpp>
#include <sdpse/error.hpp>
#include <sdpse/io.hpp>
#include <sdpse/observability.hpp>
#include <sdpse/partition.hpp>
#include <sdpse/stats.hpp>

namespace fs = std::filesystem;
using namespace sdpse;

namespace {

enum Exit { kOk = 0, kValidation = 2, kUnobservable = 3, kSolver = 4, kBudget = 5 };

struct Config {
    std::string network;
    std::string state;
    std::string measurements;
    std::string estimate;
    std::string anchors;
    std::string plan;
    std::string out = ".";
    int noise_level = -1;
    std::uint64_t seed = 0;
    int auto_partition = 0;
    bool switch_partition = false;
    std::string tie_policy = "ignore";
    bool no_repair = false;
    std::string repair_method = "negate";
    double efficiency = 0.98;
    double threshold = 3.0;
    std::string placement = "one-sided";
    std::vector<std::string> vmag_buses;
    int max_combinations = kDefaultMaxCombinations;
    int max_iterations = 200;
    double tolerance = 1e-9;
};

constexpr double kDeg = std::numbers::pi / 180.0;

void write_artifact(const Config& c, const std::string& name, const std::string& text) {
    fs::create_directories(c.out);
    const auto path = (fs::path(c.out) / name).string();
    write_text_file(path, text);
    std::cout << "wrote " << path << "\n";
}

std::vector<Site> placement(const NetworkModel& model, const Config& c) {
    if (c.placement == "full") return full_placement(model);
    if (c.placement != "one-sided") throw ValidationError("placement must be 'one-sided' or 'full'");
    std::vector<int> nodes;
    for (const auto& id : c.vmag_buses) {
        const auto b = model.bus_index(id);
        if (!b) throw ValidationError("unknown Vmag bus '" + id + "'");
        for (const auto& n : model.nodes())
            if (n.bus == *b) nodes.push_back(n.index);
    }
    return one_sided_placement(model, nodes);
}

std::vector<Measurement> synthesize_from(const NetworkModel& model, const Config& c) {
    if (c.state.empty()) throw ValidationError("synthesis needs --state");
    const auto truth = parse_state(model, read_text_file(c.state));
    const int level = c.noise_level < 0 ? 0 : c.noise_level;
    return synthesize(model, stack_state(truth), placement(model, c), NoiseSpec::level(level, c.seed));
}

// Exactly one source: a measurement file or synthesis from the truth state.
std::vector<Measurement> measurements_for(const NetworkModel& model, const Config& c) {
    if (!c.measurements.empty()) {
        if (c.noise_level >= 0) throw ValidationError("--measurements and --noise-level are mutually exclusive");
        return parse_measurements(model, read_text_file(c.measurements));
    }
    if (c.noise_level < 0) throw ValidationError("give --measurements or --state with --noise-level");
    return synthesize_from(model, c);
}

std::optional<std::vector<Complex>> truth_for(const NetworkModel& model, const Config& c) {
    if (c.state.empty()) return std::nullopt;
    return parse_state(model, read_text_file(c.state));
}

EstimateOptions options_for(const Config& c) {
    EstimateOptions o;
    o.repair = !c.no_repair;
    o.repair_method = parse_repair_method(c.repair_method);
    o.efficiency = c.efficiency;
    o.solver.max_iterations = c.max_iterations;
    o.solver.convergence_tol = c.tolerance;
    return o;
}

std::vector<Anchor> anchors_for(const NetworkModel& model, const Config& c) {
    if (c.anchors.empty()) throw ValidationError("--anchors is required");
    auto a = parse_anchors(model, read_text_file(c.anchors));
    if (a.empty()) throw ValidationError("anchor file lists no anchors");
    return a;
}

bool decoupled(const Config& c) { return !c.plan.empty() || c.auto_partition > 0 || c.switch_partition; }

PartitionPlan plan_for(const NetworkModel& model, const Config& c) {
    const int modes = !c.plan.empty() + (c.auto_partition > 0) + c.switch_partition;
    if (modes > 1) throw ValidationError("choose one of --plan, --auto-partition-size, --switch-partition");
    PartitionPlan plan;
    if (!c.plan.empty()) return parse_plan(model, read_text_file(c.plan));
    plan = c.switch_partition ? separate_on_switches(model)
                              : separate(model, detect_topology(model), c.auto_partition);
    plan.policy = parse_tie_policy(c.tie_policy);
    return plan;
}

// Places anchors on a generated plan: anchor-file entries go to the
// sub-network holding them; remaining sub-networks get a simulated μPMU at
// their best-connected node, reading the truth angle when a state is given.
std::vector<std::string> attach_anchors(const NetworkModel& model, const Config& c, PartitionPlan& plan) {
    std::vector<std::string> notes;
    std::vector<int> sub_of(model.bus_count(), -1);
    for (std::size_t k = 0; k < plan.sub_networks.size(); ++k)
        for (int b : plan.sub_networks[k]) sub_of[b] = static_cast<int>(k);
    std::vector<char> has(plan.sub_networks.size(), 0);
    for (const auto& a : plan.anchors) has[a.sub] = 1;
    if (!c.anchors.empty())
        for (const auto& a : parse_anchors(model, read_text_file(c.anchors))) {
            const int k = sub_of[model.nodes()[a.node].bus];
            if (has[k]) continue;
            plan.anchors.push_back({k, a.node, a.angle_deg});
            has[k] = 1;
        }
    const auto truth = truth_for(model, c);
    for (const auto& p : propose_anchors(model, plan)) {
        if (has[p.sub]) continue;
        if (!truth)
            throw ValidationError("sub-network " + std::to_string(p.sub) + " has no anchor; add one to --anchors");
        plan.anchors.push_back({p.sub, p.node, std::arg((*truth)[p.node]) / kDeg});
        has[p.sub] = 1;
        notes.push_back("sub-network " + std::to_string(p.sub) + ": reference angle at " +
                        model.node_label(p.node) + " taken from the truth state");
    }
    std::sort(plan.anchors.begin(), plan.anchors.end(),
              [](const PlanAnchor& a, const PlanAnchor& b) { return a.sub < b.sub; });
    return notes;
}

void write_stats(const Config& c, const std::vector<Complex>& est, const std::vector<Complex>& truth) {
    const auto s = compute_error_stats(est, truth);
    write_artifact(c, "stats.json", stats_to_json(s));
    write_artifact(c, "histogram.csv", histogram_csv(s));
}

int cmd_synth(const Config& c) {
    const auto model = load_network(c.network);
    if (!c.measurements.empty()) throw ValidationError("synth writes measurements; it does not read them");
    const auto meas = synthesize_from(model, c);
    write_artifact(c, "measurements.json", measurements_to_json(model, meas));
    return kOk;
}

int cmd_estimate(const Config& c) {
    const auto model = load_network(c.network);
    const auto meas = measurements_for(model, c);
    const auto opts = options_for(c);
    const auto truth = truth_for(model, c);
    nlohmann::ordered_json report;
    std::vector<Complex> voltages;

    if (decoupled(c)) {
        auto plan = plan_for(model, c);
        auto notes = attach_anchors(model, c, plan);
        const auto res = estimate_decoupled(model, meas, plan, opts);
        voltages = res.voltages;
        report["mode"] = "decoupled";
        report["sub_networks"] = plan.sub_networks.size();
        auto subs = nlohmann::ordered_json::array();
        for (const auto& s : res.subs)
            subs.push_back({{"rank1_ratio", s.rank1_ratio},
                            {"objective", s.report.objective},
                            {"iterations", s.report.iterations},
                            {"status", to_string(s.report.status)},
                            {"pseudo_measurements", s.repairs.size()}});
        report["subs"] = subs;
        notes.insert(notes.end(), res.warnings.begin(), res.warnings.end());
        report["warnings"] = notes;
        write_artifact(c, "plan.json", plan_to_json(model, plan));
    } else {
        const auto res = estimate(model, meas, anchors_for(model, c), opts);
        voltages = res.voltages;
        report["mode"] = "monolithic";
        report["rank1_ratio"] = res.rank1_ratio;
        report["relaxed_rank1_ratio"] = res.report.relaxed_rank1_ratio;
        report["objective"] = res.report.objective;
        report["iterations"] = res.report.iterations;
        report["status"] = to_string(res.report.status);
        report["polished"] = res.report.polished;
        report["pseudo_measurements"] = res.repairs.size();
        report["warnings"] = res.warnings;
        write_artifact(c, "residuals.json", residuals_to_json(model, res.measurements, res.residuals));
    }
    write_artifact(c, "estimate.json", state_to_json(model, voltages));
    write_artifact(c, "estimate_report.json", report.dump(2) + "\n");
    if (truth) write_stats(c, voltages, *truth);
    return kOk;
}

int cmd_stats(const Config& c) {
    const auto model = load_network(c.network);
    if (c.estimate.empty() || c.state.empty()) throw ValidationError("stats needs --estimate and --state");
    const auto est = parse_state(model, read_text_file(c.estimate));
    const auto truth = parse_state(model, read_text_file(c.state));
    write_stats(c, est, truth);
    return kOk;
}

int cmd_partition(const Config& c) {
    const auto model = load_network(c.network);
    if (!c.plan.empty()) throw ValidationError("partition generates a plan; use --auto-partition-size or --switch-partition");
    if (c.auto_partition <= 0 && !c.switch_partition)
        throw ValidationError("give --auto-partition-size or --switch-partition");
    auto plan = plan_for(model, c);
    if (!c.anchors.empty() || !c.state.empty())
        attach_anchors(model, c, plan);
    else
        plan.anchors = propose_anchors(model, plan);
    validate_plan(model, plan);
    write_artifact(c, "plan.json", plan_to_json(model, plan));
    return kOk;
}

int cmd_observability(const Config& c) {
    const auto model = load_network(c.network);
    const auto meas = measurements_for(model, c);
    const auto report = analyze(model, meas);
    write_artifact(c, "observability.json", report_to_json(model, report));
    std::cout << "verdict: " << to_string(report.verdict) << "\n";
    return kOk;
}

int cmd_baddata(const Config& c) {
    const auto model = load_network(c.network);
    const auto raw = measurements_for(model, c);
    const auto pre = prefilter(raw);
    for (const auto& [m, why] : pre.removed)
        std::cout << "dropped " << measurement_label(model, m) << ": " << why << "\n";
    const auto& meas = pre.kept;
    const auto residuals = redundancy_residuals(model, meas);
    const auto suspects = detect(residuals, c.threshold);
    const auto id = identify_and_reestimate(model, meas, suspects, anchors_for(model, c), options_for(c),
                                            c.max_combinations);
    write_artifact(c, "baddata.json", bad_data_report_json(model, meas, residuals, suspects, id));
    write_artifact(c, "estimate.json", state_to_json(model, id.result.voltages));
    if (const auto truth = truth_for(model, c)) write_stats(c, id.result.voltages, *truth);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SDP-based state estimation for power distribution networks"};
    app.require_subcommand(1);
    Config c;

    auto common = [&](CLI::App* s) {
        s->add_option("--network", c.network, "Network JSON file")->required()->check(CLI::ExistingFile);
        s->add_option("--out", c.out, "Output directory")->capture_default_str();
    };
    auto source = [&](CLI::App* s) {
        s->add_option("--measurements", c.measurements, "Measurement JSON file");
        s->add_option("--state", c.state, "Truth state JSON file");
        s->add_option("--noise-level", c.noise_level, "Noise level for synthesis")->check(CLI::Range(0, 4));
        s->add_option("--seed", c.seed, "Seed for synthesis")->capture_default_str();
        s->add_option("--placement", c.placement, "one-sided or full")->capture_default_str();
        s->add_option("--vmag-bus", c.vmag_buses, "Buses with magnitude readings (default: all)");
    };
    auto solver = [&](CLI::App* s) {
        s->add_option("--anchors", c.anchors, "Anchor JSON file");
        s->add_flag("--no-repair", c.no_repair, "Skip observability repair");
        s->add_option("--repair-method", c.repair_method, "negate, efficiency or analytic")->capture_default_str();
        s->add_option("--efficiency", c.efficiency, "Line efficiency for the efficiency method")->capture_default_str();
        s->add_option("--max-iterations", c.max_iterations, "Barrier iteration cap")->capture_default_str();
        s->add_option("--tolerance", c.tolerance, "Relative duality gap to stop at")->capture_default_str();
    };
    auto partitioning = [&](CLI::App* s) {
        s->add_option("--plan", c.plan, "Partition plan JSON file");
        s->add_option("--auto-partition-size", c.auto_partition, "Target sub-network size d");
        s->add_flag("--switch-partition", c.switch_partition, "Split at switches");
        s->add_option("--tie-policy", c.tie_policy, "ignore or update")->capture_default_str();
    };

    auto* synth = app.add_subcommand("synth", "Synthesize measurements from a truth state");
    common(synth);
    source(synth);
    auto* est = app.add_subcommand("estimate", "Estimate the network state");
    common(est);
    source(est);
    solver(est);
    partitioning(est);
    auto* stats = app.add_subcommand("stats", "Error statistics of an estimate against the truth");
    common(stats);
    stats->add_option("--estimate", c.estimate, "Estimated state JSON file")->required();
    stats->add_option("--state", c.state, "Truth state JSON file")->required();
    auto* part = app.add_subcommand("partition", "Split the network into sub-networks");
    common(part);
    partitioning(part);
    part->add_option("--anchors", c.anchors, "Anchor JSON file");
    part->add_option("--state", c.state, "Truth state JSON file for simulated reference angles");
    auto* obs = app.add_subcommand("observability", "Structural observability report");
    common(obs);
    source(obs);
    auto* bad = app.add_subcommand("baddata", "Detect, identify and replace gross errors");
    common(bad);
    source(bad);
    solver(bad);
    bad->add_option("--threshold", c.threshold, "Normalized residual threshold")->capture_default_str();
    bad->add_option("--max-combinations", c.max_combinations, "Identification budget")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        if (*synth) return cmd_synth(c);
        if (*est) return cmd_estimate(c);
        if (*stats) return cmd_stats(c);
        if (*part) return cmd_partition(c);
        if (*obs) return cmd_observability(c);
        if (*bad) return cmd_baddata(c);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kValidation;
    } catch (const UnobservableError& e) {
        std::cerr << "unobservable: " << e.what() << "\n";
        return kUnobservable;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kSolver;
    } catch (const BudgetError& e) {
        std::cerr << "bad-data budget exceeded: " << e.what() << "\n";
        return kBudget;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}
