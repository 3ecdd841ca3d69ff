#include "sdpse/bad_data.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "sdpse/error.hpp"

namespace sdpse {

std::string_view to_string(RedundancyResidual::Kind k) {
    switch (k) {
        case RedundancyResidual::Kind::NodeP: return "node_P";
        case RedundancyResidual::Kind::NodeQ: return "node_Q";
        case RedundancyResidual::Kind::Branch1: return "branch_1";
        case RedundancyResidual::Kind::Branch2: return "branch_2";
    }
    return "?";
}

PrefilterResult prefilter(const std::vector<Measurement>& meas) {
    PrefilterResult out;
    for (const auto& m : meas) {
        if (!std::isfinite(m.value) || !std::isfinite(m.sigma))
            out.removed.emplace_back(m, "non-finite value or sigma");
        else if (!(m.sigma > 0.0))
            out.removed.emplace_back(m, "non-positive sigma");
        else if (m.kind == MeasKind::Vmag && m.value <= 0.0)
            out.removed.emplace_back(m, "non-positive voltage magnitude");
        else
            out.kept.push_back(m);
    }
    return out;
}

namespace {

struct Index {
    std::map<std::tuple<MeasKind, int, int>, int> slot;
    int find(MeasKind k, int node, int to = -1) const {
        auto it = slot.find({k, node, to});
        return it == slot.end() ? -1 : it->second;
    }
};

Index index_of(const std::vector<Measurement>& meas) {
    Index ix;
    for (std::size_t i = 0; i < meas.size(); ++i) {
        const auto& m = meas[i];
        ix.slot.emplace(std::tuple{m.kind, m.node, is_flow(m.kind) ? m.to_node : -1}, static_cast<int>(i));
    }
    return ix;
}

double term_value(const Measurement& m, bool sq) { return sq ? m.value * m.value : m.value; }

double term_variance(const Measurement& m, bool sq) {
    const double s = sq ? 2.0 * m.value * m.sigma : m.sigma;
    return s * s;
}

void finish(RedundancyResidual& r, const std::vector<Measurement>& meas, VarianceMode mode) {
    double u = 0.0, var = 0.0, var_v = 0.0;
    for (std::size_t j = 0; j < r.members.size(); ++j) {
        const auto& m = meas[r.members[j]];
        u += r.coefs[j] * term_value(m, r.squared[j]);
        const double v = r.coefs[j] * r.coefs[j] * term_variance(m, r.squared[j]);
        if (r.squared[j])
            var_v += v;
        else
            var += v;
    }
    if (mode == VarianceMode::Printed && r.kind == RedundancyResidual::Kind::Branch2) {
        var -= var_v;
        if (!(var > 1e-18)) {
            var = 1e-18;
            r.floored = true;
        }
    } else {
        var += var_v;
    }
    r.u = u;
    r.sigma = std::sqrt(var);
    r.normalized = r.sigma > 0.0 ? u / r.sigma : (u == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
}

}  // namespace

std::vector<RedundancyResidual> redundancy_residuals(const NetworkModel& model, const std::vector<Measurement>& meas,
                                                     VarianceMode mode) {
    const auto ix = index_of(meas);
    std::vector<RedundancyResidual> out;

    // Node balance: injection plus every flow drawn at the node sums to zero.
    for (int k = 0; k < model.node_count(); ++k) {
        for (auto [inj, flow, kind] : {std::tuple{MeasKind::PInj, MeasKind::PFlow, RedundancyResidual::Kind::NodeP},
                                       std::tuple{MeasKind::QInj, MeasKind::QFlow, RedundancyResidual::Kind::NodeQ}}) {
            const int i = ix.find(inj, k);
            if (i < 0) continue;
            RedundancyResidual r{kind, k, 0.0, 0.0, 0.0, {i}, {1.0}, {0}, false};
            bool complete = true;
            for (int b : model.incident(k)) {
                const int f = ix.find(flow, k, model.other_end(b, k));
                if (f < 0) {
                    complete = false;
                    break;
                }
                r.members.push_back(f);
                r.coefs.push_back(1.0);
                r.squared.push_back(0);
            }
            if (!complete) continue;
            finish(r, meas, mode);
            out.push_back(std::move(r));
        }
    }

    // Branch identities with y = Ybus(l, m):
    //   Im(y)(P_lm + P_ml) + Re(y)(Q_lm + Q_ml) = 0
    //   Re(y)(P_lm - P_ml) - Im(y)(Q_lm - Q_ml) - |y|²(|V_l|² - |V_m|²) = 0
    for (int b : model.closed_branches()) {
        const auto& br = model.branches()[b];
        if (br.shunt_admittance != Complex{}) continue;
        const int l = br.from_node, m = br.to_node;
        const int plm = ix.find(MeasKind::PFlow, l, m), pml = ix.find(MeasKind::PFlow, m, l);
        const int qlm = ix.find(MeasKind::QFlow, l, m), qml = ix.find(MeasKind::QFlow, m, l);
        if (plm < 0 || pml < 0 || qlm < 0 || qml < 0) continue;
        const Complex y = -br.series_admittance;
        RedundancyResidual r1{RedundancyResidual::Kind::Branch1, b, 0.0, 0.0, 0.0,
                              {plm, pml, qlm, qml}, {y.imag(), y.imag(), y.real(), y.real()}, {0, 0, 0, 0}, false};
        finish(r1, meas, mode);
        out.push_back(std::move(r1));

        const int vl = ix.find(MeasKind::Vmag, l), vm = ix.find(MeasKind::Vmag, m);
        if (vl < 0 || vm < 0) continue;
        const double y2 = std::norm(y);
        RedundancyResidual r2{RedundancyResidual::Kind::Branch2, b, 0.0, 0.0, 0.0,
                              {plm, pml, qlm, qml, vl, vm},
                              {y.real(), -y.real(), -y.imag(), y.imag(), -y2, y2},
                              {0, 0, 0, 0, 1, 1}, false};
        finish(r2, meas, mode);
        out.push_back(std::move(r2));
    }
    return out;
}

std::vector<SuspectSet> detect(const std::vector<RedundancyResidual>& residuals, double threshold) {
    if (!(threshold > 0.0)) throw ValidationError("detection threshold must be positive");
    std::vector<SuspectSet> out;
    for (const auto& r : residuals)
        if (std::abs(r.normalized) > threshold) out.push_back(SuspectSet{r, r.members});
    return out;
}

std::vector<SuspectSet> detect(const NetworkModel& model, const std::vector<Measurement>& meas, double threshold,
                               VarianceMode mode) {
    return detect(redundancy_residuals(model, meas, mode), threshold);
}

Measurement recompute_from_identity(const NetworkModel& /*model*/, const std::vector<Measurement>& meas,
                                    const RedundancyResidual& identity, int target) {
    std::size_t t = identity.members.size();
    for (std::size_t j = 0; j < identity.members.size(); ++j)
        if (identity.members[j] == target) t = j;
    if (t == identity.members.size()) throw ValidationError("measurement is not part of the identity");
    double rest = 0.0, var = 0.0;
    for (std::size_t j = 0; j < identity.members.size(); ++j) {
        if (j == t) continue;
        const auto& m = meas[identity.members[j]];
        rest += identity.coefs[j] * term_value(m, identity.squared[j]);
        var += identity.coefs[j] * identity.coefs[j] * term_variance(m, identity.squared[j]);
    }
    const double c = identity.coefs[t];
    const double g = -rest / c;
    const double sd = std::sqrt(var) / std::abs(c);
    Measurement out = meas[target];
    out.provenance = Provenance::Pseudo;
    if (identity.squared[t]) {
        out.value = std::sqrt(std::max(g, 0.0));
        out.sigma = std::max(sd / (2.0 * std::max(out.value, 1e-6)), 1e-12);
    } else {
        out.value = g;
        out.sigma = std::max(sd, 1e-12);
    }
    return out;
}

double fit_error(const NetworkModel& model, const std::vector<Measurement>& meas, const std::vector<Complex>& v,
                 const std::vector<int>& skip) {
    const auto pred = regenerate(model, meas, v);
    const std::set<int> s(skip.begin(), skip.end());
    double f = 0.0;
    for (std::size_t i = 0; i < meas.size(); ++i) {
        if (s.count(static_cast<int>(i))) continue;
        const double d = (meas[i].value - pred[i]) / meas[i].sigma;
        f += d * d;
    }
    return f;
}

Identification identify_and_reestimate(const NetworkModel& model, const std::vector<Measurement>& meas,
                                       const std::vector<SuspectSet>& suspects, const std::vector<Anchor>& anchors,
                                       const EstimateOptions& opts, int max_combinations) {
    Identification id;
    if (suspects.empty()) {
        id.result = estimate(model, meas, anchors, opts);
        id.fit_error = fit_error(model, meas, id.result.voltages, {});
        id.combinations_evaluated = 1;
        id.fits.push_back(id.fit_error);
        return id;
    }
    long long total = 1;
    for (const auto& s : suspects) {
        total *= static_cast<long long>(s.members.size());
        if (total > max_combinations)
            throw BudgetError("bad-data identification needs more than " + std::to_string(max_combinations) +
                              " combinations; raise the detection threshold or the combination cap");
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(suspects.size(), 0);
    for (long long c = 0; c < total; ++c) {
        long long rem = c;
        for (std::size_t k = 0; k < suspects.size(); ++k) {
            pick[k] = static_cast<int>(rem % static_cast<long long>(suspects[k].members.size()));
            rem /= static_cast<long long>(suspects[k].members.size());
        }
        std::vector<Measurement> trial = meas;
        std::vector<int> replaced;
        for (std::size_t k = 0; k < suspects.size(); ++k) {
            const int target = suspects[k].members[pick[k]];
            if (std::find(replaced.begin(), replaced.end(), target) != replaced.end()) continue;
            trial[target] = recompute_from_identity(model, meas, suspects[k].trigger, target);
            replaced.push_back(target);
        }
        ++id.combinations_evaluated;
        try {
            auto res = estimate(model, trial, anchors, opts);
            const double f = fit_error(model, meas, res.voltages, replaced);
            id.fits.push_back(f);
            if (f < best) {
                best = f;
                id.culprits = replaced;
                id.result = std::move(res);
            }
        } catch (const UnobservableError&) {
            id.fits.push_back(std::numeric_limits<double>::infinity());
        } catch (const SolverError&) {
            id.fits.push_back(std::numeric_limits<double>::infinity());
        }
    }
    if (!std::isfinite(best)) throw SolverError("every bad-data hypothesis failed to estimate");
    id.fit_error = best;
    std::sort(id.culprits.begin(), id.culprits.end());
    return id;
}

std::string bad_data_report_json(const NetworkModel& model, const std::vector<Measurement>& meas,
                                 const std::vector<RedundancyResidual>& residuals,
                                 const std::vector<SuspectSet>& suspects, const Identification& id) {
    using oj = nlohmann::ordered_json;
    auto where = [&](const RedundancyResidual& r) {
        if (r.kind == RedundancyResidual::Kind::NodeP || r.kind == RedundancyResidual::Kind::NodeQ)
            return model.node_label(r.location);
        return model.branches()[r.location].id;
    };
    auto labels = [&](const std::vector<int>& ids) {
        auto a = oj::array();
        for (int i : ids) a.push_back(measurement_label(model, meas[i]));
        return a;
    };
    oj j;
    auto res = oj::array();
    for (const auto& r : residuals) {
        oj e{{"kind", to_string(r.kind)}, {"location", where(r)}, {"u", r.u}, {"sigma", r.sigma},
             {"normalized", r.normalized}};
        if (r.floored) e["variance_floored"] = true;
        res.push_back(e);
    }
    j["residuals"] = res;
    auto sus = oj::array();
    for (const auto& s : suspects)
        sus.push_back({{"trigger", {{"kind", to_string(s.trigger.kind)}, {"location", where(s.trigger)},
                                    {"normalized", s.trigger.normalized}}},
                       {"members", labels(s.members)}});
    j["suspects"] = sus;
    j["culprits"] = labels(id.culprits);
    j["combinations_evaluated"] = id.combinations_evaluated;
    j["fit_error"] = id.fit_error;
    return j.dump(2) + "\n";
}

}  // namespace sdpse
