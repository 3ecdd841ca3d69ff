#include "sdpse/io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sdpse/error.hpp"

namespace sdpse {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ValidationError("write failed for " + path);
}

namespace {

json parse_array(std::string_view text, const char* what) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
    if (!j.is_array()) throw ValidationError(std::string(what) + ": expected a JSON array");
    return j;
}

void check_keys(const json& e, std::initializer_list<const char*> allowed, const char* what) {
    if (!e.is_object()) throw ValidationError(std::string(what) + ": entries must be objects");
    for (auto it = e.begin(); it != e.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) throw ValidationError(std::string(what) + ": unknown key '" + it.key() + "'");
    }
}

template <class T>
T field(const json& e, const char* key, const char* what) {
    if (!e.contains(key)) throw ValidationError(std::string(what) + ": missing '" + key + "'");
    try {
        return e.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string(what) + ": bad value for '" + key + "'");
    }
}

int node_of(const NetworkModel& model, const json& e, const char* bus_key, const char* phase_key,
            const char* what) {
    const auto bus = field<std::string>(e, bus_key, what);
    const auto ph = parse_phase(field<std::string>(e, phase_key, what));
    const auto n = model.node_index(bus, ph);
    if (!n) throw ValidationError(std::string(what) + ": unknown node " + bus + "." + phase_letter(ph));
    return *n;
}

std::string phase_str(Phase p) { return std::string(1, phase_letter(p)); }

}  // namespace

std::vector<Measurement> parse_measurements(const NetworkModel& model, std::string_view json_text) {
    const char* what = "measurement file";
    const auto j = parse_array(json_text, what);
    std::vector<Measurement> out;
    for (const auto& e : j) {
        check_keys(e, {"kind", "bus", "phase", "to_bus", "to_phase", "value", "sigma", "provenance"}, what);
        Measurement m;
        m.kind = parse_kind(field<std::string>(e, "kind", what));
        m.node = node_of(model, e, "bus", "phase", what);
        if (is_flow(m.kind))
            m.to_node = node_of(model, e, "to_bus", "to_phase", what);
        else if (e.contains("to_bus") || e.contains("to_phase"))
            throw ValidationError("measurement file: only flow readings take to_bus/to_phase");
        m.value = field<double>(e, "value", what);
        m.sigma = field<double>(e, "sigma", what);
        m.provenance = e.contains("provenance") ? parse_provenance(field<std::string>(e, "provenance", what))
                                                : Provenance::Real;
        out.push_back(m);
    }
    validate_measurements(model, out);
    return out;
}

std::string measurements_to_json(const NetworkModel& model, const std::vector<Measurement>& meas) {
    ojson j = ojson::array();
    for (const auto& m : meas) {
        const auto& n = model.nodes()[m.node];
        ojson e{{"kind", to_string(m.kind)}, {"bus", model.buses()[n.bus].id}, {"phase", phase_str(n.phase)}};
        if (is_flow(m.kind)) {
            const auto& t = model.nodes()[m.to_node];
            e["to_bus"] = model.buses()[t.bus].id;
            e["to_phase"] = phase_str(t.phase);
        }
        e["value"] = m.value;
        e["sigma"] = m.sigma;
        e["provenance"] = to_string(m.provenance);
        j.push_back(e);
    }
    return j.dump(2) + "\n";
}

std::vector<Complex> parse_state(const NetworkModel& model, std::string_view json_text) {
    const char* what = "state file";
    const auto j = parse_array(json_text, what);
    std::vector<Complex> v(model.node_count());
    std::vector<char> seen(model.node_count(), 0);
    for (const auto& e : j) {
        check_keys(e, {"bus", "phase", "mag_pu", "angle_deg"}, what);
        const int k = node_of(model, e, "bus", "phase", what);
        if (seen[k]) throw ValidationError("state file: duplicate node " + model.node_label(k));
        seen[k] = 1;
        const double mag = field<double>(e, "mag_pu", what);
        const double ang = field<double>(e, "angle_deg", what);
        if (!std::isfinite(mag) || !std::isfinite(ang) || mag < 0.0)
            throw ValidationError("state file: invalid phasor at " + model.node_label(k));
        v[k] = std::polar(mag, ang * std::numbers::pi / 180.0);
    }
    for (int k = 0; k < model.node_count(); ++k)
        if (!seen[k]) throw ValidationError("state file: node set mismatch, missing " + model.node_label(k));
    return v;
}

std::string state_to_json(const NetworkModel& model, const std::vector<Complex>& v) {
    if (static_cast<int>(v.size()) != model.node_count()) throw ValidationError("state size does not match network");
    ojson j = ojson::array();
    for (int k = 0; k < model.node_count(); ++k) {
        const auto& n = model.nodes()[k];
        j.push_back({{"bus", model.buses()[n.bus].id},
                     {"phase", phase_str(n.phase)},
                     {"mag_pu", std::abs(v[k])},
                     {"angle_deg", std::arg(v[k]) * 180.0 / std::numbers::pi}});
    }
    return j.dump(2) + "\n";
}

std::vector<Anchor> parse_anchors(const NetworkModel& model, std::string_view json_text) {
    const char* what = "anchor file";
    const auto j = parse_array(json_text, what);
    std::vector<Anchor> out;
    for (const auto& e : j) {
        check_keys(e, {"bus", "phase", "angle_deg"}, what);
        Anchor a;
        a.node = node_of(model, e, "bus", "phase", what);
        a.angle_deg = e.contains("angle_deg") ? field<double>(e, "angle_deg", what) : 0.0;
        if (!std::isfinite(a.angle_deg)) throw ValidationError("anchor file: non-finite angle");
        out.push_back(a);
    }
    return out;
}

std::string anchors_to_json(const NetworkModel& model, const std::vector<Anchor>& anchors) {
    ojson j = ojson::array();
    for (const auto& a : anchors) {
        const auto& n = model.nodes()[a.node];
        j.push_back({{"bus", model.buses()[n.bus].id}, {"phase", phase_str(n.phase)}, {"angle_deg", a.angle_deg}});
    }
    return j.dump(2) + "\n";
}

std::string residuals_to_json(const NetworkModel& model, const std::vector<Measurement>& meas, const Residuals& r) {
    ojson j = ojson::array();
    for (std::size_t i = 0; i < r.raw.size() && i < meas.size(); ++i)
        j.push_back({{"measurement", measurement_label(model, meas[i])},
                     {"raw", r.raw[i]},
                     {"normalized", r.normalized[i]}});
    return j.dump(2) + "\n";
}

}  // namespace sdpse
