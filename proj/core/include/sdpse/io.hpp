#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sdpse/estimate.hpp"
#include "sdpse/measurement.hpp"
#include "sdpse/network.hpp"

namespace sdpse {

/// Throws ValidationError when the file cannot be read or written.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

/// Array of {kind, bus, phase, to_bus?, to_phase?, value, sigma, provenance}.
std::vector<Measurement> parse_measurements(const NetworkModel& model, std::string_view json_text);
std::string measurements_to_json(const NetworkModel& model, const std::vector<Measurement>& meas);

/// Array of {bus, phase, mag_pu, angle_deg}, one entry per node of the model.
std::vector<Complex> parse_state(const NetworkModel& model, std::string_view json_text);
std::string state_to_json(const NetworkModel& model, const std::vector<Complex>& v);

/// Array of {bus, phase, angle_deg}.
std::vector<Anchor> parse_anchors(const NetworkModel& model, std::string_view json_text);
std::string anchors_to_json(const NetworkModel& model, const std::vector<Anchor>& anchors);

/// Per-measurement residuals as {measurement, raw, normalized}.
std::string residuals_to_json(const NetworkModel& model, const std::vector<Measurement>& meas, const Residuals& r);

}  // namespace sdpse
