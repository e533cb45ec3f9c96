#pragma once

// Flat `key = value` configuration files shared by the pipeline and the
// generator. Lines starting with '#' are comments.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "volcascade/synth.hpp"

namespace volcascade {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

struct PipelineConfig {
    double q = 3.0;
    double x_c = 1.0;
    int gap_minutes = 60;
    int horizon = 90;
    int alt_horizon = 120;
    int step = 1;
    int smooth_minutes = 15;
    int min_days = 30;
    double activity_floor = 3.0;
    std::string calendar;  // half-day dates, optional
    std::uint64_t seed = 42;
    // threshold calibration
    int pdf_bins_per_decade = 20;
    double pdf_lo = 1e-3;
    double pdf_hi = 1e2;
    double calibration_ratio = 2.0;
    bool use_calibrated_x_c = false;
    // ensemble reductions
    int bath_bins = 10;
    int activity_bins = 8;
    double eta_v = 3.0;
    double m_lo = -1.0;
    double m_hi = 2.5;
    double m_width = 0.25;
    int magnitude_window = 3;
    std::vector<int> resolution_steps;  // empty: no multi-resolution check
    std::vector<double> resolution_x_c;  // defaults to x_c for every step

    void validate() const;
    KeyValues to_key_values() const;
    static PipelineConfig from_key_values(const KeyValues& kv);
    std::string serialize() const { return format_key_values(to_key_values()); }
};

KeyValues to_key_values(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_key_values(const KeyValues& kv);

}  // namespace volcascade
