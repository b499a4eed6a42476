#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sclab/manifold.hpp"

namespace sclab {

// Experiment driver: parses a versioned JSON config, runs one measurement
// pipeline, and persists CSV/JSON outputs together with a run manifest
// recording hashes, stage times and cache activity.  Outputs are
// deterministic for a fixed config (the runtime_ms column of the norm
// sidecar and manifest wall times are the documented exceptions).

enum class ExperimentKind {
    spectrum,
    opnorm,
    knapp_scan,
    beam_scan,
    kernel_decay,
    fit,
    classify
};

const char* experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

struct SpectrumParams {
    double lambda_max = 0.0;
};

struct WindowInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct OpnormParams {
    std::vector<WindowInterval> windows; // explicit windows
    // seeded random windows (flat models)
    long random_count = 0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double width = 1.0;
    std::vector<int> degrees; // sphere: single-degree windows
};

struct KnappScanParams {
    std::vector<long> k;
    std::vector<double> q;          // measured besides the always-present L^2
    std::array<std::int32_t, 3> direction{1, 0, 0};
    Point base{};
    double c0 = 0.25;                // window support radius
    double truncation_multiplier = 2.0;
    double tube_cbar = 0.25;
    double tube_radius_factor = 1.0; // radius = factor * sqrt(T / lambda)
    long grid_resolution = 0;        // 0: envelope policy
    bool export_modes = false;       // write one coefficient JSON per k
};

struct BeamScanParams {
    std::vector<int> l;
    std::vector<double> q;
    bool beams = true;
    bool zonal = true;
    double tube_exponent = -0.4;     // equatorial radius = lambda^exponent
    long grid_resolution = 0;
};

struct KernelDecayParams {
    std::vector<double> lambda;      // each > e, window width 1/log(lambda)
    int n = 2;
    double c0 = 0.25;
    double truncation_multiplier = 2.0;
};

struct FitParams {
    std::string input;               // scan CSV path
    double q = 6.0;
    int n = 2;
    bool free_fit = false;           // fit experiment only
    // imposed exponent; NaN means use mu(q, n)
    double a_fixed = std::numeric_limits<double>::quiet_NaN();
    std::string family;              // row filter when the CSV has families
};

struct ExperimentConfig {
    int schema = 1;
    ExperimentKind kind = ExperimentKind::spectrum;
    ManifoldModel model = ManifoldModel::torus(2);
    std::uint64_t seed = 0;
    std::string out_dir = "out";
    std::string prefix;              // defaults to the experiment name

    SpectrumParams spectrum;
    OpnormParams opnorm;
    KnappScanParams knapp;
    BeamScanParams beam;
    KernelDecayParams kernel;
    FitParams fit;

    std::string canonical_text;      // canonical JSON, hashed into the manifest
    std::string config_hash() const;
};

// Parses and fully validates a config; every numeric range is checked here,
// before any computation or file creation.
ExperimentConfig parse_config_text(const std::string& json_text);
ExperimentConfig parse_config_file(const std::string& path);

struct StageTime {
    std::string name;
    double wall_ms = 0.0;
};

struct OutputRecord {
    std::string path;     // relative to the output directory
    std::uint64_t bytes = 0;
    std::string digest;   // fnv1a of the file bytes, hex
};

struct RunManifest {
    std::string tool_version;
    std::string experiment;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<StageTime> stages;
    int cache_hits = 0;
    int cache_rebuilds = 0;
    int corrupt_rebuilds = 0;
    long resumed_rows = 0;
    long skipped_rows = 0;  // empty-window rows dropped from fits
    std::vector<OutputRecord> outputs;
    std::string path;       // manifest file location
};

// Executes the configured pipeline.  Scan experiments checkpoint each row
// in <prefix>.scan-manifest.json, so an interrupted run resumes without
// recomputing finished rows; on a module error all outputs written by this
// run are removed and the error is rethrown with the failing stage.
RunManifest run(const ExperimentConfig& config, int threads = 0);

// Materialized spectrum of [0, lambda_max), cached as JSON lines keyed by
// (manifold descriptor hash, lambda_max).  A corrupt cache file is rebuilt
// with a warning on stderr.
struct SpectrumCacheResult {
    std::vector<EigenIndex> modes;
    bool cache_hit = false;
    bool rebuilt_corrupt = false;
    std::string path;
};
SpectrumCacheResult cache_spectrum(const ManifoldModel& model, double lambda_max,
                                   const std::string& cache_dir);

const char* tool_version();

} // namespace sclab
