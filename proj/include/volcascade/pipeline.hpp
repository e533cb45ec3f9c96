#pragma once

// Ingestion, staged pipeline execution, reporting and run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "volcascade/config.hpp"
#include "volcascade/detector.hpp"
#include "volcascade/laws.hpp"
#include "volcascade/pdf.hpp"
#include "volcascade/series.hpp"

namespace volcascade {

inline constexpr const char* kToolVersion = "0.3.1";

struct IngestReport {
    std::size_t rows = 0;
    std::size_t symbols_seen = 0;
    std::vector<std::pair<std::string, double>> dropped_low_activity;  // symbol, mean trades/min
    std::map<std::string, double> mean_trades;  // retained symbols
    bool activity_filter_applied = false;
    std::size_t missing_symbol_days = 0;
    std::vector<std::string> half_days;
    std::vector<std::string> short_days_not_in_calendar;
};

struct Ingested {
    MinuteGrid grid;
    IngestReport report;
};

/// Reads the minute CSV (`date,minute,symbol,price[,trades]`) and an optional
/// half-day calendar (one ISO date per line). Throws InputError with the
/// offending line number on malformed or duplicate rows.
Ingested ingest(const std::string& csv_path, const std::string& calendar_path, const PipelineConfig& config);

/// Parses CSV text directly; `source` labels error messages.
Ingested ingest_text(const std::string& csv_text, const std::vector<std::string>& half_days,
                     const PipelineConfig& config, const std::string& source = "input");

std::vector<std::string> read_calendar(const std::string& path);

/// Writes a grid in the ingestion CSV format (rows ordered by date, minute,
/// symbol). Missing symbol-days produce no rows.
void write_grid_csv(const MinuteGrid& grid, const std::string& path);

struct MarketStockConsistency {
    std::string side;
    std::string parameter;
    double correlation = 0.0;
    std::size_t shocks = 0;
};

struct EnsembleLaws {
    std::optional<ProductivityFit> pi_b, pi_a;                  // market, log P vs M
    std::optional<ProductivityFit> pi_b_log_m, pi_a_log_m;      // market, log P vs log M
    std::optional<ProductivityFit> stock_pi_b, stock_pi_a;
    std::optional<BathFit> bath_b, bath_a;                      // market, proportional
    std::optional<BinnedBath> stock_bath_b, stock_bath_a;
    CrossoverScan crossover, crossover_b, crossover_a;          // per-stock rows
    std::map<int, std::optional<std::vector<Relation>>> relations;  // by horizon
    std::optional<TriggeringExponent> triggering;
    std::optional<std::vector<ActivityBucket>> activity;
    std::string activity_status;
    std::vector<MarketStockConsistency> market_stock;
};

struct StageCounts {
    std::size_t ingest_rows = 0;
    std::size_t symbols_retained = 0;
    std::size_t symbols_dropped_activity = 0;
    std::size_t symbols_dropped_variance = 0;
    std::size_t days = 0;
    std::size_t half_days = 0;
    std::size_t scored_samples = 0;
    std::size_t samples_above_xc = 0;
    std::size_t shocks_accepted = 0;
    std::map<std::string, std::size_t> shocks_rejected;
    std::size_t market_rows = 0;
    std::size_t market_no_fit_b = 0, market_no_fit_a = 0;
    std::size_t market_rows_alt = 0;
    std::size_t stock_rows = 0;
    std::size_t stock_no_fit_b = 0, stock_no_fit_a = 0;
    std::size_t stock_rows_zero_volatility = 0;
};

struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> inputs;   // name, sha256
    std::vector<std::pair<std::string, std::string>> outputs;  // file, sha256
    std::string completed_stage;
    StageCounts counts;

    /// Canonical JSON text; identical runs produce identical bytes.
    std::string to_json() const;
};

enum class Stage { ingest, detect, fit, laws, report };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct PipelineInputs {
    std::string csv_path;
    std::string calendar_path;  // may be empty
};

struct PipelineOutputs {
    IngestReport ingest;
    NormalizedVolatility normalized;
    ExceedancePanel exceedance;
    Detection detection;
    double x_c_used = 1.0;
    Calibration calibration;
    std::optional<Pdf> pdf_x, pdf_x_sh;
    std::vector<ShockLawRow> market_rows;
    std::vector<ShockLawRow> market_rows_alt;
    std::vector<ShockLawRow> stock_rows;
    EnsembleLaws ensemble;
    std::optional<ResolutionTable> resolution;
    StageCounts counts;
    std::vector<std::string> notes;
};

/// In-memory pipeline over an already ingested grid, up to `until`.
PipelineOutputs analyze(const Ingested& ingested, const PipelineConfig& config, Stage until = Stage::report,
                        unsigned threads = 1);

/// Same, starting from an already normalized panel (detect onwards). The
/// grid is only needed for the multi-resolution check and may be null.
PipelineOutputs analyze_normalized(NormalizedVolatility nv, const IngestReport& report, const PipelineConfig& config,
                                   Stage until = Stage::report, unsigned threads = 1,
                                   const MinuteGrid* grid = nullptr);

/// Law rows for accepted shocks of a detection (market and per stock).
void compute_law_rows(const PipelineConfig& config, const NormalizedVolatility& nv, const ExceedancePanel& panel,
                      const std::vector<ShockRecord>& shocks, PipelineOutputs& out, unsigned threads);

EnsembleLaws compute_ensemble(const PipelineConfig& config, const PipelineOutputs& out);

/// Ensemble law summary as written to ensemble.json.
std::string ensemble_json(const PipelineOutputs& out, const PipelineConfig& config);

/// Full run: ingest, analyze, write every stage's outputs and the manifest
/// into `out_dir`. On failure a FAILED marker naming the stage is written
/// and a StageError is thrown.
RunManifest run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs,
                         const std::filesystem::path& out_dir, Stage until = Stage::report, unsigned threads = 1);

/// Writes plot-data tables and the announcement-time fixture comparison.
/// Returns the files written (relative names).
std::vector<std::string> report(const PipelineOutputs& outputs, const PipelineConfig& config,
                                const std::filesystem::path& out_dir, const std::string& fixture_path = {});

/// Default location of the bundled announcement-time fixture.
std::string default_fixture_path();

struct FixtureRow {
    std::string date;  // ISO
    bool unscheduled = false;
    double rate_new = 0.0;
    double rate_change = 0.0;
    double relative_change = 0.0;
    int reported_t = 0;
    int published_t_c = 0;
};

std::vector<FixtureRow> read_fixture(const std::string& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace volcascade
