#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trafcal/counts.hpp"

namespace trafcal {

/// (1/n) sum |y_i - yhat_i|. Throws ValidationError on length mismatch or n == 0.
double mae(std::span<const double> simulated, std::span<const double> real);

/// sqrt((1/n) sum (y_i - yhat_i)^2). Same preconditions as mae.
double rmse(std::span<const double> simulated, std::span<const double> real);

/// GEH statistic sqrt(2 (yhat - y)^2 / (yhat + y)); defined as 0 when both
/// volumes are 0.
double geh(double simulated, double real);

enum class SeriesView { BySensor, ByInterval };
enum class Normalizer { StdDevReal, MeanAbsDiff };

/// Per-sensor or per-interval RMSE divided by the chosen normalizer computed
/// over the same slice; nullopt where the normalizer is zero.
std::vector<std::optional<double>> normalized_rmse_series(SeriesView view, Normalizer normalizer,
                                                          const CountSeries& real,
                                                          const CountSeries& simulated,
                                                          const std::vector<SensorIndex>& active);

struct ParetoBin {
    double low = 0;
    double high = 0;
    std::int64_t count = 0;
};

struct ParetoChart {
    std::vector<ParetoBin> bins;            // descending count, ties by ascending low edge
    std::vector<double> cumulative_percent; // aligned with bins, ends at 100
};

/// Histogram with edges at multiples of `bin_width`, ordered by descending
/// frequency, with the cumulative percentage curve.
ParetoChart pareto_bins(std::span<const double> values, double bin_width);

struct FoldSplit {
    int fold = 0;
    std::vector<SensorIndex> train; // ascending, round(0.7 n) entries
    std::vector<SensorIndex> test;  // ascending, the complement
};

/// k seeded independent 70/30 resamples of the sensor set (the folds are not
/// a partition: each fold redraws its own split).
std::vector<FoldSplit> make_folds(std::int32_t sensor_count, int k, std::uint64_t seed);

struct MetricReport {
    std::vector<SensorIndex> active;

    std::vector<double> mae_by_sensor;  // aligned with active
    std::vector<double> rmse_by_sensor; // aligned with active
    std::vector<double> mae_by_interval;
    std::vector<double> rmse_by_interval;
    std::vector<std::optional<double>> nrmse_by_interval_stddev;
    std::vector<std::optional<double>> nrmse_by_interval_meandiff;
    std::vector<std::optional<double>> nrmse_by_sensor_stddev;
    std::vector<std::optional<double>> nrmse_by_sensor_meandiff;

    std::vector<std::vector<double>> geh_values; // [active sensor][interval]
    std::vector<double> geh_pass_fraction;       // per interval, GEH < threshold
    double geh_threshold = 5.0;

    std::vector<double> real_volume;      // per interval, sum over active sensors
    std::vector<double> simulated_volume; // per interval

    ParetoChart pareto; // over per-sensor MAE values

    double flat_mae = 0;  // over all (active sensor, interval) cells
    double flat_rmse = 0;
};

MetricReport compute_metric_report(const CountSeries& real, const CountSeries& simulated,
                                   const std::vector<SensorIndex>& active, double geh_threshold = 5.0,
                                   double pareto_bin_width = 5.0);

/// Writes mae_by_sensor.csv, rmse_by_interval.csv, geh_pass.csv, pareto.csv
/// and volumes.csv into the directory.
void write_metric_report(const MetricReport& report, const std::vector<Sensor>& sensors,
                         const Schedule& schedule, const std::string& directory);

} // namespace trafcal
