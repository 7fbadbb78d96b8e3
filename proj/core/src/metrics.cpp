#include "trafcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "trafcal/rng.hpp"

namespace trafcal {

namespace {

void check_pair(std::span<const double> simulated, std::span<const double> real) {
    if (simulated.size() != real.size())
        throw ValidationError("metric input vectors have different lengths");
    if (simulated.empty()) throw ValidationError("metric input vectors are empty");
}

double stddev(std::span<const double> values) {
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(values.size()));
}

std::ofstream open_csv(const std::string& directory, const std::string& name) {
    const auto path = std::filesystem::path(directory) / name;
    std::ofstream file(path);
    if (!file) throw Error("cannot write '" + path.string() + "'");
    return file;
}

std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : "undefined";
}

} // namespace

double mae(std::span<const double> simulated, std::span<const double> real) {
    check_pair(simulated, real);
    double sum = 0;
    for (std::size_t i = 0; i < real.size(); ++i) sum += std::abs(real[i] - simulated[i]);
    return sum / static_cast<double>(real.size());
}

double rmse(std::span<const double> simulated, std::span<const double> real) {
    check_pair(simulated, real);
    double sum = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
        const double d = real[i] - simulated[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(real.size()));
}

double geh(double simulated, double real) {
    const double denom = simulated + real;
    if (denom <= 0) return 0.0;
    const double diff = simulated - real;
    return std::sqrt(2.0 * diff * diff / denom);
}

std::vector<std::optional<double>> normalized_rmse_series(SeriesView view, Normalizer normalizer,
                                                          const CountSeries& real,
                                                          const CountSeries& simulated,
                                                          const std::vector<SensorIndex>& active) {
    const auto n_intervals = real.interval_count();
    std::vector<std::optional<double>> out;

    auto entry = [&](const std::vector<double>& y, const std::vector<double>& yhat)
        -> std::optional<double> {
        const double r = rmse(yhat, y);
        double norm = 0;
        if (normalizer == Normalizer::StdDevReal) {
            norm = stddev(y);
        } else {
            for (std::size_t i = 0; i < y.size(); ++i) norm += std::abs(y[i] - yhat[i]);
            norm /= static_cast<double>(y.size());
        }
        if (norm == 0) return std::nullopt;
        return r / norm;
    };

    if (view == SeriesView::BySensor) {
        for (SensorIndex s : active) {
            std::vector<double> y, yhat;
            for (std::int32_t i = 0; i < n_intervals; ++i) {
                y.push_back(static_cast<double>(real.at(s, i)));
                yhat.push_back(static_cast<double>(simulated.at(s, i)));
            }
            out.push_back(entry(y, yhat));
        }
    } else {
        for (std::int32_t i = 0; i < n_intervals; ++i) {
            std::vector<double> y, yhat;
            for (SensorIndex s : active) {
                y.push_back(static_cast<double>(real.at(s, i)));
                yhat.push_back(static_cast<double>(simulated.at(s, i)));
            }
            out.push_back(entry(y, yhat));
        }
    }
    return out;
}

ParetoChart pareto_bins(std::span<const double> values, double bin_width) {
    if (!(bin_width > 0)) throw ValidationError("pareto_bins: bin width must be positive");
    ParetoChart chart;
    if (values.empty()) return chart;

    std::vector<std::pair<std::int64_t, std::int64_t>> counts; // (bin index, count)
    for (double v : values) {
        const auto bin = static_cast<std::int64_t>(std::floor(v / bin_width));
        auto it = std::find_if(counts.begin(), counts.end(),
                               [bin](const auto& c) { return c.first == bin; });
        if (it == counts.end())
            counts.push_back({bin, 1});
        else
            ++it->second;
    }
    std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    const double total = static_cast<double>(values.size());
    double running = 0;
    for (const auto& [bin, count] : counts) {
        chart.bins.push_back(
            {static_cast<double>(bin) * bin_width, static_cast<double>(bin + 1) * bin_width, count});
        running += static_cast<double>(count);
        chart.cumulative_percent.push_back(100.0 * running / total);
    }
    return chart;
}

std::vector<FoldSplit> make_folds(std::int32_t sensor_count, int k, std::uint64_t seed) {
    if (k < 1) throw ValidationError("make_folds: k must be >= 1");
    if (sensor_count < k)
        throw ValidationError("make_folds: need at least k sensors, got " +
                              std::to_string(sensor_count));
    std::vector<FoldSplit> folds;
    const auto n_train =
        static_cast<std::size_t>(round_half_away_from_zero(0.7 * static_cast<double>(sensor_count)));
    for (int f = 0; f < k; ++f) {
        Rng rng(Rng::derive_seed(seed, static_cast<std::uint64_t>(f), 0x666f6c64));
        std::vector<SensorIndex> order(static_cast<std::size_t>(sensor_count));
        for (std::int32_t i = 0; i < sensor_count; ++i) order[static_cast<std::size_t>(i)] = i;
        rng.shuffle(order);
        FoldSplit split;
        split.fold = f;
        split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(split.train.begin(), split.train.end());
        std::sort(split.test.begin(), split.test.end());
        folds.push_back(std::move(split));
    }
    return folds;
}

MetricReport compute_metric_report(const CountSeries& real, const CountSeries& simulated,
                                   const std::vector<SensorIndex>& active, double geh_threshold,
                                   double pareto_bin_width) {
    if (real.interval_count() != simulated.interval_count() ||
        real.sensor_count() != simulated.sensor_count())
        throw ValidationError("compute_metric_report: count series shapes differ");
    if (active.empty()) throw ValidationError("compute_metric_report: no active sensors");

    const auto n_intervals = real.interval_count();
    MetricReport report;
    report.active = active;
    report.geh_threshold = geh_threshold;

    std::vector<double> flat_y, flat_yhat;
    for (SensorIndex s : active) {
        std::vector<double> y, yhat;
        for (std::int32_t i = 0; i < n_intervals; ++i) {
            y.push_back(static_cast<double>(real.at(s, i)));
            yhat.push_back(static_cast<double>(simulated.at(s, i)));
            flat_y.push_back(y.back());
            flat_yhat.push_back(yhat.back());
        }
        report.mae_by_sensor.push_back(mae(yhat, y));
        report.rmse_by_sensor.push_back(rmse(yhat, y));
        std::vector<double> geh_row;
        for (std::int32_t i = 0; i < n_intervals; ++i) geh_row.push_back(geh(yhat[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)]));
        report.geh_values.push_back(std::move(geh_row));
    }

    for (std::int32_t i = 0; i < n_intervals; ++i) {
        std::vector<double> y, yhat;
        double real_total = 0, sim_total = 0;
        std::int64_t passing = 0;
        for (std::size_t a = 0; a < active.size(); ++a) {
            const SensorIndex s = active[a];
            y.push_back(static_cast<double>(real.at(s, i)));
            yhat.push_back(static_cast<double>(simulated.at(s, i)));
            real_total += y.back();
            sim_total += yhat.back();
            if (report.geh_values[a][static_cast<std::size_t>(i)] < geh_threshold) ++passing;
        }
        report.mae_by_interval.push_back(mae(yhat, y));
        report.rmse_by_interval.push_back(rmse(yhat, y));
        report.geh_pass_fraction.push_back(static_cast<double>(passing) /
                                           static_cast<double>(active.size()));
        report.real_volume.push_back(real_total);
        report.simulated_volume.push_back(sim_total);
    }

    report.nrmse_by_interval_stddev =
        normalized_rmse_series(SeriesView::ByInterval, Normalizer::StdDevReal, real, simulated, active);
    report.nrmse_by_interval_meandiff = normalized_rmse_series(
        SeriesView::ByInterval, Normalizer::MeanAbsDiff, real, simulated, active);
    report.nrmse_by_sensor_stddev =
        normalized_rmse_series(SeriesView::BySensor, Normalizer::StdDevReal, real, simulated, active);
    report.nrmse_by_sensor_meandiff =
        normalized_rmse_series(SeriesView::BySensor, Normalizer::MeanAbsDiff, real, simulated, active);

    report.pareto = pareto_bins(report.mae_by_sensor, pareto_bin_width);
    report.flat_mae = mae(flat_yhat, flat_y);
    report.flat_rmse = rmse(flat_yhat, flat_y);
    return report;
}

void write_metric_report(const MetricReport& report, const std::vector<Sensor>& sensors,
                         const Schedule& schedule, const std::string& directory) {
    std::filesystem::create_directories(directory);

    {
        auto file = open_csv(directory, "mae_by_sensor.csv");
        file << "sensor_id,mae,rmse,nrmse_stddev,nrmse_mean_abs_diff\n";
        for (std::size_t a = 0; a < report.active.size(); ++a) {
            file << sensors[static_cast<std::size_t>(report.active[a])].id << ','
                 << format_double(report.mae_by_sensor[a]) << ','
                 << format_double(report.rmse_by_sensor[a]) << ','
                 << format_optional(report.nrmse_by_sensor_stddev[a]) << ','
                 << format_optional(report.nrmse_by_sensor_meandiff[a]) << '\n';
        }
    }
    {
        auto file = open_csv(directory, "rmse_by_interval.csv");
        file << "interval,interval_start_s,mae,rmse,nrmse_stddev,nrmse_mean_abs_diff\n";
        for (std::size_t i = 0; i < report.rmse_by_interval.size(); ++i) {
            file << i << ',' << schedule[i].start << ','
                 << format_double(report.mae_by_interval[i]) << ','
                 << format_double(report.rmse_by_interval[i]) << ','
                 << format_optional(report.nrmse_by_interval_stddev[i]) << ','
                 << format_optional(report.nrmse_by_interval_meandiff[i]) << '\n';
        }
    }
    {
        auto file = open_csv(directory, "geh_pass.csv");
        file << "interval,interval_start_s,geh_threshold,pass_fraction\n";
        for (std::size_t i = 0; i < report.geh_pass_fraction.size(); ++i)
            file << i << ',' << schedule[i].start << ',' << format_double(report.geh_threshold)
                 << ',' << format_double(report.geh_pass_fraction[i]) << '\n';
    }
    {
        auto file = open_csv(directory, "pareto.csv");
        file << "bin_low,bin_high,count,cumulative_pct\n";
        for (std::size_t b = 0; b < report.pareto.bins.size(); ++b) {
            const auto& bin = report.pareto.bins[b];
            file << format_double(bin.low) << ',' << format_double(bin.high) << ',' << bin.count
                 << ',' << format_double(report.pareto.cumulative_percent[b]) << '\n';
        }
    }
    {
        auto file = open_csv(directory, "volumes.csv");
        file << "interval,interval_start_s,real_total,simulated_total\n";
        for (std::size_t i = 0; i < report.real_volume.size(); ++i)
            file << i << ',' << schedule[i].start << ',' << format_double(report.real_volume[i])
                 << ',' << format_double(report.simulated_volume[i]) << '\n';
    }
}

} // namespace trafcal
