#ifndef LORDSIG_PATH_HPP
#define LORDSIG_PATH_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "lordsig/tensor_algebra.hpp"

namespace lordsig::path {

// A time series with the observation time appended as the last channel, so
// the stored observations are X(t_i) = (x_i, t_i) with d = raw_channels + 1.
// Times are strictly increasing and shifted so times[0] == 0.
struct TimeSeriesPath {
    int raw_channels = 0;
    std::vector<double> times;
    std::vector<double> values;  // size() x channels(), row-major

    int channels() const { return raw_channels + 1; }
    std::size_t size() const { return times.size(); }
    double duration() const { return times.back(); }
    std::span<const double> observation(std::size_t i) const {
        return {values.data() + i * static_cast<std::size_t>(channels()),
                static_cast<std::size_t>(channels())};
    }

    // Validates monotone times, shifts them to start at 0 and appends the
    // time channel. raw is size() x raw_channels row-major.
    static TimeSeriesPath from_raw(std::vector<double> times, std::vector<double> raw,
                                   int raw_channels);
};

// Consecutive windows of P observations, adjacent windows sharing one
// boundary observation; a non-tiling tail becomes a final shorter window.
struct WindowPlan {
    int obs_per_window = 0;               // P
    std::vector<std::size_t> starts;      // first observation index per window
    std::vector<std::size_t> ends;        // last observation index per window (inclusive)
    std::vector<double> boundaries;       // r_0 .. r_W, boundary observation times

    std::size_t count() const { return starts.size(); }
};

WindowPlan plan_windows(const TimeSeriesPath& path, int P);

// Per-window Lyndon-coordinate log-signatures plus window durations.
struct LogSignatureStream {
    int channels = 0;
    int depth = 0;
    std::vector<std::vector<double>> entries;  // count() x logsig_dim(channels, depth)
    std::vector<double> durations;             // r_{i+1} - r_i, strictly positive
    std::vector<double> boundaries;            // copied from the plan

    std::size_t count() const { return entries.size(); }
    double total_duration() const { return boundaries.back() - boundaries.front(); }

    // Index of the window whose half-open interval [r_i, r_{i+1}) contains t;
    // t == T maps to the last window. Throws outside [0, T].
    std::size_t window_at(double t) const;
};

LogSignatureStream logsig_stream(const TimeSeriesPath& path, const WindowPlan& plan,
                                 const tensoralg::LyndonBasis& basis);

// Piecewise-constant drift LogSig_i / (r_{i+1} - r_i) at time t.
std::vector<double> control_derivative(const LogSignatureStream& stream, double t);

}  // namespace lordsig::path

#endif
