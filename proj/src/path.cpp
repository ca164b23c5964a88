#include "lordsig/path.hpp"

#include <algorithm>
#include <stdexcept>

namespace lordsig::path {

TimeSeriesPath TimeSeriesPath::from_raw(std::vector<double> times, std::vector<double> raw,
                                        int raw_channels) {
    if (raw_channels < 1) throw std::invalid_argument("TimeSeriesPath: need at least one raw channel");
    if (times.size() < 2) throw std::invalid_argument("TimeSeriesPath: need at least two observations");
    if (raw.size() != times.size() * static_cast<std::size_t>(raw_channels))
        throw std::invalid_argument("TimeSeriesPath: value buffer does not match times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("TimeSeriesPath: non-monotone timestamps");

    TimeSeriesPath p;
    p.raw_channels = raw_channels;
    const double t0 = times.front();
    p.times = std::move(times);
    for (auto& t : p.times) t -= t0;
    const int d = p.channels();
    p.values.resize(p.times.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < p.times.size(); ++i) {
        for (int j = 0; j < raw_channels; ++j)
            p.values[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)] =
                raw[i * static_cast<std::size_t>(raw_channels) + static_cast<std::size_t>(j)];
        p.values[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(raw_channels)] = p.times[i];
    }
    return p;
}

WindowPlan plan_windows(const TimeSeriesPath& path, int P) {
    if (P < 2) throw std::invalid_argument("plan_windows: P must be >= 2");
    const std::size_t n = path.size();  // N + 1
    if (n < 2) throw std::invalid_argument("plan_windows: path too short");
    const std::size_t last = n - 1;  // N
    const std::size_t stride = static_cast<std::size_t>(P) - 1;

    WindowPlan plan;
    plan.obs_per_window = P;
    plan.boundaries.push_back(path.times[0]);
    std::size_t s = 0;
    while (s + stride <= last) {
        plan.starts.push_back(s);
        plan.ends.push_back(s + stride);
        plan.boundaries.push_back(path.times[s + stride]);
        s += stride;
    }
    if (s < last) {  // remainder kept as a shorter final window
        plan.starts.push_back(s);
        plan.ends.push_back(last);
        plan.boundaries.push_back(path.times[last]);
    }
    return plan;
}

LogSignatureStream logsig_stream(const TimeSeriesPath& path, const WindowPlan& plan,
                                 const tensoralg::LyndonBasis& basis) {
    if (basis.channels() != path.channels())
        throw std::invalid_argument("logsig_stream: basis channels do not match path");
    LogSignatureStream stream;
    stream.channels = path.channels();
    stream.depth = basis.depth();
    stream.boundaries = plan.boundaries;
    stream.entries.reserve(plan.count());
    stream.durations.reserve(plan.count());
    const int d = path.channels();
    for (std::size_t w = 0; w < plan.count(); ++w) {
        const std::size_t first = plan.starts[w];
        const std::size_t count = plan.ends[w] - plan.starts[w] + 1;
        std::span<const double> block{path.values.data() + first * static_cast<std::size_t>(d),
                                      count * static_cast<std::size_t>(d)};
        stream.entries.push_back(tensoralg::path_logsignature(block, basis).coeffs);
        stream.durations.push_back(plan.boundaries[w + 1] - plan.boundaries[w]);
    }
    return stream;
}

std::size_t LogSignatureStream::window_at(double t) const {
    const double t0 = boundaries.front();
    const double T = boundaries.back();
    if (t < t0 || t > T) throw std::out_of_range("LogSignatureStream: t outside [0, T]");
    if (t == T) return count() - 1;
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), t);
    return static_cast<std::size_t>(it - boundaries.begin()) - 1;
}

std::vector<double> control_derivative(const LogSignatureStream& stream, double t) {
    const std::size_t w = stream.window_at(t);
    std::vector<double> drift = stream.entries[w];
    const double inv = 1.0 / stream.durations[w];
    for (auto& x : drift) x *= inv;
    return drift;
}

}  // namespace lordsig::path
