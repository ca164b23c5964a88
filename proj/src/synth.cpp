#include "lordsig/synth.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "lordsig/tensor_algebra.hpp"

namespace lordsig::synth {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

// Boundary observation indices of plan_windows(P) on a length-n path.
std::vector<std::size_t> knot_indices(std::size_t n, int P) {
    const std::size_t last = n - 1;
    const std::size_t stride = static_cast<std::size_t>(P) - 1;
    std::vector<std::size_t> knots{0};
    std::size_t s = 0;
    while (s + stride <= last) {
        s += stride;
        knots.push_back(s);
    }
    if (knots.back() != last) knots.push_back(last);
    return knots;
}

// Signed (Levy) area of the polyline through the knots, relative to its
// starting point.
double polyline_area(const std::vector<double>& xy) {
    const std::size_t k = xy.size() / 2;
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        const double x = xy[2 * i] - xy[0];
        const double y = xy[2 * i + 1] - xy[1];
        const double dx = xy[2 * (i + 1)] - xy[2 * i];
        const double dy = xy[2 * (i + 1) + 1] - xy[2 * i + 1];
        area += 0.5 * (x * dy - y * dx);
    }
    return area;
}

std::vector<double> fill_linear(const std::vector<double>& knots_xy,
                                const std::vector<std::size_t>& knots, std::size_t n) {
    std::vector<double> raw(n * 2);
    for (std::size_t seg = 0; seg + 1 < knots.size(); ++seg) {
        const std::size_t a = knots[seg];
        const std::size_t b = knots[seg + 1];
        for (std::size_t i = a; i <= b; ++i) {
            const double frac = b == a ? 0.0 : static_cast<double>(i - a) / static_cast<double>(b - a);
            raw[2 * i] = knots_xy[2 * seg] + frac * (knots_xy[2 * (seg + 1)] - knots_xy[2 * seg]);
            raw[2 * i + 1] =
                knots_xy[2 * seg + 1] + frac * (knots_xy[2 * (seg + 1) + 1] - knots_xy[2 * seg + 1]);
        }
    }
    return raw;
}

path::Sample make_sample(std::string id, std::vector<double> raw, std::size_t n, double target) {
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
    path::Sample s;
    s.id = std::move(id);
    s.series = path::TimeSeriesPath::from_raw(std::move(times), std::move(raw), 2);
    s.target = target;
    return s;
}

std::string sample_id(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%04d", k);
    return buf;
}

}  // namespace

path::Dataset make_area_classification(const AreaTaskSpec& spec) {
    if (spec.length < spec.window_obs || spec.window_obs < 2)
        throw std::invalid_argument("make_area_classification: invalid length or window size");
    const std::size_t n = static_cast<std::size_t>(spec.length);
    const auto knots = knot_indices(n, spec.window_obs);
    const std::size_t k = knots.size();

    std::mt19937_64 rng(spec.seed);
    path::Dataset ds;
    ds.classification = true;
    ds.num_classes = 2;
    const int total = spec.n_train + spec.n_val + spec.n_test;
    for (int sample = 0; sample < total; ++sample) {
        std::vector<double> knots_xy;
        double area = 0.0;
        while (true) {
            const double radius = uniform(rng, 0.7, 1.3);
            const double phase = uniform(rng, 0.0, 2.0 * M_PI);
            const double direction = uniform01(rng) < 0.5 ? 1.0 : -1.0;
            const double sweep = direction * uniform(rng, 0.2 * M_PI, 1.7 * M_PI);
            knots_xy.assign(2 * k, 0.0);
            for (std::size_t i = 0; i < k; ++i) {
                const double angle = phase + sweep * static_cast<double>(i) / static_cast<double>(k - 1);
                knots_xy[2 * i] = radius * std::cos(angle) + spec.noise * radius * uniform(rng, -1.0, 1.0);
                knots_xy[2 * i + 1] =
                    radius * std::sin(angle) + spec.noise * radius * uniform(rng, -1.0, 1.0);
            }
            area = polyline_area(knots_xy);
            if (std::abs(area) > spec.margin * radius * radius) break;
        }
        auto s = make_sample(sample_id(sample), fill_linear(knots_xy, knots, n), n,
                             area > 0.0 ? 1.0 : 0.0);
        s.split = sample < spec.n_train              ? path::Split::train
                  : sample < spec.n_train + spec.n_val ? path::Split::val
                                                       : path::Split::test;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

path::Dataset make_logsig_regression(const ReconTaskSpec& spec) {
    if (spec.length < 2 || spec.knot_stride < 1)
        throw std::invalid_argument("make_logsig_regression: invalid spec");
    const std::size_t n = static_cast<std::size_t>(spec.length);
    std::vector<std::size_t> knots;
    for (std::size_t i = 0; i < n; i += static_cast<std::size_t>(spec.knot_stride)) knots.push_back(i);
    if (knots.back() != n - 1) knots.push_back(n - 1);

    // one fixed functional for the whole dataset
    auto basis = tensoralg::lyndon_basis(3, 2);
    std::mt19937_64 wrng(spec.seed ^ 0xf00dull);
    std::vector<double> weights(basis.size());
    for (auto& w : weights) w = uniform(wrng, -1.0, 1.0);

    std::mt19937_64 rng(spec.seed);
    path::Dataset ds;
    ds.classification = false;
    for (int sample = 0; sample < spec.n_samples; ++sample) {
        std::vector<double> knots_xy(2 * knots.size(), 0.0);
        double x = 0.0, y = 0.0;
        for (std::size_t i = 1; i < knots.size(); ++i) {
            x += uniform(rng, -1.0, 1.0);
            y += uniform(rng, -1.0, 1.0);
            knots_xy[2 * i] = x;
            knots_xy[2 * i + 1] = y;
        }
        auto raw = fill_linear(knots_xy, knots, n);
        auto s = make_sample(sample_id(sample), std::move(raw), n, 0.0);
        auto logsig = tensoralg::path_logsignature(s.series.values, basis);
        double target = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) target += weights[i] * logsig.coeffs[i];
        s.target = target / static_cast<double>(weights.size());
        const int n_train = (spec.n_samples * 7) / 10;
        const int n_val = (spec.n_samples * 15) / 100;
        s.split = sample < n_train          ? path::Split::train
                  : sample < n_train + n_val ? path::Split::val
                                             : path::Split::test;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

std::string format_double(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

void write_dataset(const std::filesystem::path& root, const path::Dataset& dataset) {
    std::filesystem::create_directories(root / "samples");
    std::ofstream labels(root / "labels.csv", std::ios::trunc);
    std::ofstream splits(root / "splits.csv", std::ios::trunc);
    labels << "id,target\n";
    splits << "id,split\n";
    for (const auto& s : dataset.samples) {
        const auto& p = s.series;
        std::ofstream f(root / "samples" / (s.id + ".csv"), std::ios::trunc);
        f << "t";
        for (int c = 1; c <= p.raw_channels; ++c) f << ",c" << c;
        f << "\n";
        for (std::size_t i = 0; i < p.size(); ++i) {
            f << format_double(p.times[i]);
            auto obs = p.observation(i);
            for (int c = 0; c < p.raw_channels; ++c)
                f << "," << format_double(obs[static_cast<std::size_t>(c)]);
            f << "\n";
        }
        labels << s.id << "," << format_double(s.target) << "\n";
        const char* split_name = s.split == path::Split::train ? "train"
                                 : s.split == path::Split::val ? "val"
                                                               : "test";
        splits << s.id << "," << split_name << "\n";
    }
}

}  // namespace lordsig::synth
