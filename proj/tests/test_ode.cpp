#include "doctest.h"

#include <cmath>
#include <random>

#include "lordsig/ode.hpp"
#include "support/ode_reference.hpp"
#include "support/oracles.hpp"

using namespace lordsig;
using namespace lordsig::ode;
using lordsig::nn::Tape;
using lordsig::nn::TapeBinder;
using lordsig::nn::Var;

namespace {

path::LogSignatureStream random_stream(std::mt19937_64& rng, std::size_t windows, int dim) {
    path::LogSignatureStream stream;
    stream.channels = dim;
    stream.depth = 1;
    stream.boundaries.push_back(0.0);
    for (std::size_t w = 0; w < windows; ++w) {
        std::vector<double> entry(static_cast<std::size_t>(dim));
        for (auto& x : entry) x = oracles::uniform_pm1(rng);
        stream.entries.push_back(std::move(entry));
        const double width = 0.5 + 0.5 * (oracles::uniform_pm1(rng) + 1.0);
        stream.durations.push_back(width);
        stream.boundaries.push_back(stream.boundaries.back() + width);
    }
    return stream;
}

path::LogSignatureStream scalar_stream(double total) {
    path::LogSignatureStream stream;
    stream.channels = 1;
    stream.depth = 1;
    stream.entries = {{total}};
    stream.durations = {1.0};
    stream.boundaries = {0.0, 1.0};
    return stream;
}

}  // namespace

TEST_CASE("identity field integrates any stream exactly") {
    std::mt19937_64 rng(31);
    const int dim = 3;
    auto stream = random_stream(rng, 5, dim);
    std::vector<double> z0{0.3, -0.8, 1.1};
    std::vector<double> expected = z0;
    for (const auto& entry : stream.entries)
        for (int j = 0; j < dim; ++j) expected[static_cast<std::size_t>(j)] += entry[static_cast<std::size_t>(j)];

    std::vector<double> identity_flat(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int j = 0; j < dim; ++j) identity_flat[static_cast<std::size_t>(j * dim + j)] = 1.0;

    for (Method m : {Method::euler, Method::midpoint, Method::rk4}) {
        for (int steps : {1, 3, 7}) {
            Tape tape;
            TapeBinder binder(tape);
            FieldFn field = [&](TapeBinder& b, Var) { return b.tape().constant(identity_flat); };
            Var zT = integrate_rde_taped(binder, field, dim, tape.constant(z0), stream,
                                         SolverConfig{m, steps});
            auto v = tape.value(zT);
            for (int j = 0; j < dim; ++j)
                CHECK(std::abs(v[static_cast<std::size_t>(j)] - expected[static_cast<std::size_t>(j)]) <= 1e-12);
        }
    }
}

TEST_CASE("zero field leaves the state at z0") {
    std::mt19937_64 rng(33);
    auto stream = random_stream(rng, 4, 2);
    auto net = nn::vf_init(3, 4, 1, 3, 2, 5);
    for (auto& w : net.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.v.begin(), b.v.end(), 0.0);
    const std::vector<double> z0{0.5, -0.5, 2.0};
    auto traj = integrate_rde(net, z0, stream, SolverConfig{Method::rk4, 2});
    REQUIRE(traj.states.size() == stream.count() + 1);
    for (const auto& state : traj.states)
        for (int j = 0; j < 3; ++j) CHECK(state[static_cast<std::size_t>(j)] == z0[static_cast<std::size_t>(j)]);
}

TEST_CASE("scalar linear field matches the closed-form growth factors") {
    const double a = 1.0;
    auto stream = scalar_stream(1.0);
    auto run = [&](Method m, int steps) {
        Tape tape;
        TapeBinder binder(tape);
        FieldFn field = [&](TapeBinder& b, Var z) { return b.tape().scale(a, z); };
        Var zT = integrate_rde_taped(binder, field, 1, tape.constant(std::vector<double>{1.0}),
                                     stream, SolverConfig{m, steps});
        return tape.value(zT)[0];
    };

    for (int n : {4, 8, 16}) {
        const double expected = std::pow(1.0 + a / n, n);
        CHECK(run(Method::euler, n) == doctest::Approx(expected).epsilon(1e-13));
    }

    // order of accuracy under step halving
    const double exact = std::exp(a);
    const double euler_ratio = std::abs(exact - run(Method::euler, 8)) /
                               std::abs(exact - run(Method::euler, 16));
    CHECK(euler_ratio >= 1.7);
    CHECK(euler_ratio <= 2.3);
    const double rk4_ratio = std::abs(exact - run(Method::rk4, 2)) /
                             std::abs(exact - run(Method::rk4, 4));
    CHECK(rk4_ratio >= 12.0);
    CHECK(rk4_ratio <= 20.0);
    CHECK(std::abs(run(Method::rk4, 8) - exact) <= 1e-5);
}

TEST_CASE("augmented integration decouples when components vanish") {
    std::mt19937_64 rng(47);
    const int control = 3, embed = 2, hidden = 2, recon = 4;
    auto stream = random_stream(rng, 3, control);
    auto f = nn::vf_init(embed, 4, 1, embed, control, 11);
    auto g = nn::vf_init(hidden, 4, 1, hidden, embed, 12);
    auto o = nn::vf_init(recon, 4, 1, recon, embed, 13);
    const std::vector<double> e0{0.2, -0.4};
    const std::vector<double> z0{1.0, 2.0};
    const std::vector<double> s0{0.1, 0.2, 0.3, 0.4};
    const SolverConfig cfg{Method::rk4, 3};

    SUBCASE("zero g and o freeze z and s while e follows the plain RDE") {
        auto gz = g, oz = o;
        for (auto& w : gz.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
        for (auto& b : gz.biases) std::fill(b.v.begin(), b.v.end(), 0.0);
        for (auto& w : oz.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
        for (auto& b : oz.biases) std::fill(b.v.begin(), b.v.end(), 0.0);
        auto traj = integrate_augmented(f, &gz, &oz, e0, z0, s0, stream, cfg);
        auto plain = integrate_rde(f, e0, stream, cfg);
        for (std::size_t w = 0; w < traj.states.size(); ++w) {
            for (int j = 0; j < hidden; ++j)
                CHECK(traj.states[w][static_cast<std::size_t>(j)] == z0[static_cast<std::size_t>(j)]);
            for (int j = 0; j < embed; ++j)
                CHECK(traj.states[w][static_cast<std::size_t>(hidden + j)] ==
                      doctest::Approx(plain.states[w][static_cast<std::size_t>(j)]).epsilon(1e-14));
            for (int j = 0; j < recon; ++j)
                CHECK(traj.states[w][static_cast<std::size_t>(hidden + embed + j)] ==
                      s0[static_cast<std::size_t>(j)]);
        }
    }
    SUBCASE("zero encoder freezes everything") {
        auto fz = f;
        for (auto& w : fz.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
        for (auto& b : fz.biases) std::fill(b.v.begin(), b.v.end(), 0.0);
        auto traj = integrate_augmented(fz, &g, &o, e0, z0, s0, stream, cfg);
        for (const auto& state : traj.states) {
            for (int j = 0; j < hidden; ++j)
                CHECK(state[static_cast<std::size_t>(j)] == z0[static_cast<std::size_t>(j)]);
            for (int j = 0; j < embed; ++j)
                CHECK(state[static_cast<std::size_t>(hidden + j)] == e0[static_cast<std::size_t>(j)]);
            for (int j = 0; j < recon; ++j)
                CHECK(state[static_cast<std::size_t>(hidden + embed + j)] == s0[static_cast<std::size_t>(j)]);
        }
    }
}

TEST_CASE("stacked integration equals the two-pass reference on one grid") {
    std::mt19937_64 rng(53);
    const int control = 3, embed = 3, hidden = 4, recon = 5;
    auto stream = random_stream(rng, 4, control);
    auto f = nn::vf_init(embed, 6, 2, embed, control, 21);
    auto g = nn::vf_init(hidden, 6, 2, hidden, embed, 22);
    auto o = nn::vf_init(recon, 6, 2, recon, embed, 23);
    std::vector<double> e0{0.1, -0.2, 0.3};
    std::vector<double> z0{0.4, 0.3, -0.2, 0.6};
    std::vector<double> s0{0.0, 0.1, -0.1, 0.2, 0.05};

    for (Method m : {Method::euler, Method::midpoint, Method::rk4}) {
        const SolverConfig cfg{m, 3};
        auto stacked = integrate_augmented(f, &g, &o, e0, z0, s0, stream, cfg);
        auto reference = oracles::two_pass_reference(f, &g, &o, e0, z0, s0, stream, cfg);
        REQUIRE(stacked.states.size() == reference.e.size());
        for (std::size_t w = 0; w < stacked.states.size(); ++w) {
            for (int j = 0; j < hidden; ++j)
                CHECK(std::abs(stacked.states[w][static_cast<std::size_t>(j)] -
                               reference.z[w][static_cast<std::size_t>(j)]) <= 1e-12);
            for (int j = 0; j < embed; ++j)
                CHECK(std::abs(stacked.states[w][static_cast<std::size_t>(hidden + j)] -
                               reference.e[w][static_cast<std::size_t>(j)]) <= 1e-12);
            for (int j = 0; j < recon; ++j)
                CHECK(std::abs(stacked.states[w][static_cast<std::size_t>(hidden + embed + j)] -
                               reference.s[w][static_cast<std::size_t>(j)]) <= 1e-12);
        }
    }
}

TEST_CASE("solver gradients match finite differences") {
    std::mt19937_64 rng(61);
    const int dim = 4, control = 3;
    auto stream = random_stream(rng, 2, control);
    auto net = nn::vf_init(dim, 5, 2, dim, control, 77);
    const std::vector<double> z0{0.2, -0.1, 0.4, 0.3};

    for (int steps : {3, 6}) {
        nn::ParamRegistry reg;
        reg.add_net(net, "field");
        const SolverConfig cfg{Method::euler, steps};
        auto loss_fn = [](Tape& tape, const std::vector<Var>& bounds) {
            return tape.sq_norm(bounds.back());
        };
        auto result = integrate_with_grad(net, reg, z0, stream, cfg, loss_fn);

        // finite differences over every field parameter
        std::vector<double> theta;
        for (std::size_t s = 0; s < reg.size(); ++s)
            for (double x : reg.block(static_cast<int>(s)).v) theta.push_back(x);
        auto value = [&](std::span<const double> th) {
            std::size_t pos = 0;
            for (std::size_t s = 0; s < reg.size(); ++s)
                for (auto& x : reg.block(static_cast<int>(s)).v) x = th[pos++];
            auto traj = integrate_rde(net, z0, stream, cfg);
            double acc = 0.0;
            for (double x : traj.states.back()) acc += x * x;
            return acc;
        };
        auto fd = oracles::finite_difference_gradient(value, theta);
        value(theta);  // restore

        std::size_t pos = 0;
        for (const auto& g : result.grads)
            for (double x : g.v) CHECK(oracles::rel_error(x, fd[pos++]) <= 1e-4);
    }

    // the two step counts give genuinely different gradients
    nn::ParamRegistry reg;
    reg.add_net(net, "field");
    auto loss_fn = [](Tape& tape, const std::vector<Var>& bounds) {
        return tape.sq_norm(bounds.back());
    };
    auto g3 = integrate_with_grad(net, reg, z0, stream, SolverConfig{Method::euler, 3}, loss_fn);
    auto g6 = integrate_with_grad(net, reg, z0, stream, SolverConfig{Method::euler, 6}, loss_fn);
    bool different = false;
    for (std::size_t s = 0; s < g3.grads.size(); ++s)
        for (std::size_t i = 0; i < g3.grads[s].size(); ++i)
            if (g3.grads[s].v[i] != g6.grads[s].v[i]) different = true;
    CHECK(different);
}

TEST_CASE("depth-1 windows per segment reproduce the euler NCDE scheme") {
    std::mt19937_64 rng(71);
    const std::size_t n = 17;
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
    std::vector<double> raw(n * 2);
    for (auto& x : raw) x = oracles::uniform_pm1(rng);
    auto series = path::TimeSeriesPath::from_raw(times, raw, 2);
    auto basis = tensoralg::lyndon_basis(series.channels(), 1);
    auto net = nn::vf_init(3, 5, 1, 3, series.channels(), 91);
    const std::vector<double> z0{0.1, 0.2, -0.3};

    SUBCASE("P = 2, one euler step per window") {
        auto plan = path::plan_windows(series, 2);
        auto stream = path::logsig_stream(series, plan, basis);
        auto traj = integrate_rde(net, z0, stream, SolverConfig{Method::euler, 1});
        auto reference = oracles::ncde_euler_reference(net, z0, series);
        for (std::size_t j = 0; j < z0.size(); ++j)
            CHECK(std::abs(traj.states.back()[j] - reference[j]) <= 1e-12);
    }
    SUBCASE("wider windows with per-observation steps on window-linear data") {
        // observations linear within each window: the coarse stream carries
        // everything, so per-observation euler equals the raw-increment NCDE
        const int P = 5;
        std::vector<double> lin_raw(n * 2);
        std::vector<double> knot_x{0.0, 1.0, -0.5, 0.7, 0.7};  // 4 windows of 4 segments
        std::vector<double> knot_y{0.0, -0.6, -0.1, 0.9, -0.3};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t seg = std::min<std::size_t>(i / 4, knot_x.size() - 2);
            const double frac = static_cast<double>(i - seg * 4) / 4.0;
            lin_raw[2 * i] = knot_x[seg] + frac * (knot_x[seg + 1] - knot_x[seg]);
            lin_raw[2 * i + 1] = knot_y[seg] + frac * (knot_y[seg + 1] - knot_y[seg]);
        }
        auto lin_series = path::TimeSeriesPath::from_raw(times, lin_raw, 2);
        auto plan = path::plan_windows(lin_series, P);
        auto stream = path::logsig_stream(lin_series, plan, basis);
        auto traj = integrate_rde(net, z0, stream, SolverConfig{Method::euler, P - 1});
        auto reference = oracles::ncde_euler_reference(net, z0, lin_series);
        for (std::size_t j = 0; j < z0.size(); ++j)
            CHECK(std::abs(traj.states.back()[j] - reference[j]) <= 1e-12);
    }
}

TEST_CASE("divergence raises DivergenceError") {
    auto stream = scalar_stream(1.0);
    Tape tape;
    TapeBinder binder(tape);
    // strongly unstable linear feedback overflows within a few steps
    FieldFn field = [&](TapeBinder& b, Var z) { return b.tape().scale(1e200, z); };
    CHECK_THROWS_AS((void)integrate_rde_taped(binder, field, 1,
                                              tape.constant(std::vector<double>{1.0}), stream,
                                              SolverConfig{Method::euler, 8}),
                    DivergenceError);
}

TEST_CASE("trajectories optionally record every intermediate step state") {
    std::mt19937_64 rng(91);
    auto stream = random_stream(rng, 3, 2);
    auto net = nn::vf_init(2, 4, 1, 2, 2, 15);
    const std::vector<double> z0{0.1, -0.2};
    auto traj = integrate_rde(net, z0, stream, SolverConfig{Method::midpoint, 4}, true);
    CHECK(traj.states.size() == 4);       // boundaries
    CHECK(traj.step_states.size() == 12);  // 3 windows x 4 steps
    // the last recorded step state is the final boundary state
    for (std::size_t j = 0; j < z0.size(); ++j)
        CHECK(traj.step_states.back()[j] == traj.states.back()[j]);
}
