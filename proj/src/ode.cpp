#include "lordsig/ode.hpp"

#include <algorithm>
#include <array>

namespace lordsig::ode {

using nn::Tape;
using nn::TapeBinder;
using nn::Var;

Method parse_method(const std::string& name) {
    if (name == "euler") return Method::euler;
    if (name == "midpoint") return Method::midpoint;
    if (name == "rk4") return Method::rk4;
    throw std::invalid_argument("unknown solver method '" + name + "' (euler, midpoint, rk4)");
}

std::string method_name(Method m) {
    switch (m) {
        case Method::euler: return "euler";
        case Method::midpoint: return "midpoint";
        case Method::rk4: return "rk4";
    }
    return "?";
}

Var vf_field(TapeBinder& binder, const nn::VectorFieldNet& net, Var state) {
    return nn::vf_forward_taped(binder, net, state);
}

namespace {

using States = std::vector<Var>;
using MultiRhs = std::function<States(const States&)>;

States axpy_all(Tape& tape, double k, const States& x, const States& y) {
    States out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = tape.axpy(k, x[i], y[i]);
    return out;
}

// One fixed step of the chosen scheme; the drift is constant within a window
// so the method only decides how many field evaluations each step costs.
States rk_step(Tape& tape, const MultiRhs& rhs, const States& state, double h, Method m) {
    switch (m) {
        case Method::euler: {
            return axpy_all(tape, h, rhs(state), state);
        }
        case Method::midpoint: {
            States k1 = rhs(state);
            States mid = axpy_all(tape, h / 2.0, k1, state);
            return axpy_all(tape, h, rhs(mid), state);
        }
        case Method::rk4: {
            States k1 = rhs(state);
            States k2 = rhs(axpy_all(tape, h / 2.0, k1, state));
            States k3 = rhs(axpy_all(tape, h / 2.0, k2, state));
            States k4 = rhs(axpy_all(tape, h, k3, state));
            States out(state.size());
            for (std::size_t i = 0; i < state.size(); ++i) {
                const std::array<Var, 4> terms{k1[i], tape.scale(2.0, k2[i]), tape.scale(2.0, k3[i]),
                                               k4[i]};
                out[i] = tape.axpy(h / 6.0, tape.add(terms), state[i]);
            }
            return out;
        }
    }
    throw std::logic_error("rk_step: unreachable");
}

// Drives `state` across every window; record(window_index, state) fires after
// each whole window (and once up front for the initial state).
void integrate_windows(Tape& tape, const path::LogSignatureStream& stream, const SolverConfig& cfg,
                       const std::function<MultiRhs(Var scaled_control)>& make_rhs, States& state,
                       const std::function<void(std::size_t, const States&)>& record,
                       const std::function<void(double, const States&)>* step_record = nullptr) {
    if (cfg.steps_per_window < 1)
        throw std::invalid_argument("SolverConfig: steps_per_window must be >= 1");
    record(0, state);
    for (std::size_t w = 0; w < stream.count(); ++w) {
        const double width = stream.durations[w];
        std::vector<double> drift = stream.entries[w];
        for (auto& x : drift) x /= width;
        const Var u = tape.constant(drift);
        MultiRhs rhs = make_rhs(u);
        const double h = width / cfg.steps_per_window;
        for (int s = 0; s < cfg.steps_per_window; ++s) {
            state = rk_step(tape, rhs, state, h, cfg.method);
            if (step_record != nullptr)
                (*step_record)(stream.boundaries[w] + h * (s + 1), state);
        }
        record(w + 1, state);
    }
}

void check_boundary_finite(const Tape& tape, const States& state) {
    for (Var v : state)
        if (!tape.finite(v)) throw DivergenceError("integration diverged (non-finite state)");
}

}  // namespace

Var integrate_rde_taped(TapeBinder& binder, const FieldFn& field, int state_dim, Var z0,
                        const path::LogSignatureStream& stream, const SolverConfig& cfg,
                        std::vector<Var>* boundary_vars) {
    Tape& tape = binder.tape();
    const int control_dim = static_cast<int>(stream.entries.front().size());
    States state{z0};
    auto make_rhs = [&](Var u) -> MultiRhs {
        return [&binder, &field, u, state_dim, control_dim](const States& s) -> States {
            Var flat = field(binder, s[0]);
            return {binder.tape().matvec(flat, u, state_dim, control_dim)};
        };
    };
    integrate_windows(tape, stream, cfg, make_rhs, state,
                      [&](std::size_t, const States& st) {
                          check_boundary_finite(tape, st);
                          if (boundary_vars != nullptr) boundary_vars->push_back(st[0]);
                      });
    return state[0];
}

Var integrate_rde_var_controls_taped(TapeBinder& binder, const FieldFn& field, int state_dim,
                                     Var z0, std::span<const Var> window_drifts,
                                     std::span<const double> durations, const SolverConfig& cfg,
                                     std::vector<Var>* boundary_vars) {
    Tape& tape = binder.tape();
    if (cfg.steps_per_window < 1)
        throw std::invalid_argument("SolverConfig: steps_per_window must be >= 1");
    if (window_drifts.size() != durations.size() || window_drifts.empty())
        throw std::invalid_argument("integrate_rde_var_controls: drift/duration mismatch");
    States state{z0};
    check_boundary_finite(tape, state);
    if (boundary_vars != nullptr) boundary_vars->push_back(state[0]);
    for (std::size_t w = 0; w < window_drifts.size(); ++w) {
        const Var u = window_drifts[w];
        const int control_dim = static_cast<int>(tape.value(u).size());
        MultiRhs rhs = [&binder, &field, u, state_dim, control_dim](const States& s) -> States {
            Var flat = field(binder, s[0]);
            return {binder.tape().matvec(flat, u, state_dim, control_dim)};
        };
        const double h = durations[w] / cfg.steps_per_window;
        for (int s = 0; s < cfg.steps_per_window; ++s) state = rk_step(tape, rhs, state, h, cfg.method);
        check_boundary_finite(tape, state);
        if (boundary_vars != nullptr) boundary_vars->push_back(state[0]);
    }
    return state[0];
}

Trajectory integrate_rde(const nn::VectorFieldNet& field, std::span<const double> z0,
                         const path::LogSignatureStream& stream, const SolverConfig& cfg,
                         bool record_steps) {
    Tape tape;
    TapeBinder binder(tape);
    if (field.in != static_cast<int>(z0.size()) || field.out_rows != field.in)
        throw std::invalid_argument("integrate_rde: field shape does not match state");
    if (field.out_cols != static_cast<int>(stream.entries.front().size()))
        throw std::invalid_argument("integrate_rde: field columns do not match stream entries");

    Trajectory traj;
    std::vector<Var> boundaries;
    FieldFn fn = [&field](TapeBinder& b, Var s) { return vf_field(b, field, s); };

    // replicate integrate_rde_taped but with optional step recording
    const int control_dim = static_cast<int>(stream.entries.front().size());
    States state{tape.constant(z0)};
    auto make_rhs = [&](Var u) -> MultiRhs {
        return [&binder, &fn, u, &field, control_dim](const States& s) -> States {
            Var flat = fn(binder, s[0]);
            return {binder.tape().matvec(flat, u, field.out_rows, control_dim)};
        };
    };
    std::function<void(double, const States&)> step_rec = [&](double t, const States& st) {
        traj.step_states.emplace_back(tape.value(st[0]).begin(), tape.value(st[0]).end());
        (void)t;
    };
    integrate_windows(tape, stream, cfg, make_rhs, state,
                      [&](std::size_t w, const States& st) {
                          check_boundary_finite(tape, st);
                          traj.times.push_back(stream.boundaries[w]);
                          auto v = tape.value(st[0]);
                          traj.states.emplace_back(v.begin(), v.end());
                      },
                      record_steps ? &step_rec : nullptr);
    return traj;
}

AugmentedVars integrate_augmented_taped(TapeBinder& binder, const nn::VectorFieldNet& encoder,
                                        const nn::VectorFieldNet* main_net,
                                        const nn::VectorFieldNet* decoder, Var e0, Var z0, Var s0,
                                        const path::LogSignatureStream& stream,
                                        const SolverConfig& cfg) {
    Tape& tape = binder.tape();
    const int control_dim = static_cast<int>(stream.entries.front().size());
    if (encoder.out_cols != control_dim)
        throw std::invalid_argument("integrate_augmented: encoder columns do not match stream");
    const int embed_dim = encoder.out_rows;
    if (main_net != nullptr && main_net->out_cols != embed_dim)
        throw std::invalid_argument("integrate_augmented: main field columns must equal embed dim");
    if (decoder != nullptr && decoder->out_cols != embed_dim)
        throw std::invalid_argument("integrate_augmented: decoder columns must equal embed dim");

    // Stacked right-hand side; the e component never reads z or s, which is
    // what makes the two-pass reference construction in the tests valid.
    States state;
    state.push_back(e0);
    if (main_net != nullptr) state.push_back(z0);
    if (decoder != nullptr) state.push_back(s0);

    auto make_rhs = [&](Var u) -> MultiRhs {
        return [&, u](const States& s) -> States {
            States out;
            Var f_flat = nn::vf_forward_taped(binder, encoder, s[0]);
            Var de = tape.matvec(f_flat, u, embed_dim, control_dim);
            out.push_back(de);
            std::size_t idx = 1;
            if (main_net != nullptr) {
                Var g_flat = nn::vf_forward_taped(binder, *main_net, s[idx]);
                out.push_back(tape.matvec(g_flat, de, main_net->out_rows, embed_dim));
                ++idx;
            }
            if (decoder != nullptr) {
                Var o_flat = nn::vf_forward_taped(binder, *decoder, s[idx]);
                out.push_back(tape.matvec(o_flat, de, decoder->out_rows, embed_dim));
            }
            return out;
        };
    };

    AugmentedVars vars;
    integrate_windows(tape, stream, cfg, make_rhs, state, [&](std::size_t, const States& st) {
        check_boundary_finite(tape, st);
        vars.e_boundary.push_back(st[0]);
        std::size_t idx = 1;
        if (main_net != nullptr) vars.z_boundary.push_back(st[idx++]);
        if (decoder != nullptr) vars.s_boundary.push_back(st[idx]);
    });
    return vars;
}

Trajectory integrate_augmented(const nn::VectorFieldNet& encoder, const nn::VectorFieldNet* main_net,
                               const nn::VectorFieldNet* decoder, std::span<const double> e0,
                               std::span<const double> z0, std::span<const double> s0,
                               const path::LogSignatureStream& stream, const SolverConfig& cfg) {
    Tape tape;
    TapeBinder binder(tape);
    Var e0v = tape.constant(e0);
    Var z0v = main_net != nullptr ? tape.constant(z0) : -1;
    Var s0v = decoder != nullptr ? tape.constant(s0) : -1;
    auto vars = integrate_augmented_taped(binder, encoder, main_net, decoder, e0v, z0v, s0v, stream, cfg);

    Trajectory traj;
    for (std::size_t w = 0; w < vars.e_boundary.size(); ++w) {
        traj.times.push_back(stream.boundaries[w]);
        std::vector<double> stacked;
        if (main_net != nullptr) {
            auto zv = tape.value(vars.z_boundary[w]);
            stacked.insert(stacked.end(), zv.begin(), zv.end());
        }
        auto ev = tape.value(vars.e_boundary[w]);
        stacked.insert(stacked.end(), ev.begin(), ev.end());
        if (decoder != nullptr) {
            auto sv = tape.value(vars.s_boundary[w]);
            stacked.insert(stacked.end(), sv.begin(), sv.end());
        }
        traj.states.push_back(std::move(stacked));
    }
    return traj;
}

GradResult integrate_with_grad(
    const nn::VectorFieldNet& field, nn::ParamRegistry& registry, std::span<const double> z0,
    const path::LogSignatureStream& stream, const SolverConfig& cfg,
    const std::function<Var(Tape&, const std::vector<Var>&)>& loss_of_boundaries) {
    Tape tape;
    TapeBinder binder(tape, registry);
    std::vector<Var> boundaries;
    FieldFn fn = [&field](TapeBinder& b, Var s) { return vf_field(b, field, s); };
    (void)integrate_rde_taped(binder, fn, field.out_rows, tape.constant(z0), stream, cfg, &boundaries);

    GradResult result;
    for (std::size_t w = 0; w < boundaries.size(); ++w) {
        result.trajectory.times.push_back(stream.boundaries[w]);
        auto v = tape.value(boundaries[w]);
        result.trajectory.states.emplace_back(v.begin(), v.end());
    }
    Var loss = loss_of_boundaries(tape, boundaries);
    result.loss = tape.scalar(loss);
    result.grads = nn::grad(tape, loss, registry);
    return result;
}

}  // namespace lordsig::ode
