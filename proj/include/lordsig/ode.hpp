#ifndef LORDSIG_ODE_HPP
#define LORDSIG_ODE_HPP

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lordsig/nn.hpp"
#include "lordsig/path.hpp"

namespace lordsig::ode {

enum class Method { euler, midpoint, rk4 };

struct SolverConfig {
    Method method = Method::rk4;
    int steps_per_window = 4;
};

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// States observed at the window boundaries r_0..r_W (plus, optionally, every
// intermediate solver step).
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> step_states;  // filled when requested
};

// Drift rows for one state component: flat (rows x control_dim) matrix var.
using FieldFn = std::function<nn::Var(nn::TapeBinder&, nn::Var state)>;

nn::Var vf_field(nn::TapeBinder& binder, const nn::VectorFieldNet& net, nn::Var state);

// dz/dt = field(z) * stream_entry_i / duration_i on window i, integrated with
// steps_per_window fixed steps per window. Window-boundary state vars are
// returned in boundary_vars (size W + 1, starting with z0).
nn::Var integrate_rde_taped(nn::TapeBinder& binder, const FieldFn& field, int state_dim,
                            nn::Var z0, const path::LogSignatureStream& stream,
                            const SolverConfig& cfg,
                            std::vector<nn::Var>* boundary_vars = nullptr);

// Same dynamics but with per-window drifts that are themselves tape variables
// (already divided by the window width), as the DE-NRDE embedded stream needs.
nn::Var integrate_rde_var_controls_taped(nn::TapeBinder& binder, const FieldFn& field,
                                         int state_dim, nn::Var z0,
                                         std::span<const nn::Var> window_drifts,
                                         std::span<const double> durations,
                                         const SolverConfig& cfg,
                                         std::vector<nn::Var>* boundary_vars = nullptr);

// Plain-value integration of a vector-field net; throws DivergenceError on a
// non-finite boundary state.
Trajectory integrate_rde(const nn::VectorFieldNet& field, std::span<const double> z0,
                         const path::LogSignatureStream& stream, const SolverConfig& cfg,
                         bool record_steps = false);

// The coupled system driven by the shared embedding drift
//   de/dt = f(e) u,   dz/dt = g(z) (de/dt),   ds/dt = o(s) (de/dt)
// with u the piecewise-constant control derivative of the depth-D1 stream.
// Any of g or o may be omitted by passing nullptr; boundary states of every
// present component are recorded.
struct AugmentedVars {
    std::vector<nn::Var> e_boundary;
    std::vector<nn::Var> z_boundary;
    std::vector<nn::Var> s_boundary;
};

AugmentedVars integrate_augmented_taped(nn::TapeBinder& binder,
                                        const nn::VectorFieldNet& encoder,
                                        const nn::VectorFieldNet* main_net,
                                        const nn::VectorFieldNet* decoder, nn::Var e0, nn::Var z0,
                                        nn::Var s0, const path::LogSignatureStream& stream,
                                        const SolverConfig& cfg);

// Plain-value form of the above; states are the stacked (z, e, s) vectors at
// window boundaries in that order.
Trajectory integrate_augmented(const nn::VectorFieldNet& encoder,
                               const nn::VectorFieldNet* main_net,
                               const nn::VectorFieldNet* decoder, std::span<const double> e0,
                               std::span<const double> z0, std::span<const double> s0,
                               const path::LogSignatureStream& stream, const SolverConfig& cfg);

// Gradients of `loss(trajectory boundary vars)` with respect to every
// registered parameter, differentiating the discretized solution.
struct GradResult {
    Trajectory trajectory;
    double loss = 0.0;
    std::vector<nn::Tensor> grads;
};

GradResult integrate_with_grad(
    const nn::VectorFieldNet& field, nn::ParamRegistry& registry, std::span<const double> z0,
    const path::LogSignatureStream& stream, const SolverConfig& cfg,
    const std::function<nn::Var(nn::Tape&, const std::vector<nn::Var>&)>& loss_of_boundaries);

}  // namespace lordsig::ode

#endif
