#ifndef LORDSIG_LORD_HPP
#define LORDSIG_LORD_HPP

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lordsig/dataset.hpp"
#include "lordsig/nn.hpp"
#include "lordsig/ode.hpp"
#include "lordsig/path.hpp"

namespace lordsig::lord {

enum class Mode { lord, fine_tuning, co_train, co_train_wo_pre };
enum class Task { classification, regression };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

struct NetSpec {
    int hidden = 64;
    int layers = 2;
};

struct LordConfig {
    int depth_low = 1;   // D1
    int depth_high = 2;  // D2, strictly above D1
    int embed_dim = 0;   // 0 selects logsig_dim(d, D1)
    int hidden_dim = 32;
    NetSpec encoder;   // f
    NetSpec main_net;  // g
    NetSpec decoder;   // o
    double c_ae = 1e-6;
    double c_e = 0.0;
    double c_task = 1e-6;
    int max_iter_ae = 400;
    int max_iter_task = 400;
    double learning_rate = 1e-3;
    int batch_size = 32;
    double co_train_ae_weight = 1.0;  // weight on the autoencoder loss in co-train modes
    Mode mode = Mode::lord;
    Task task = Task::classification;
    int num_classes = 2;
    ode::SolverConfig solver;

    void validate() const;
};

// Streams at both depths over one shared window plan, plus the augmented
// first observation X(0) the initial-value maps consume.
struct PreparedSample {
    path::LogSignatureStream low;
    path::LogSignatureStream high;
    std::vector<double> x0;
    double target = 0.0;
};

PreparedSample prepare_sample(const path::TimeSeriesPath& series, int P,
                              const tensoralg::LyndonBasis& low_basis,
                              const tensoralg::LyndonBasis& high_basis, double target);
std::vector<PreparedSample> prepare_split(const path::Dataset& dataset, path::Split split, int P,
                                          const tensoralg::LyndonBasis& low_basis,
                                          const tensoralg::LyndonBasis& high_basis);

// Encoder f, decoder o, main field g, the initial-value maps and the output
// layer, with parameter slots grouped by the two-phase training roles.
class LordModel {
public:
    LordModel(const LordConfig& cfg, int channels, std::uint64_t seed);
    LordModel(const LordModel&) = delete;
    LordModel& operator=(const LordModel&) = delete;

    const LordConfig& config() const { return cfg_; }
    int channels() const { return channels_; }
    int embed_dim() const { return encoder_.out_rows; }
    int recon_dim() const { return decoder_.out_rows; }
    int hidden_dim() const { return main_.out_rows; }

    nn::VectorFieldNet& encoder() { return encoder_; }
    nn::VectorFieldNet& main_field() { return main_; }
    nn::VectorFieldNet& decoder() { return decoder_; }
    nn::AffineMap& init_z() { return init_z_; }
    nn::AffineMap& init_e() { return init_e_; }
    nn::AffineMap& init_s() { return init_s_; }
    nn::AffineMap& output() { return output_; }
    const nn::VectorFieldNet& encoder() const { return encoder_; }
    const nn::VectorFieldNet& main_field() const { return main_; }
    const nn::VectorFieldNet& decoder() const { return decoder_; }
    const nn::AffineMap& init_z() const { return init_z_; }
    const nn::AffineMap& init_e() const { return init_e_; }
    const nn::AffineMap& init_s() const { return init_s_; }
    const nn::AffineMap& output() const { return output_; }

    nn::ParamRegistry& registry() { return registry_; }
    const nn::ParamRegistry& registry() const { return registry_; }
    const std::vector<int>& encoder_slots() const { return encoder_slots_; }  // f, phi_e
    const std::vector<int>& decoder_slots() const { return decoder_slots_; }  // o, phi_s
    const std::vector<int>& main_slots() const { return main_slots_; }        // g, phi_z, output

    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& snapshot);

private:
    LordConfig cfg_;
    int channels_;
    nn::VectorFieldNet encoder_, main_, decoder_;
    nn::AffineMap init_z_, init_e_, init_s_, output_;
    nn::ParamRegistry registry_;
    std::vector<int> encoder_slots_, decoder_slots_, main_slots_;
};

std::unique_ptr<LordModel> build_model(const LordConfig& cfg, int channels, std::uint64_t seed);

// Taped loss builders. Boundary embeddings are exposed for the embedding
// penalty and for the PCA export of d e(t).
nn::Var recon_loss_taped(nn::TapeBinder& binder, const LordModel& model,
                         const PreparedSample& sample, std::vector<nn::Var>* e_boundary = nullptr);
nn::Var ae_loss_taped(nn::TapeBinder& binder, const LordModel& model, const PreparedSample& sample);
nn::Var task_output_taped(nn::TapeBinder& binder, const LordModel& model,
                          const PreparedSample& sample);
nn::Var task_loss_taped(nn::TapeBinder& binder, const LordModel& model,
                        const PreparedSample& sample);

// Plain-value wrappers.
double recon_loss(const LordModel& model, const PreparedSample& sample);
double ae_loss(const LordModel& model, const PreparedSample& sample);
// Softmax probabilities for classification, a single value for regression.
std::vector<double> task_forward(const LordModel& model, const PreparedSample& sample);
// CE (clamped at 1e-12) or squared error, plus the c_TASK penalty on the
// main-phase parameters.
double task_loss(std::span<const double> prediction, double target, const LordModel& model);
// Boundary embeddings e(r_0..r_W) for a sample under the current encoder.
std::vector<std::vector<double>> encode_boundaries(const LordModel& model,
                                                   const PreparedSample& sample);

struct IterRecord {
    int iteration = 0;
    std::string phase;
    double loss = 0.0;
    double val_metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
    std::vector<IterRecord> history;
    int best_iteration = -1;
    double best_val_metric = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string note;
};

// Autoencoder pre-training: max_iter_ae Adam steps on L_AE touching only the
// encoder and decoder groups.
TrainReport pretrain(LordModel& model, const std::vector<PreparedSample>& train,
                     std::uint64_t seed);

// Main phase per the training mode: lord freezes the encoder and discards the
// decoder; fine_tuning lets L_TASK update the encoder too; the co_train modes
// optimize c_w * L_AE + L_TASK over every group. The best validation
// parameters are restored into the model before returning.
TrainReport train_main(LordModel& model, const std::vector<PreparedSample>& train,
                       const std::vector<PreparedSample>& val, std::uint64_t seed);

// Plain NRDE baseline: one field driven directly by the depth-D2 stream.
class NrdeModel {
public:
    NrdeModel(int channels, int depth, int hidden_dim, NetSpec field_spec, Task task,
              int num_classes, double c_task, double learning_rate, int batch_size,
              ode::SolverConfig solver, std::uint64_t seed);
    NrdeModel(const NrdeModel&) = delete;

    std::vector<double> forward(const PreparedSample& sample) const;
    nn::Var loss_taped(nn::TapeBinder& binder, const PreparedSample& sample) const;
    TrainReport train(const std::vector<PreparedSample>& train,
                      const std::vector<PreparedSample>& val, int iterations, std::uint64_t seed);

    nn::ParamRegistry& registry() { return registry_; }
    const nn::ParamRegistry& registry() const { return registry_; }
    Task task() const { return task_; }
    ode::SolverConfig solver() const { return solver_; }
    nn::VectorFieldNet& field() { return field_; }
    nn::AffineMap& init_z() { return init_z_; }
    nn::AffineMap& output() { return output_; }

private:
    Task task_;
    int num_classes_;
    double c_task_;
    double learning_rate_;
    int batch_size_;
    ode::SolverConfig solver_;
    nn::VectorFieldNet field_;
    nn::AffineMap init_z_, output_;
    nn::ParamRegistry registry_;
};

// DE-NRDE baseline: each depth-D2 log-signature is compressed by a
// feedforward map and the main field integrates the embedded stream.
class DeNrdeModel {
public:
    DeNrdeModel(int channels, int depth, double compression_ratio, int embed_hidden,
                int embed_layers, int hidden_dim, NetSpec field_spec, Task task, int num_classes,
                double c_task, double learning_rate, int batch_size, ode::SolverConfig solver,
                std::uint64_t seed);
    DeNrdeModel(const DeNrdeModel&) = delete;

    int embedded_dim() const { return embed_.out; }
    std::vector<double> forward(const PreparedSample& sample) const;
    nn::Var loss_taped(nn::TapeBinder& binder, const PreparedSample& sample) const;
    TrainReport train(const std::vector<PreparedSample>& train,
                      const std::vector<PreparedSample>& val, int iterations, std::uint64_t seed);

    nn::ParamRegistry& registry() { return registry_; }
    nn::Mlp& embedding() { return embed_; }
    nn::VectorFieldNet& field() { return field_; }
    nn::AffineMap& init_z() { return init_z_; }
    nn::AffineMap& output() { return output_; }
    Task task() const { return task_; }

private:
    nn::Var output_taped(nn::TapeBinder& binder, const PreparedSample& sample) const;
    Task task_;
    int num_classes_;
    double c_task_;
    double learning_rate_;
    int batch_size_;
    ode::SolverConfig solver_;
    nn::Mlp embed_;
    nn::VectorFieldNet field_;
    nn::AffineMap init_z_, output_;
    nn::ParamRegistry registry_;
};

// Parameter counts split the way reports quote them: decoder versus the rest.
struct ParamCounts {
    std::int64_t decoder = 0;
    std::int64_t rest = 0;
};
ParamCounts count_parameters(const LordModel& model);

}  // namespace lordsig::lord

#endif
