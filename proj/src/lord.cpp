#include "lordsig/lord.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>

#include "lordsig/metrics.hpp"

namespace lordsig::lord {

using nn::Tape;
using nn::TapeBinder;
using nn::Tensor;
using nn::Var;

Mode parse_mode(const std::string& name) {
    if (name == "lord") return Mode::lord;
    if (name == "fine-tuning" || name == "fine_tuning") return Mode::fine_tuning;
    if (name == "co-train" || name == "co_train") return Mode::co_train;
    if (name == "co-train-wo-pre" || name == "co_train_wo_pre") return Mode::co_train_wo_pre;
    throw std::invalid_argument("unknown mode '" + name +
                                "' (lord, fine-tuning, co-train, co-train-wo-pre)");
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::lord: return "lord";
        case Mode::fine_tuning: return "fine-tuning";
        case Mode::co_train: return "co-train";
        case Mode::co_train_wo_pre: return "co-train-wo-pre";
    }
    return "?";
}

void LordConfig::validate() const {
    if (depth_low < 1 || depth_high <= depth_low || depth_high > 4)
        throw std::invalid_argument("LordConfig: need 1 <= D1 < D2 <= 4");
    if (c_ae < 0.0 || c_e < 0.0 || c_task < 0.0)
        throw std::invalid_argument("LordConfig: loss coefficients must be >= 0");
    if (max_iter_ae < 0 || max_iter_task < 0)
        throw std::invalid_argument("LordConfig: iteration budgets must be >= 0");
    if (hidden_dim < 1 || batch_size < 1 || learning_rate <= 0.0)
        throw std::invalid_argument("LordConfig: invalid training settings");
    if (task == Task::classification && num_classes < 2)
        throw std::invalid_argument("LordConfig: classification needs >= 2 classes");
}

namespace {

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t salt) {
    // splitmix64 step keeps per-component init streams independent
    std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int thread_budget() {
    if (const char* env = std::getenv("LORDSIG_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 4u));
}

// Runs fn(i) for i in [0, n); results must be written to per-index storage so
// the reduction order stays fixed.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const int budget = std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), n);
    if (budget <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(budget));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(budget));
    for (int t = 0; t < budget; ++t) {
        workers.emplace_back([&, t] {
            try {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<const Tensor*> blocks_of(const nn::ParamRegistry& registry, std::span<const int> slots) {
    std::vector<const Tensor*> out;
    out.reserve(slots.size());
    for (int s : slots) out.push_back(&registry.block(s));
    return out;
}

}  // namespace

PreparedSample prepare_sample(const path::TimeSeriesPath& series, int P,
                              const tensoralg::LyndonBasis& low_basis,
                              const tensoralg::LyndonBasis& high_basis, double target) {
    auto plan = path::plan_windows(series, P);
    PreparedSample s;
    s.low = path::logsig_stream(series, plan, low_basis);
    s.high = path::logsig_stream(series, plan, high_basis);
    s.x0.assign(series.observation(0).begin(), series.observation(0).end());
    s.target = target;
    return s;
}

std::vector<PreparedSample> prepare_split(const path::Dataset& dataset, path::Split split, int P,
                                          const tensoralg::LyndonBasis& low_basis,
                                          const tensoralg::LyndonBasis& high_basis) {
    const auto idx = dataset.indices(split);
    std::vector<PreparedSample> out(idx.size());
    parallel_for(idx.size(), [&](std::size_t k) {
        const auto& sample = dataset.samples[idx[k]];
        out[k] = prepare_sample(sample.series, P, low_basis, high_basis, sample.target);
    });
    return out;
}

LordModel::LordModel(const LordConfig& cfg, int channels, std::uint64_t seed)
    : cfg_(cfg), channels_(channels) {
    cfg_.validate();
    const int low_dim = static_cast<int>(tensoralg::logsig_dim(channels, cfg.depth_low));
    const int high_dim = static_cast<int>(tensoralg::logsig_dim(channels, cfg.depth_high));
    const int embed = cfg.embed_dim > 0 ? cfg.embed_dim : low_dim;
    if (cfg_.embed_dim == 0) cfg_.embed_dim = embed;

    encoder_ = nn::vf_init(embed, cfg.encoder.hidden, cfg.encoder.layers, embed, low_dim,
                           sub_seed(seed, 1));
    main_ = nn::vf_init(cfg.hidden_dim, cfg.main_net.hidden, cfg.main_net.layers, cfg.hidden_dim,
                        embed, sub_seed(seed, 2));
    decoder_ = nn::vf_init(high_dim, cfg.decoder.hidden, cfg.decoder.layers, high_dim, embed,
                           sub_seed(seed, 3));
    init_z_ = nn::affine_init(channels, cfg.hidden_dim, sub_seed(seed, 4));
    init_e_ = nn::affine_init(channels, embed, sub_seed(seed, 5));
    init_s_ = nn::affine_init(embed, high_dim, sub_seed(seed, 6));
    const int out_dim = cfg.task == Task::classification ? cfg.num_classes : 1;
    output_ = nn::affine_init(cfg.hidden_dim, out_dim, sub_seed(seed, 7));

    // declaration order fixes checkpoint layout: encoder, decoder, main
    registry_.add_net(encoder_, "encoder");
    registry_.add_affine(init_e_, "init_e");
    registry_.add_net(decoder_, "decoder");
    registry_.add_affine(init_s_, "init_s");
    registry_.add_net(main_, "main");
    registry_.add_affine(init_z_, "init_z");
    registry_.add_affine(output_, "output");

    for (std::size_t l = 0; l < encoder_.weights.size(); ++l) {
        encoder_slots_.push_back(registry_.slot_of(&encoder_.weights[l]));
        encoder_slots_.push_back(registry_.slot_of(&encoder_.biases[l]));
    }
    encoder_slots_.push_back(registry_.slot_of(&init_e_.weight));
    encoder_slots_.push_back(registry_.slot_of(&init_e_.bias));
    for (std::size_t l = 0; l < decoder_.weights.size(); ++l) {
        decoder_slots_.push_back(registry_.slot_of(&decoder_.weights[l]));
        decoder_slots_.push_back(registry_.slot_of(&decoder_.biases[l]));
    }
    decoder_slots_.push_back(registry_.slot_of(&init_s_.weight));
    decoder_slots_.push_back(registry_.slot_of(&init_s_.bias));
    for (std::size_t l = 0; l < main_.weights.size(); ++l) {
        main_slots_.push_back(registry_.slot_of(&main_.weights[l]));
        main_slots_.push_back(registry_.slot_of(&main_.biases[l]));
    }
    main_slots_.push_back(registry_.slot_of(&init_z_.weight));
    main_slots_.push_back(registry_.slot_of(&init_z_.bias));
    main_slots_.push_back(registry_.slot_of(&output_.weight));
    main_slots_.push_back(registry_.slot_of(&output_.bias));
}

std::unique_ptr<LordModel> build_model(const LordConfig& cfg, int channels, std::uint64_t seed) {
    return std::make_unique<LordModel>(cfg, channels, seed);
}

std::vector<std::vector<double>> LordModel::snapshot() const {
    std::vector<std::vector<double>> snap;
    snap.reserve(registry_.size());
    for (std::size_t s = 0; s < registry_.size(); ++s)
        snap.push_back(registry_.block(static_cast<int>(s)).v);
    return snap;
}

void LordModel::restore(const std::vector<std::vector<double>>& snapshot) {
    if (snapshot.size() != registry_.size())
        throw std::invalid_argument("LordModel::restore: snapshot does not match registry");
    for (std::size_t s = 0; s < registry_.size(); ++s)
        registry_.block(static_cast<int>(s)).v = snapshot[s];
}

Var recon_loss_taped(TapeBinder& binder, const LordModel& model, const PreparedSample& sample,
                     std::vector<Var>* e_boundary) {
    Tape& tape = binder.tape();
    Var x0 = tape.constant(sample.x0);
    Var e0 = nn::affine_taped(binder, model.init_e(), x0);
    Var s0 = nn::affine_taped(binder, model.init_s(), e0);
    auto vars = ode::integrate_augmented_taped(binder, model.encoder(), nullptr, &model.decoder(),
                                               e0, -1, s0, sample.low, model.config().solver);
    if (e_boundary != nullptr) *e_boundary = vars.e_boundary;

    const std::size_t windows = sample.high.count();
    std::vector<Var> terms;
    terms.reserve(windows);
    for (std::size_t w = 0; w < windows; ++w) {
        Var ds = tape.axpy(-1.0, vars.s_boundary[w], vars.s_boundary[w + 1]);
        Var target = tape.constant(sample.high.entries[w]);
        Var err = tape.axpy(-1.0, target, ds);
        terms.push_back(tape.sq_norm(err));
    }
    // divisor M = W - 1 as the loss is written; a single-window sample keeps
    // a unit divisor so a perfect reconstruction still reads zero
    const double m = std::max<double>(static_cast<double>(windows) - 1.0, 1.0);
    return tape.scale(1.0 / m, tape.add(terms));
}

Var ae_loss_taped(TapeBinder& binder, const LordModel& model, const PreparedSample& sample) {
    Tape& tape = binder.tape();
    std::vector<Var> e_boundary;
    Var loss = recon_loss_taped(binder, model, sample, &e_boundary);
    const auto& cfg = model.config();
    if (cfg.c_ae > 0.0) {
        std::vector<const Tensor*> blocks;
        for (int s : model.encoder_slots()) blocks.push_back(&model.registry().block(s));
        for (int s : model.decoder_slots()) blocks.push_back(&model.registry().block(s));
        loss = tape.axpy(cfg.c_ae, nn::l2_taped(binder, blocks), loss);
    }
    if (cfg.c_e > 0.0) {
        std::vector<Var> norms;
        norms.reserve(e_boundary.size());
        for (Var e : e_boundary) norms.push_back(tape.sq_norm(e));
        loss = tape.axpy(cfg.c_e, tape.mean(norms), loss);
    }
    return loss;
}

Var task_output_taped(TapeBinder& binder, const LordModel& model, const PreparedSample& sample) {
    Tape& tape = binder.tape();
    Var x0 = tape.constant(sample.x0);
    Var e0 = nn::affine_taped(binder, model.init_e(), x0);
    Var z0 = nn::affine_taped(binder, model.init_z(), x0);
    auto vars = ode::integrate_augmented_taped(binder, model.encoder(), &model.main_field(), nullptr,
                                               e0, z0, -1, sample.low, model.config().solver);
    return nn::affine_taped(binder, model.output(), vars.z_boundary.back());
}

Var task_loss_taped(TapeBinder& binder, const LordModel& model, const PreparedSample& sample) {
    Tape& tape = binder.tape();
    Var out = task_output_taped(binder, model, sample);
    const auto& cfg = model.config();
    Var loss;
    if (cfg.task == Task::classification) {
        loss = tape.softmax_cross_entropy(out, static_cast<int>(sample.target));
    } else {
        Var target = tape.scalar_constant(sample.target);
        loss = tape.sq_norm(tape.axpy(-1.0, target, out));
    }
    if (cfg.c_task > 0.0) {
        auto blocks = blocks_of(model.registry(), model.main_slots());
        loss = tape.axpy(cfg.c_task, nn::l2_taped(binder, blocks), loss);
    }
    return loss;
}

double recon_loss(const LordModel& model, const PreparedSample& sample) {
    Tape tape;
    TapeBinder binder(tape);
    return tape.scalar(recon_loss_taped(binder, model, sample));
}

double ae_loss(const LordModel& model, const PreparedSample& sample) {
    Tape tape;
    TapeBinder binder(tape);
    return tape.scalar(ae_loss_taped(binder, model, sample));
}

namespace {

std::vector<double> softmax(std::span<const double> logits) {
    double m = logits[0];
    for (double x : logits) m = std::max(m, x);
    double z = 0.0;
    std::vector<double> p(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - m);
        z += p[i];
    }
    for (auto& x : p) x /= z;
    return p;
}

}  // namespace

std::vector<double> task_forward(const LordModel& model, const PreparedSample& sample) {
    Tape tape;
    TapeBinder binder(tape);
    Var out = task_output_taped(binder, model, sample);
    auto v = tape.value(out);
    if (model.config().task == Task::classification) return softmax(v);
    return {v[0]};
}

double task_loss(std::span<const double> prediction, double target, const LordModel& model) {
    const auto& cfg = model.config();
    double data = 0.0;
    if (cfg.task == Task::classification) {
        const auto y = static_cast<std::size_t>(target);
        data = -std::log(std::max(prediction[y], 1e-12));
    } else {
        const double e = prediction[0] - target;
        data = e * e;
    }
    auto blocks = blocks_of(model.registry(), model.main_slots());
    return data + cfg.c_task * nn::l2_penalty(blocks);
}

std::vector<std::vector<double>> encode_boundaries(const LordModel& model,
                                                   const PreparedSample& sample) {
    Tape tape;
    TapeBinder binder(tape);
    Var x0 = tape.constant(sample.x0);
    Var e0 = nn::affine_taped(binder, model.init_e(), x0);
    auto vars = ode::integrate_augmented_taped(binder, model.encoder(), nullptr, nullptr, e0, -1, -1,
                                               sample.low, model.config().solver);
    std::vector<std::vector<double>> out;
    out.reserve(vars.e_boundary.size());
    for (Var e : vars.e_boundary) {
        auto v = tape.value(e);
        out.emplace_back(v.begin(), v.end());
    }
    return out;
}

namespace {

struct LoopSpec {
    std::string phase;
    int iterations = 0;
    double learning_rate = 1e-3;
    int batch_size = 32;
    std::vector<int> update_slots;
    std::function<Var(TapeBinder&, const PreparedSample&)> sample_loss;
    std::function<std::vector<double>(const PreparedSample&)> predict;  // empty -> no validation
    Task task = Task::classification;
};

double validation_metric(const LoopSpec& spec, const std::vector<PreparedSample>& val) {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> preds(val.size());
    parallel_for(val.size(), [&](std::size_t i) { preds[i] = spec.predict(val[i]); });
    if (spec.task == Task::classification) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            const auto& p = preds[i];
            const int arg = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            if (arg == static_cast<int>(val[i].target)) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(val.size());
    }
    std::vector<double> y(val.size()), yhat(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
        y[i] = val[i].target;
        yhat[i] = preds[i][0];
    }
    return eval::regression_metrics(y, yhat).get("r2");
}

TrainReport run_training_loop(nn::ParamRegistry& registry, const LoopSpec& spec,
                              const std::vector<PreparedSample>& train,
                              const std::vector<PreparedSample>& val, std::uint64_t seed,
                              std::vector<std::vector<double>>* best_snapshot) {
    TrainReport report;
    report.seed = seed;
    if (train.empty()) throw std::invalid_argument("training split is empty");
    const bool validate = static_cast<bool>(spec.predict);
    if (validate && val.empty()) throw std::invalid_argument("validation split is empty");

    nn::AdamOptimizer adam(spec.learning_rate, registry.size());
    std::mt19937_64 rng(sub_seed(seed, 0xba7c4));
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces an initial shuffle

    auto snapshot_all = [&] {
        std::vector<std::vector<double>> snap;
        snap.reserve(registry.size());
        for (std::size_t s = 0; s < registry.size(); ++s)
            snap.push_back(registry.block(static_cast<int>(s)).v);
        return snap;
    };
    if (best_snapshot != nullptr) *best_snapshot = snapshot_all();
    double best_metric = -std::numeric_limits<double>::infinity();

    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(spec.batch_size),
                                                    train.size());
    for (int iter = 1; iter <= spec.iterations; ++iter) {
        std::vector<std::size_t> picked(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor >= order.size()) {
                for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
                cursor = 0;
            }
            picked[b] = order[cursor++];
        }

        std::vector<double> losses(batch, 0.0);
        std::vector<std::vector<Tensor>> grads(batch);
        bool finite = true;
        std::string failure;
        try {
            parallel_for(batch, [&](std::size_t b) {
                Tape tape;
                TapeBinder binder(tape, registry);
                Var loss = spec.sample_loss(binder, train[picked[b]]);
                losses[b] = tape.scalar(loss);
                grads[b] = nn::grad(tape, loss, registry);
            });
        } catch (const std::runtime_error& e) {  // divergence; shape bugs still propagate
            finite = false;
            failure = e.what();
        }
        double mean_loss = 0.0;
        if (finite) {
            for (double l : losses) mean_loss += l;
            mean_loss /= static_cast<double>(batch);
            if (!std::isfinite(mean_loss)) {
                finite = false;
                failure = "non-finite batch loss";
            }
        }
        if (!finite) {
            report.diverged = true;
            report.note = "diverged at iteration " + std::to_string(iter) + ": " + failure;
            break;
        }

        auto total = registry.zero_grads();
        for (std::size_t b = 0; b < batch; ++b)  // fixed order keeps runs reproducible
            for (std::size_t s = 0; s < total.size(); ++s)
                for (std::size_t k = 0; k < total[s].size(); ++k)
                    total[s].v[k] += grads[b][s].v[k];
        const double inv = 1.0 / static_cast<double>(batch);
        for (auto& g : total)
            for (auto& x : g.v) x *= inv;
        adam.step(registry, total, spec.update_slots);

        IterRecord rec;
        rec.iteration = iter;
        rec.phase = spec.phase;
        rec.loss = mean_loss;
        if (validate) {
            rec.val_metric = validation_metric(spec, val);
            if (!std::isnan(rec.val_metric) && rec.val_metric > best_metric) {
                best_metric = rec.val_metric;
                report.best_iteration = iter;
                report.best_val_metric = rec.val_metric;
                if (best_snapshot != nullptr) *best_snapshot = snapshot_all();
            }
        }
        report.history.push_back(std::move(rec));
    }
    return report;
}

}  // namespace

TrainReport pretrain(LordModel& model, const std::vector<PreparedSample>& train,
                     std::uint64_t seed) {
    if (model.config().mode == Mode::co_train_wo_pre)
        throw std::logic_error("pretrain: mode co-train-wo-pre skips pre-training");
    LoopSpec spec;
    spec.phase = "pretrain";
    spec.iterations = model.config().max_iter_ae;
    spec.learning_rate = model.config().learning_rate;
    spec.batch_size = model.config().batch_size;
    spec.update_slots = model.encoder_slots();
    spec.update_slots.insert(spec.update_slots.end(), model.decoder_slots().begin(),
                             model.decoder_slots().end());
    spec.sample_loss = [&model](TapeBinder& binder, const PreparedSample& s) {
        return ae_loss_taped(binder, model, s);
    };
    return run_training_loop(model.registry(), spec, train, {}, seed, nullptr);
}

TrainReport train_main(LordModel& model, const std::vector<PreparedSample>& train,
                       const std::vector<PreparedSample>& val, std::uint64_t seed) {
    const auto& cfg = model.config();
    LoopSpec spec;
    spec.phase = "main";
    spec.iterations = cfg.max_iter_task;
    spec.learning_rate = cfg.learning_rate;
    spec.batch_size = cfg.batch_size;
    spec.task = cfg.task;

    spec.update_slots = model.main_slots();
    const bool co_train = cfg.mode == Mode::co_train || cfg.mode == Mode::co_train_wo_pre;
    if (cfg.mode == Mode::fine_tuning || co_train) {
        spec.update_slots.insert(spec.update_slots.end(), model.encoder_slots().begin(),
                                 model.encoder_slots().end());
    }
    if (co_train) {
        spec.update_slots.insert(spec.update_slots.end(), model.decoder_slots().begin(),
                                 model.decoder_slots().end());
    }

    if (co_train) {
        const double w = cfg.co_train_ae_weight;
        spec.sample_loss = [&model, w](TapeBinder& binder, const PreparedSample& s) {
            Var task = task_loss_taped(binder, model, s);
            Var ae = ae_loss_taped(binder, model, s);
            return binder.tape().axpy(w, ae, task);
        };
    } else {
        spec.sample_loss = [&model](TapeBinder& binder, const PreparedSample& s) {
            return task_loss_taped(binder, model, s);
        };
    }
    spec.predict = [&model](const PreparedSample& s) { return task_forward(model, s); };

    std::vector<std::vector<double>> best;
    TrainReport report = run_training_loop(model.registry(), spec, train, val, seed, &best);
    model.restore(best);
    return report;
}

NrdeModel::NrdeModel(int channels, int depth, int hidden_dim, NetSpec field_spec, Task task,
                     int num_classes, double c_task, double learning_rate, int batch_size,
                     ode::SolverConfig solver, std::uint64_t seed)
    : task_(task), num_classes_(num_classes), c_task_(c_task), learning_rate_(learning_rate),
      batch_size_(batch_size), solver_(solver) {
    const int control = static_cast<int>(tensoralg::logsig_dim(channels, depth));
    field_ = nn::vf_init(hidden_dim, field_spec.hidden, field_spec.layers, hidden_dim, control,
                         sub_seed(seed, 11));
    init_z_ = nn::affine_init(channels, hidden_dim, sub_seed(seed, 12));
    const int out_dim = task == Task::classification ? num_classes : 1;
    output_ = nn::affine_init(hidden_dim, out_dim, sub_seed(seed, 13));
    registry_.add_net(field_, "field");
    registry_.add_affine(init_z_, "init_z");
    registry_.add_affine(output_, "output");
}

namespace {

Var nrde_output_taped(TapeBinder& binder, const nn::VectorFieldNet& field,
                      const nn::AffineMap& init_z, const nn::AffineMap& output,
                      const path::LogSignatureStream& stream, std::span<const double> x0,
                      const ode::SolverConfig& solver) {
    Tape& tape = binder.tape();
    Var z0 = nn::affine_taped(binder, init_z, tape.constant(x0));
    ode::FieldFn fn = [&field](TapeBinder& b, Var s) { return ode::vf_field(b, field, s); };
    Var zT = ode::integrate_rde_taped(binder, fn, field.out_rows, z0, stream, solver);
    return nn::affine_taped(binder, output, zT);
}

}  // namespace

std::vector<double> NrdeModel::forward(const PreparedSample& sample) const {
    Tape tape;
    TapeBinder binder(tape);
    Var out = nrde_output_taped(binder, field_, init_z_, output_, sample.high, sample.x0, solver_);
    auto v = tape.value(out);
    if (task_ == Task::classification) return softmax(v);
    return {v[0]};
}

Var NrdeModel::loss_taped(TapeBinder& binder, const PreparedSample& sample) const {
    Tape& tape = binder.tape();
    Var out = nrde_output_taped(binder, field_, init_z_, output_, sample.high, sample.x0, solver_);
    Var loss;
    if (task_ == Task::classification) {
        loss = tape.softmax_cross_entropy(out, static_cast<int>(sample.target));
    } else {
        loss = tape.sq_norm(tape.axpy(-1.0, tape.scalar_constant(sample.target), out));
    }
    if (c_task_ > 0.0) {
        std::vector<const Tensor*> blocks;
        for (std::size_t s = 0; s < registry_.size(); ++s)
            blocks.push_back(&registry_.block(static_cast<int>(s)));
        loss = tape.axpy(c_task_, nn::l2_taped(binder, blocks), loss);
    }
    return loss;
}

TrainReport NrdeModel::train(const std::vector<PreparedSample>& train,
                             const std::vector<PreparedSample>& val, int iterations,
                             std::uint64_t seed) {
    LoopSpec spec;
    spec.phase = "main";
    spec.iterations = iterations;
    spec.learning_rate = learning_rate_;
    spec.batch_size = batch_size_;
    spec.task = task_;
    for (std::size_t s = 0; s < registry_.size(); ++s) spec.update_slots.push_back(static_cast<int>(s));
    spec.sample_loss = [this](TapeBinder& binder, const PreparedSample& s) {
        return loss_taped(binder, s);
    };
    spec.predict = [this](const PreparedSample& s) { return forward(s); };

    std::vector<std::vector<double>> best;
    TrainReport report = run_training_loop(registry_, spec, train, val, seed, &best);
    for (std::size_t s = 0; s < registry_.size(); ++s) registry_.block(static_cast<int>(s)).v = best[s];
    return report;
}

DeNrdeModel::DeNrdeModel(int channels, int depth, double compression_ratio, int embed_hidden,
                         int embed_layers, int hidden_dim, NetSpec field_spec, Task task,
                         int num_classes, double c_task, double learning_rate, int batch_size,
                         ode::SolverConfig solver, std::uint64_t seed)
    : task_(task), num_classes_(num_classes), c_task_(c_task), learning_rate_(learning_rate),
      batch_size_(batch_size), solver_(solver) {
    if (compression_ratio <= 0.0 || compression_ratio > 1.0)
        throw std::invalid_argument("DeNrdeModel: compression ratio must be in (0, 1]");
    const int high_dim = static_cast<int>(tensoralg::logsig_dim(channels, depth));
    const int embedded = static_cast<int>(std::ceil(compression_ratio * high_dim));
    embed_ = nn::mlp_init(high_dim, embed_hidden, embed_layers, embedded, sub_seed(seed, 21));
    field_ = nn::vf_init(hidden_dim, field_spec.hidden, field_spec.layers, hidden_dim, embedded,
                         sub_seed(seed, 22));
    init_z_ = nn::affine_init(channels, hidden_dim, sub_seed(seed, 23));
    const int out_dim = task == Task::classification ? num_classes : 1;
    output_ = nn::affine_init(hidden_dim, out_dim, sub_seed(seed, 24));
    registry_.add_mlp(embed_, "embed");
    registry_.add_net(field_, "field");
    registry_.add_affine(init_z_, "init_z");
    registry_.add_affine(output_, "output");
}

Var DeNrdeModel::output_taped(TapeBinder& binder, const PreparedSample& sample) const {
    Tape& tape = binder.tape();
    // embed every depth-D2 log-signature, then drive the field with the
    // embedded piecewise-constant control derivative
    std::vector<Var> drifts;
    drifts.reserve(sample.high.count());
    for (std::size_t w = 0; w < sample.high.count(); ++w) {
        Var entry = tape.constant(sample.high.entries[w]);
        Var embedded = nn::mlp_taped(binder, embed_, entry);
        drifts.push_back(tape.scale(1.0 / sample.high.durations[w], embedded));
    }
    Var z0 = nn::affine_taped(binder, init_z_, tape.constant(sample.x0));
    ode::FieldFn fn = [this](TapeBinder& b, Var s) { return ode::vf_field(b, field_, s); };
    Var zT = ode::integrate_rde_var_controls_taped(binder, fn, field_.out_rows, z0, drifts,
                                                   sample.high.durations, solver_);
    return nn::affine_taped(binder, output_, zT);
}

std::vector<double> DeNrdeModel::forward(const PreparedSample& sample) const {
    Tape tape;
    TapeBinder binder(tape);
    Var out = output_taped(binder, sample);
    auto v = tape.value(out);
    if (task_ == Task::classification) return softmax(v);
    return {v[0]};
}

Var DeNrdeModel::loss_taped(TapeBinder& binder, const PreparedSample& sample) const {
    Tape& tape = binder.tape();
    Var out = output_taped(binder, sample);
    Var loss;
    if (task_ == Task::classification) {
        loss = tape.softmax_cross_entropy(out, static_cast<int>(sample.target));
    } else {
        loss = tape.sq_norm(tape.axpy(-1.0, tape.scalar_constant(sample.target), out));
    }
    if (c_task_ > 0.0) {
        std::vector<const Tensor*> blocks;
        for (std::size_t s = 0; s < registry_.size(); ++s)
            blocks.push_back(&registry_.block(static_cast<int>(s)));
        loss = tape.axpy(c_task_, nn::l2_taped(binder, blocks), loss);
    }
    return loss;
}

TrainReport DeNrdeModel::train(const std::vector<PreparedSample>& train,
                               const std::vector<PreparedSample>& val, int iterations,
                               std::uint64_t seed) {
    LoopSpec spec;
    spec.phase = "main";
    spec.iterations = iterations;
    spec.learning_rate = learning_rate_;
    spec.batch_size = batch_size_;
    spec.task = task_;
    for (std::size_t s = 0; s < registry_.size(); ++s) spec.update_slots.push_back(static_cast<int>(s));
    spec.sample_loss = [this](TapeBinder& binder, const PreparedSample& s) {
        return loss_taped(binder, s);
    };
    spec.predict = [this](const PreparedSample& s) { return forward(s); };

    std::vector<std::vector<double>> best;
    TrainReport report = run_training_loop(registry_, spec, train, val, seed, &best);
    for (std::size_t s = 0; s < registry_.size(); ++s) registry_.block(static_cast<int>(s)).v = best[s];
    return report;
}

ParamCounts count_parameters(const LordModel& model) {
    ParamCounts counts;
    for (int s : model.decoder_slots())
        counts.decoder += static_cast<std::int64_t>(model.registry().block(s).size());
    for (std::size_t s = 0; s < model.registry().size(); ++s)
        counts.rest += static_cast<std::int64_t>(model.registry().block(static_cast<int>(s)).size());
    counts.rest -= counts.decoder;
    return counts;
}

}  // namespace lordsig::lord
