// Command-line front end: log-signature extraction, seeded training runs,
// checkpoint evaluation, config sweeps and the PCA export.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "lordsig/checkpoint.hpp"
#include "lordsig/dataset.hpp"
#include "lordsig/lord.hpp"
#include "lordsig/metrics.hpp"
#include "lordsig/pca.hpp"
#include "lordsig/synth.hpp"

namespace fs = std::filesystem;
using lordsig::synth::format_double;

namespace {

struct RunConfig {
    std::string dataset;
    std::string out = "out";
    std::string config_file;
    std::string checkpoint;
    int p = 32;
    int d1 = 1;
    int d2 = 2;
    int depth = 0;  // logsig command; 0 -> d2
    int embed_dim = 0;
    int hidden_dim = 32;
    int f_hidden = 32, f_layers = 1;
    int g_hidden = 32, g_layers = 2;
    int o_hidden = 32, o_layers = 1;
    double c_ae = 1e-6, c_e = 0.0, c_task = 1e-6;
    int max_iter_ae = 400, max_iter_task = 400;
    double lr = 1e-3;
    int batch = 32;
    double co_train_ae_weight = 1.0;
    std::string mode = "lord";
    std::string model = "lord";  // lord | nrde | de-nrde
    std::string task = "auto";   // auto | classification | regression
    std::string solver = "rk4";
    int steps = 4;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double ratio = 0.5;
    int emb_hidden = 64, emb_layers = 1;
    std::string axis;
    std::vector<std::string> values;
};

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

lordsig::lord::LordConfig to_lord_config(const RunConfig& cfg, bool classification, int classes) {
    lordsig::lord::LordConfig out;
    out.depth_low = cfg.d1;
    out.depth_high = cfg.d2;
    out.embed_dim = cfg.embed_dim;
    out.hidden_dim = cfg.hidden_dim;
    out.encoder = {cfg.f_hidden, cfg.f_layers};
    out.main_net = {cfg.g_hidden, cfg.g_layers};
    out.decoder = {cfg.o_hidden, cfg.o_layers};
    out.c_ae = cfg.c_ae;
    out.c_e = cfg.c_e;
    out.c_task = cfg.c_task;
    out.max_iter_ae = cfg.max_iter_ae;
    out.max_iter_task = cfg.max_iter_task;
    out.learning_rate = cfg.lr;
    out.batch_size = cfg.batch;
    out.co_train_ae_weight = cfg.co_train_ae_weight;
    out.mode = lordsig::lord::parse_mode(cfg.mode);
    out.task = classification ? lordsig::lord::Task::classification
                              : lordsig::lord::Task::regression;
    out.num_classes = classes;
    out.solver = {lordsig::ode::parse_method(cfg.solver), cfg.steps};
    return out;
}

bool resolve_classification(const RunConfig& cfg, const lordsig::path::Dataset& ds) {
    if (cfg.task == "classification") return true;
    if (cfg.task == "regression") return false;
    if (cfg.task == "auto") return ds.classification;
    fail("task must be auto, classification or regression (got '" + cfg.task + "')");
}

lordsig::path::Dataset load_and_normalize(const RunConfig& cfg) {
    if (cfg.dataset.empty()) fail("no dataset directory given (--dataset or config key)");
    auto ds = lordsig::path::load_dataset(cfg.dataset);
    for (const auto& warning : lordsig::path::normalize(ds)) std::cerr << "warning: " << warning << "\n";
    return ds;
}

// resolved settings in the same key = value format the --config flag reads
void write_config_echo(const RunConfig& cfg, const fs::path& out_dir) {
    std::ofstream f(out_dir / "run-config.txt", std::ios::trunc);
    f << "dataset = " << cfg.dataset << "\n"
      << "p = " << cfg.p << "\nd1 = " << cfg.d1 << "\nd2 = " << cfg.d2 << "\n"
      << "embed-dim = " << cfg.embed_dim << "\nhidden-dim = " << cfg.hidden_dim << "\n"
      << "f-hidden = " << cfg.f_hidden << "\nf-layers = " << cfg.f_layers << "\n"
      << "g-hidden = " << cfg.g_hidden << "\ng-layers = " << cfg.g_layers << "\n"
      << "o-hidden = " << cfg.o_hidden << "\no-layers = " << cfg.o_layers << "\n"
      << "c-ae = " << format_double(cfg.c_ae) << "\nc-e = " << format_double(cfg.c_e) << "\n"
      << "c-task = " << format_double(cfg.c_task) << "\n"
      << "max-iter-ae = " << cfg.max_iter_ae << "\nmax-iter-task = " << cfg.max_iter_task << "\n"
      << "lr = " << format_double(cfg.lr) << "\nbatch = " << cfg.batch << "\n"
      << "co-train-ae-weight = " << format_double(cfg.co_train_ae_weight) << "\n"
      << "mode = " << cfg.mode << "\nmodel = " << cfg.model << "\ntask = " << cfg.task << "\n"
      << "solver = " << cfg.solver << "\nsteps = " << cfg.steps << "\n"
      << "ratio = " << format_double(cfg.ratio) << "\n"
      << "emb-hidden = " << cfg.emb_hidden << "\nemb-layers = " << cfg.emb_layers << "\nseed =";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) f << (i ? "," : " ") << cfg.seeds[i];
    f << "\n";
}

// ---------------------------------------------------------------- logsig ---
void cmd_logsig(const RunConfig& cfg) {
    auto ds = load_and_normalize(cfg);
    const int depth = cfg.depth > 0 ? cfg.depth : cfg.d2;
    auto basis = lordsig::tensoralg::lyndon_basis(ds.channels(), depth);
    const fs::path out_dir = fs::path(cfg.out) / "logsig";
    fs::create_directories(out_dir);

    std::string header;
    for (std::size_t i = 0; i < basis.size(); ++i) {
        if (i) header += ",";
        header += "w";
        const auto& letters = basis.words()[i].letters;
        for (std::size_t j = 0; j < letters.size(); ++j)
            header += (j ? "." : "") + std::to_string(letters[j]);
    }

    for (const auto& sample : ds.samples) {
        auto plan = lordsig::path::plan_windows(sample.series, cfg.p);
        auto stream = lordsig::path::logsig_stream(sample.series, plan, basis);
        std::ofstream f(out_dir / (sample.id + ".csv"), std::ios::trunc);
        f << header << "\n";
        for (const auto& entry : stream.entries) {
            for (std::size_t i = 0; i < entry.size(); ++i) f << (i ? "," : "") << format_double(entry[i]);
            f << "\n";
        }
    }
    std::cout << "wrote " << ds.samples.size() << " stream files to " << out_dir.string() << "\n";
}

// ----------------------------------------------------------------- train ---
struct SeedOutcome {
    lordsig::eval::MetricReport metrics;
    bool diverged = false;
    std::string note;
};

void write_train_report(const fs::path& file, const lordsig::lord::TrainReport& pre,
                        const lordsig::lord::TrainReport& main) {
    std::ofstream f(file, std::ios::trunc);
    f << "iter,phase,loss,val_metric\n";
    auto dump = [&f](const lordsig::lord::TrainReport& r) {
        for (const auto& rec : r.history) {
            f << rec.iteration << "," << rec.phase << "," << format_double(rec.loss) << ",";
            if (!std::isnan(rec.val_metric)) f << format_double(rec.val_metric);
            f << "\n";
        }
    };
    dump(pre);
    dump(main);
}

void write_metrics_csv(const fs::path& file, const lordsig::eval::MetricReport& report,
                       std::uint64_t seed) {
    std::ofstream f(file, std::ios::trunc);
    f << "metric,seed,value\n";
    for (const auto& m : report.values)
        f << m.name << "," << seed << "," << (std::isnan(m.value) ? "nan" : format_double(m.value))
          << "\n";
}

lordsig::io::Checkpoint lord_checkpoint(const lordsig::lord::LordModel& model, const RunConfig& cfg,
                                        bool include_decoder) {
    lordsig::io::Checkpoint ckpt;
    const auto& c = model.config();
    ckpt.meta["kind"] = "lord";
    ckpt.meta["channels"] = std::to_string(model.channels());
    ckpt.meta["d1"] = std::to_string(c.depth_low);
    ckpt.meta["d2"] = std::to_string(c.depth_high);
    ckpt.meta["embed_dim"] = std::to_string(c.embed_dim);
    ckpt.meta["hidden_dim"] = std::to_string(c.hidden_dim);
    ckpt.meta["f_hidden"] = std::to_string(c.encoder.hidden);
    ckpt.meta["f_layers"] = std::to_string(c.encoder.layers);
    ckpt.meta["g_hidden"] = std::to_string(c.main_net.hidden);
    ckpt.meta["g_layers"] = std::to_string(c.main_net.layers);
    ckpt.meta["o_hidden"] = std::to_string(c.decoder.hidden);
    ckpt.meta["o_layers"] = std::to_string(c.decoder.layers);
    ckpt.meta["task"] = c.task == lordsig::lord::Task::classification ? "classification" : "regression";
    ckpt.meta["classes"] = std::to_string(c.num_classes);
    ckpt.meta["p"] = std::to_string(cfg.p);
    ckpt.meta["solver"] = lordsig::ode::method_name(c.solver.method);
    ckpt.meta["steps"] = std::to_string(c.solver.steps_per_window);
    ckpt.meta["mode"] = lordsig::lord::mode_name(c.mode);
    ckpt.meta["decoder_included"] = include_decoder ? "1" : "0";

    const auto& reg = model.registry();
    for (std::size_t s = 0; s < reg.size(); ++s) {
        const int slot = static_cast<int>(s);
        if (!include_decoder) {
            const auto& dec = model.decoder_slots();
            if (std::find(dec.begin(), dec.end(), slot) != dec.end()) continue;
        }
        const auto& block = reg.block(slot);
        ckpt.blocks.push_back({reg.name(slot), block.rows, block.cols, block.v});
    }
    return ckpt;
}

std::unique_ptr<lordsig::lord::LordModel> lord_from_checkpoint(const lordsig::io::Checkpoint& ckpt) {
    if (ckpt.meta_at("kind") != "lord") fail("checkpoint is not a lord model");
    lordsig::lord::LordConfig c;
    c.depth_low = std::stoi(ckpt.meta_at("d1"));
    c.depth_high = std::stoi(ckpt.meta_at("d2"));
    c.embed_dim = std::stoi(ckpt.meta_at("embed_dim"));
    c.hidden_dim = std::stoi(ckpt.meta_at("hidden_dim"));
    c.encoder = {std::stoi(ckpt.meta_at("f_hidden")), std::stoi(ckpt.meta_at("f_layers"))};
    c.main_net = {std::stoi(ckpt.meta_at("g_hidden")), std::stoi(ckpt.meta_at("g_layers"))};
    c.decoder = {std::stoi(ckpt.meta_at("o_hidden")), std::stoi(ckpt.meta_at("o_layers"))};
    c.task = ckpt.meta_at("task") == "classification" ? lordsig::lord::Task::classification
                                                      : lordsig::lord::Task::regression;
    c.num_classes = std::stoi(ckpt.meta_at("classes"));
    c.mode = lordsig::lord::parse_mode(ckpt.meta_at("mode"));
    c.solver = {lordsig::ode::parse_method(ckpt.meta_at("solver")),
                std::stoi(ckpt.meta_at("steps"))};
    auto model = lordsig::lord::build_model(c, std::stoi(ckpt.meta_at("channels")), 0);
    auto& reg = model->registry();
    for (std::size_t s = 0; s < reg.size(); ++s) {
        const auto* block = ckpt.find(reg.name(static_cast<int>(s)));
        if (block == nullptr) continue;  // decoder omitted from inference checkpoints
        auto& target = reg.block(static_cast<int>(s));
        if (block->rows != target.rows || block->cols != target.cols)
            fail("checkpoint block '" + reg.name(static_cast<int>(s)) + "' has mismatched shape");
        target.v = block->data;
    }
    return model;
}

lordsig::eval::MetricReport evaluate_predictions(
    bool classification, const std::vector<lordsig::lord::PreparedSample>& samples,
    const std::function<std::vector<double>(const lordsig::lord::PreparedSample&)>& predict) {
    if (classification) {
        std::vector<int> y;
        std::vector<std::vector<double>> probs;
        for (const auto& s : samples) {
            y.push_back(static_cast<int>(s.target));
            probs.push_back(predict(s));
        }
        return lordsig::eval::classification_metrics(y, probs);
    }
    std::vector<double> y, yhat;
    for (const auto& s : samples) {
        y.push_back(s.target);
        yhat.push_back(predict(s)[0]);
    }
    return lordsig::eval::regression_metrics(y, yhat);
}

void cmd_train(const RunConfig& cfg) {
    auto ds = load_and_normalize(cfg);
    const bool classification = resolve_classification(cfg, ds);
    const int classes = classification ? std::max(ds.num_classes, 2) : 2;

    auto low = lordsig::tensoralg::lyndon_basis(ds.channels(), cfg.d1);
    auto high = lordsig::tensoralg::lyndon_basis(ds.channels(), cfg.d2);
    auto train = lordsig::lord::prepare_split(ds, lordsig::path::Split::train, cfg.p, low, high);
    auto val = lordsig::lord::prepare_split(ds, lordsig::path::Split::val, cfg.p, low, high);
    auto test = lordsig::lord::prepare_split(ds, lordsig::path::Split::test, cfg.p, low, high);
    if (train.empty()) fail("training split is empty");
    if (val.empty()) fail("validation split is empty");
    if (test.empty()) fail("test split is empty");

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    write_config_echo(cfg, out_dir);

    std::vector<lordsig::eval::MetricReport> reports;
    std::vector<std::uint64_t> report_seeds;
    for (std::uint64_t seed : cfg.seeds) {
        const fs::path seed_dir = out_dir / ("seed" + std::to_string(seed));
        fs::create_directories(seed_dir);
        SeedOutcome outcome;
        try {
            lordsig::lord::TrainReport pre, main;
            std::function<std::vector<double>(const lordsig::lord::PreparedSample&)> predict;

            if (cfg.model == "lord") {
                auto lord_cfg = to_lord_config(cfg, classification, classes);
                auto model = lordsig::lord::build_model(lord_cfg, ds.channels(), seed);
                if (lord_cfg.mode != lordsig::lord::Mode::co_train_wo_pre && cfg.max_iter_ae > 0) {
                    pre = lordsig::lord::pretrain(*model, train, seed);
                    lordsig::io::save_checkpoint(seed_dir / "encoder_pretrained.ckpt",
                                                 lord_checkpoint(*model, cfg, true));
                }
                if (!pre.diverged) main = lordsig::lord::train_main(*model, train, val, seed);
                // only the co-train modes keep training the decoder past
                // pre-training; everyone else discards it at inference
                const bool keep_decoder = lord_cfg.mode == lordsig::lord::Mode::co_train ||
                                          lord_cfg.mode == lordsig::lord::Mode::co_train_wo_pre;
                lordsig::io::save_checkpoint(seed_dir / "model_final.ckpt",
                                             lord_checkpoint(*model, cfg, keep_decoder));
                if (seed == cfg.seeds.front()) {
                    auto counts = lordsig::lord::count_parameters(*model);
                    std::ofstream pc(out_dir / "params.csv", std::ios::trunc);
                    pc << "part,count\ndecoder," << counts.decoder << "\nrest," << counts.rest << "\n";
                }
                std::shared_ptr<lordsig::lord::LordModel> shared = std::move(model);
                predict = [shared](const lordsig::lord::PreparedSample& s) {
                    return lordsig::lord::task_forward(*shared, s);
                };
                outcome.diverged = pre.diverged || main.diverged;
                outcome.note = pre.diverged ? pre.note : main.note;
                write_train_report(seed_dir / "train_report.csv", pre, main);
            } else if (cfg.model == "nrde") {
                auto model = std::make_unique<lordsig::lord::NrdeModel>(
                    ds.channels(), cfg.d2, cfg.hidden_dim,
                    lordsig::lord::NetSpec{cfg.g_hidden, cfg.g_layers},
                    classification ? lordsig::lord::Task::classification
                                   : lordsig::lord::Task::regression,
                    classes, cfg.c_task, cfg.lr, cfg.batch,
                    lordsig::ode::SolverConfig{lordsig::ode::parse_method(cfg.solver), cfg.steps},
                    seed);
                main = model->train(train, val, cfg.max_iter_task, seed);
                std::shared_ptr<lordsig::lord::NrdeModel> shared = std::move(model);
                predict = [shared](const lordsig::lord::PreparedSample& s) { return shared->forward(s); };
                outcome.diverged = main.diverged;
                outcome.note = main.note;
                write_train_report(seed_dir / "train_report.csv", {}, main);
            } else if (cfg.model == "de-nrde") {
                auto model = std::make_unique<lordsig::lord::DeNrdeModel>(
                    ds.channels(), cfg.d2, cfg.ratio, cfg.emb_hidden, cfg.emb_layers, cfg.hidden_dim,
                    lordsig::lord::NetSpec{cfg.g_hidden, cfg.g_layers},
                    classification ? lordsig::lord::Task::classification
                                   : lordsig::lord::Task::regression,
                    classes, cfg.c_task, cfg.lr, cfg.batch,
                    lordsig::ode::SolverConfig{lordsig::ode::parse_method(cfg.solver), cfg.steps},
                    seed);
                main = model->train(train, val, cfg.max_iter_task, seed);
                std::shared_ptr<lordsig::lord::DeNrdeModel> shared = std::move(model);
                predict = [shared](const lordsig::lord::PreparedSample& s) { return shared->forward(s); };
                outcome.diverged = main.diverged;
                outcome.note = main.note;
                write_train_report(seed_dir / "train_report.csv", {}, main);
            } else {
                fail("unknown model '" + cfg.model + "' (lord, nrde, de-nrde)");
            }

            outcome.metrics = evaluate_predictions(classification, test, predict);
            write_metrics_csv(seed_dir / "metrics.csv", outcome.metrics, seed);
            reports.push_back(outcome.metrics);
            report_seeds.push_back(seed);
            if (outcome.diverged) {
                std::ofstream note(seed_dir / "divergence.txt", std::ios::trunc);
                note << outcome.note << "\n";
                std::cerr << "warning: seed " << seed << " " << outcome.note << "\n";
            }
        } catch (const lordsig::ode::DivergenceError& e) {
            std::ofstream note(seed_dir / "divergence.txt", std::ios::trunc);
            note << e.what() << "\n";
            std::cerr << "warning: seed " << seed << " diverged: " << e.what() << "\n";
        }
    }

    if (reports.empty()) fail("every seed diverged");
    auto summary = lordsig::eval::aggregate_reports(reports);
    std::ofstream agg(out_dir / "metrics_aggregate.csv", std::ios::trunc);
    agg << "metric,seed,value\n";
    for (const auto& s : summary) {
        for (std::size_t i = 0; i < s.per_seed.size(); ++i)
            agg << s.name << "," << report_seeds[i] << ","
                << (std::isnan(s.per_seed[i]) ? "nan" : format_double(s.per_seed[i])) << "\n";
        agg << s.name << ",mean," << (std::isnan(s.mean) ? "nan" : format_double(s.mean)) << "\n";
        agg << s.name << ",std," << (std::isnan(s.stddev) ? "nan" : format_double(s.stddev)) << "\n";
    }
    for (const auto& s : summary)
        std::cout << s.name << ": mean " << s.mean << " std " << s.stddev << "\n";
}

// ------------------------------------------------------------------ eval ---
void cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) fail("eval needs --checkpoint");
    auto ckpt = lordsig::io::load_checkpoint(cfg.checkpoint);
    if (ckpt.meta_at("kind") != "lord") fail("eval currently handles lord checkpoints");
    auto model = lord_from_checkpoint(ckpt);
    auto ds = load_and_normalize(cfg);
    if (ds.channels() != model->channels())
        fail("dataset channels do not match the checkpoint (" + std::to_string(ds.channels()) +
             " vs " + std::to_string(model->channels()) + ")");
    const int p = std::stoi(ckpt.meta_at("p"));
    auto low = lordsig::tensoralg::lyndon_basis(ds.channels(), model->config().depth_low);
    auto high = lordsig::tensoralg::lyndon_basis(ds.channels(), model->config().depth_high);
    auto test = lordsig::lord::prepare_split(ds, lordsig::path::Split::test, p, low, high);
    if (test.empty()) fail("test split is empty");

    auto report = evaluate_predictions(
        model->config().task == lordsig::lord::Task::classification, test,
        [&](const lordsig::lord::PreparedSample& s) { return lordsig::lord::task_forward(*model, s); });
    fs::create_directories(cfg.out);
    write_metrics_csv(fs::path(cfg.out) / "eval_metrics.csv", report, 0);
    for (const auto& m : report.values) std::cout << m.name << ": " << m.value << "\n";
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
}

// ----------------------------------------------------------------- sweep ---
void cmd_sweep(RunConfig cfg) {
    static const std::map<std::string, std::function<void(RunConfig&, const std::string&)>> axes{
        {"max_iter_ae", [](RunConfig& c, const std::string& v) { c.max_iter_ae = std::stoi(v); }},
        {"max_iter_task", [](RunConfig& c, const std::string& v) { c.max_iter_task = std::stoi(v); }},
        {"p", [](RunConfig& c, const std::string& v) { c.p = std::stoi(v); }},
        {"steps", [](RunConfig& c, const std::string& v) { c.steps = std::stoi(v); }},
        {"hidden_dim", [](RunConfig& c, const std::string& v) { c.hidden_dim = std::stoi(v); }},
        {"batch", [](RunConfig& c, const std::string& v) { c.batch = std::stoi(v); }},
        {"lr", [](RunConfig& c, const std::string& v) { c.lr = std::stod(v); }},
        {"c_ae", [](RunConfig& c, const std::string& v) { c.c_ae = std::stod(v); }},
        {"c_e", [](RunConfig& c, const std::string& v) { c.c_e = std::stod(v); }},
        {"c_task", [](RunConfig& c, const std::string& v) { c.c_task = std::stod(v); }},
        {"ratio", [](RunConfig& c, const std::string& v) { c.ratio = std::stod(v); }},
    };
    auto axis = axes.find(cfg.axis);
    if (axis == axes.end()) {
        std::string valid;
        for (const auto& [k, fn] : axes) valid += (valid.empty() ? "" : ", ") + k;
        fail("unknown sweep axis '" + cfg.axis + "'; valid axes: " + valid);
    }
    if (cfg.values.empty()) fail("sweep needs --values");

    const fs::path out_dir(cfg.out);
    fs::create_directories(out_dir);
    std::ofstream table(out_dir / "sweep.csv", std::ios::trunc);
    table << "axis,value,metric,mean,std\n";
    for (const auto& value : cfg.values) {
        RunConfig run = cfg;
        axis->second(run, value);
        run.out = (out_dir / ("sweep_" + cfg.axis + "_" + value)).string();
        cmd_train(run);
        // re-read the aggregate this run produced
        std::ifstream agg(fs::path(run.out) / "metrics_aggregate.csv");
        std::string line;
        std::getline(agg, line);  // header
        std::map<std::string, std::pair<std::string, std::string>> rows;
        while (std::getline(agg, line)) {
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const std::string metric = line.substr(0, c1);
            const std::string seed = line.substr(c1 + 1, c2 - c1 - 1);
            const std::string v = line.substr(c2 + 1);
            if (seed == "mean") rows[metric].first = v;
            if (seed == "std") rows[metric].second = v;
        }
        for (const auto& [metric, ms] : rows)
            table << cfg.axis << "," << value << "," << metric << "," << ms.first << "," << ms.second
                  << "\n";
    }
    std::cout << "sweep table written to " << (out_dir / "sweep.csv").string() << "\n";
}

// ------------------------------------------------------------ export-pca ---
void cmd_export_pca(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) fail("export-pca needs --checkpoint");
    auto ckpt = lordsig::io::load_checkpoint(cfg.checkpoint);
    auto model = lord_from_checkpoint(ckpt);
    auto ds = load_and_normalize(cfg);
    if (ds.channels() != model->channels())
        fail("dataset channels do not match the checkpoint (" + std::to_string(ds.channels()) +
             " vs " + std::to_string(model->channels()) + ")");
    const int p = std::stoi(ckpt.meta_at("p"));
    auto low = lordsig::tensoralg::lyndon_basis(ds.channels(), model->config().depth_low);
    auto high = lordsig::tensoralg::lyndon_basis(ds.channels(), model->config().depth_high);
    auto test = lordsig::lord::prepare_split(ds, lordsig::path::Split::test, p, low, high);
    if (test.empty()) fail("test split is empty");

    const std::size_t dim = high.size();  // zero-pad everything to the D2 dimension
    std::vector<std::vector<double>> points;
    std::vector<std::string> tags;
    for (const auto& sample : test) {
        for (const auto& entry : sample.low.entries) {
            std::vector<double> padded(dim, 0.0);
            std::copy(entry.begin(), entry.end(), padded.begin());
            points.push_back(std::move(padded));
            tags.push_back("logsig_d1");
        }
        for (const auto& entry : sample.high.entries) {
            points.push_back(entry);
            tags.push_back("logsig_d2");
        }
        auto bounds = lordsig::lord::encode_boundaries(*model, sample);
        for (std::size_t w = 0; w + 1 < bounds.size(); ++w) {
            std::vector<double> padded(dim, 0.0);
            for (std::size_t j = 0; j < bounds[w].size(); ++j) padded[j] = bounds[w + 1][j] - bounds[w][j];
            points.push_back(std::move(padded));
            tags.push_back("de");
        }
    }

    auto exported = lordsig::eval::pca_export(points, tags);
    fs::create_directories(cfg.out);
    std::ofstream f(fs::path(cfg.out) / "pca.csv", std::ios::trunc);
    f << "source,pc1,pc2\n";
    for (std::size_t i = 0; i < exported.projected.size(); ++i)
        f << exported.sources[i] << "," << format_double(exported.projected[i][0]) << ","
          << format_double(exported.projected[i][1]) << "\n";
    std::cout << "explained variance ratios: " << exported.explained_ratio[0] << ", "
              << exported.explained_ratio[1] << "\n";
}

}  // namespace


int main(int argc, char** argv) {
    CLI::App app{"log-signature transforms and NRDE training for long time series"};
    app.require_subcommand(1);

    RunConfig cfg;

    // options live on the top-level app so one flat config file covers them;
    // subcommands fall through unmatched flags
    app.set_config("--config")->description("flat key = value config file");
    app.add_option("--dataset", cfg.dataset, "dataset directory");
    app.add_option("--out", cfg.out, "output directory");
    app.add_option("--seed", cfg.seeds, "seed list")->delimiter(',');
    app.add_option("--mode", cfg.mode, "lord | fine-tuning | co-train | co-train-wo-pre");
    app.add_option("--model", cfg.model, "lord | nrde | de-nrde");
    app.add_option("--task", cfg.task, "auto | classification | regression");
    app.add_option("--p", cfg.p, "observations per window");
    app.add_option("--d1", cfg.d1, "lower log-signature depth");
    app.add_option("--d2", cfg.d2, "higher log-signature depth");
    app.add_option("--solver", cfg.solver, "euler | midpoint | rk4");
    app.add_option("--steps", cfg.steps, "solver steps per window");
    app.add_option("--max-iter-ae", cfg.max_iter_ae, "autoencoder pre-training iterations");
    app.add_option("--max-iter-task", cfg.max_iter_task, "main training iterations");
    app.add_option("--hidden-dim", cfg.hidden_dim, "hidden state dimension");
    app.add_option("--embed-dim", cfg.embed_dim, "embedding dimension (0 = logsig dim of d1)");
    app.add_option("--f-hidden", cfg.f_hidden, "encoder field width");
    app.add_option("--f-layers", cfg.f_layers, "encoder field hidden layers");
    app.add_option("--g-hidden", cfg.g_hidden, "main field width");
    app.add_option("--g-layers", cfg.g_layers, "main field hidden layers");
    app.add_option("--o-hidden", cfg.o_hidden, "decoder field width");
    app.add_option("--o-layers", cfg.o_layers, "decoder field hidden layers");
    app.add_option("--c-ae", cfg.c_ae, "autoencoder L2 coefficient");
    app.add_option("--c-e", cfg.c_e, "embedding norm coefficient");
    app.add_option("--c-task", cfg.c_task, "task L2 coefficient");
    app.add_option("--co-train-ae-weight", cfg.co_train_ae_weight,
                   "weight on the autoencoder loss in co-train modes");
    app.add_option("--lr", cfg.lr, "learning rate");
    app.add_option("--batch", cfg.batch, "mini-batch size");
    app.add_option("--ratio", cfg.ratio, "de-nrde compression ratio");
    app.add_option("--emb-hidden", cfg.emb_hidden, "de-nrde embedding width");
    app.add_option("--emb-layers", cfg.emb_layers, "de-nrde embedding hidden layers");
    app.add_option("--depth", cfg.depth, "depth for the logsig command (0 = d2)");
    app.add_option("--checkpoint", cfg.checkpoint, "checkpoint file");
    app.add_option("--axis", cfg.axis, "sweep: config field to vary");
    app.add_option("--values", cfg.values, "sweep: values for the axis")->delimiter(',');

    auto* sub_logsig = app.add_subcommand("logsig", "write per-sample log-signature streams");
    auto* sub_train = app.add_subcommand("train", "train over the seed list and report metrics");
    auto* sub_eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    auto* sub_sweep = app.add_subcommand("sweep", "run train across one config axis");
    auto* sub_pca = app.add_subcommand("export-pca", "project log-signatures and embeddings");
    for (auto* sub : {sub_logsig, sub_train, sub_eval, sub_sweep, sub_pca}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cfg.seeds.empty()) fail("seed list must not be empty");
        if (sub_logsig->parsed()) cmd_logsig(cfg);
        if (sub_train->parsed()) cmd_train(cfg);
        if (sub_eval->parsed()) cmd_eval(cfg);
        if (sub_sweep->parsed()) cmd_sweep(cfg);
        if (sub_pca->parsed()) cmd_export_pca(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
