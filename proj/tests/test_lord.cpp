#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>

#include "lordsig/lord.hpp"
#include "lordsig/synth.hpp"
#include "support/oracles.hpp"

using namespace lordsig;
using namespace lordsig::lord;
using lordsig::nn::Tape;
using lordsig::nn::TapeBinder;
using lordsig::nn::Var;

namespace {

path::TimeSeriesPath random_series(std::mt19937_64& rng, std::size_t n, int raw) {
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = static_cast<double>(i);
    std::vector<double> values(n * static_cast<std::size_t>(raw));
    for (auto& x : values) x = oracles::uniform_pm1(rng);
    return path::TimeSeriesPath::from_raw(std::move(times), std::move(values), raw);
}

LordConfig tiny_config() {
    LordConfig cfg;
    cfg.depth_low = 1;
    cfg.depth_high = 2;
    cfg.hidden_dim = 4;
    cfg.encoder = {4, 1};
    cfg.main_net = {4, 1};
    cfg.decoder = {4, 1};
    cfg.c_ae = 1e-3;
    cfg.c_e = 0.5;
    cfg.c_task = 1e-3;
    cfg.num_classes = 2;
    cfg.solver = {ode::Method::euler, 2};
    return cfg;
}

PreparedSample make_sample(std::mt19937_64& rng, const LordConfig& cfg, int raw, std::size_t n,
                           int P, double target) {
    auto series = random_series(rng, n, raw);
    auto low = tensoralg::lyndon_basis(raw + 1, cfg.depth_low);
    auto high = tensoralg::lyndon_basis(raw + 1, cfg.depth_high);
    return prepare_sample(series, P, low, high, target);
}

void zero_net(nn::VectorFieldNet& net) {
    for (auto& w : net.weights) std::fill(w.v.begin(), w.v.end(), 0.0);
    for (auto& b : net.biases) std::fill(b.v.begin(), b.v.end(), 0.0);
}

std::vector<double> dump(const nn::ParamRegistry& reg) {
    std::vector<double> theta;
    for (std::size_t s = 0; s < reg.size(); ++s)
        for (double x : reg.block(static_cast<int>(s)).v) theta.push_back(x);
    return theta;
}

void load(nn::ParamRegistry& reg, std::span<const double> theta) {
    std::size_t pos = 0;
    for (std::size_t s = 0; s < reg.size(); ++s)
        for (auto& x : reg.block(static_cast<int>(s)).v) x = theta[pos++];
}

}  // namespace

TEST_CASE("build_model shapes follow the depth and dimension contract") {
    LordConfig cfg = tiny_config();
    cfg.hidden_dim = 8;
    auto model = build_model(cfg, 3, 7);
    CHECK(model->encoder().out_rows == 3);  // embed defaults to logsig_dim(3,1)=3
    CHECK(model->encoder().out_cols == 3);
    CHECK(model->main_field().out_rows == 8);
    CHECK(model->main_field().out_cols == 3);
    CHECK(model->decoder().out_rows == 6);  // logsig_dim(3,2)=6
    CHECK(model->decoder().out_cols == 3);
    CHECK(model->embed_dim() < model->recon_dim());

    SUBCASE("D1 >= D2 rejected") {
        LordConfig bad = cfg;
        bad.depth_low = 2;
        bad.depth_high = 2;
        CHECK_THROWS_AS((void)build_model(bad, 3, 7), std::invalid_argument);
    }
    SUBCASE("same seed gives identical bytes, different seed differs") {
        auto again = build_model(cfg, 3, 7);
        auto other = build_model(cfg, 3, 8);
        auto a = dump(model->registry());
        auto b = dump(again->registry());
        auto c = dump(other->registry());
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
        bool differs = false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i] != c[i]) differs = true;
        CHECK(differs);
    }
}

TEST_CASE("recon_loss") {
    std::mt19937_64 rng(3);
    LordConfig cfg = tiny_config();

    SUBCASE("zero decoder leaves s frozen so the loss is the target norm") {
        auto sample = make_sample(rng, cfg, 2, 13, 5, 0.0);
        auto model = build_model(cfg, 3, 5);
        zero_net(model->decoder());
        double expected = 0.0;
        for (const auto& entry : sample.high.entries)
            for (double x : entry) expected += x * x;
        expected /= static_cast<double>(sample.high.count() - 1);
        CHECK(recon_loss(*model, sample) == doctest::Approx(expected).epsilon(1e-12));
    }
    SUBCASE("crafted constant fields reconstruct a single-segment window exactly") {
        // one raw channel + time, one window of one segment: the depth-2
        // bracket term vanishes, so copying the level-1 block is exact
        LordConfig c2 = tiny_config();
        auto series = path::TimeSeriesPath::from_raw({0.0, 1.0}, {0.3, 0.9}, 1);
        auto low = tensoralg::lyndon_basis(2, 1);
        auto high = tensoralg::lyndon_basis(2, 2);
        auto sample = prepare_sample(series, 2, low, high, 0.0);
        auto model = build_model(c2, 2, 5);

        zero_net(model->encoder());
        model->encoder().biases.back().v = {1.0, 0.0, 0.0, 1.0};  // f == identity
        zero_net(model->decoder());
        model->decoder().biases.back().v = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};  // o copies level 1
        std::fill(model->init_s().weight.v.begin(), model->init_s().weight.v.end(), 0.0);
        std::fill(model->init_s().bias.v.begin(), model->init_s().bias.v.end(), 0.0);

        CHECK(recon_loss(*model, sample) == doctest::Approx(0.0).epsilon(1e-15));
    }
    SUBCASE("value matches the loss recomputed from boundary states") {
        auto sample = make_sample(rng, cfg, 2, 16, 6, 0.0);  // W = 3
        REQUIRE(sample.high.count() == 3);
        auto model = build_model(cfg, 3, 11);

        std::vector<double> e0(static_cast<std::size_t>(model->embed_dim()));
        {
            // phi_e then phi_s by hand
            const auto& m = model->init_e();
            for (int r = 0; r < m.weight.rows; ++r) {
                double acc = m.bias.v[static_cast<std::size_t>(r)];
                for (int c = 0; c < m.weight.cols; ++c)
                    acc += m.weight.v[static_cast<std::size_t>(r * m.weight.cols + c)] *
                           sample.x0[static_cast<std::size_t>(c)];
                e0[static_cast<std::size_t>(r)] = acc;
            }
        }
        std::vector<double> s0(static_cast<std::size_t>(model->recon_dim()));
        {
            const auto& m = model->init_s();
            for (int r = 0; r < m.weight.rows; ++r) {
                double acc = m.bias.v[static_cast<std::size_t>(r)];
                for (int c = 0; c < m.weight.cols; ++c)
                    acc += m.weight.v[static_cast<std::size_t>(r * m.weight.cols + c)] *
                           e0[static_cast<std::size_t>(c)];
                s0[static_cast<std::size_t>(r)] = acc;
            }
        }
        auto traj = ode::integrate_augmented(model->encoder(), nullptr, &model->decoder(), e0, {},
                                             s0, sample.low, cfg.solver);
        const int embed = model->embed_dim();
        double expected = 0.0;
        for (std::size_t w = 0; w < sample.high.count(); ++w) {
            for (int j = 0; j < model->recon_dim(); ++j) {
                const double ds = traj.states[w + 1][static_cast<std::size_t>(embed + j)] -
                                  traj.states[w][static_cast<std::size_t>(embed + j)];
                const double err = ds - sample.high.entries[w][static_cast<std::size_t>(j)];
                expected += err * err;
            }
        }
        expected /= static_cast<double>(sample.high.count() - 1);
        CHECK(recon_loss(*model, sample) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("ae_loss decomposition") {
    std::mt19937_64 rng(9);
    LordConfig cfg = tiny_config();
    cfg.c_ae = 0.0;
    cfg.c_e = 0.0;
    auto sample = make_sample(rng, cfg, 2, 13, 5, 0.0);
    auto model = build_model(cfg, 3, 21);
    CHECK(ae_loss(*model, sample) == recon_loss(*model, sample));

    LordConfig with_reg = tiny_config();
    with_reg.c_ae = 0.7;
    with_reg.c_e = 1.3;
    auto reg_model = build_model(with_reg, 3, 21);
    double l2 = 0.0;
    for (int s : reg_model->encoder_slots())
        for (double x : reg_model->registry().block(s).v) l2 += x * x;
    for (int s : reg_model->decoder_slots())
        for (double x : reg_model->registry().block(s).v) l2 += x * x;
    auto bounds = encode_boundaries(*reg_model, sample);
    double e_pen = 0.0;
    for (const auto& e : bounds)
        for (double x : e) e_pen += x * x;
    e_pen /= static_cast<double>(bounds.size());
    const double expected = recon_loss(*reg_model, sample) + 0.7 * l2 + 1.3 * e_pen;
    CHECK(ae_loss(*reg_model, sample) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("task_forward") {
    std::mt19937_64 rng(15);
    LordConfig cfg = tiny_config();
    auto sample = make_sample(rng, cfg, 2, 13, 5, 1.0);
    auto model = build_model(cfg, 3, 31);

    SUBCASE("zero main field reduces to the initial-value map") {
        zero_net(model->main_field());
        auto probs = task_forward(*model, sample);
        // z(T) = phi_z(x0)
        std::vector<double> z0(static_cast<std::size_t>(model->hidden_dim()));
        const auto& m = model->init_z();
        for (int r = 0; r < m.weight.rows; ++r) {
            double acc = m.bias.v[static_cast<std::size_t>(r)];
            for (int c = 0; c < m.weight.cols; ++c)
                acc += m.weight.v[static_cast<std::size_t>(r * m.weight.cols + c)] *
                       sample.x0[static_cast<std::size_t>(c)];
            z0[static_cast<std::size_t>(r)] = acc;
        }
        const auto& out = model->output();
        std::vector<double> logits(static_cast<std::size_t>(out.weight.rows));
        for (int r = 0; r < out.weight.rows; ++r) {
            double acc = out.bias.v[static_cast<std::size_t>(r)];
            for (int c = 0; c < out.weight.cols; ++c)
                acc += out.weight.v[static_cast<std::size_t>(r * out.weight.cols + c)] *
                       z0[static_cast<std::size_t>(c)];
            logits[static_cast<std::size_t>(r)] = acc;
        }
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - logits[0]);
        CHECK(probs[0] == doctest::Approx(std::exp(0.0) / denom).epsilon(1e-12));
    }
    SUBCASE("equal logits give uniform probabilities") {
        std::fill(model->output().weight.v.begin(), model->output().weight.v.end(), 0.0);
        std::fill(model->output().bias.v.begin(), model->output().bias.v.end(), 0.0);
        auto probs = task_forward(*model, sample);
        CHECK(probs.size() == 2);
        CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(probs[1] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("deterministic") {
        auto a = task_forward(*model, sample);
        auto b = task_forward(*model, sample);
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("task_loss values") {
    LordConfig cfg = tiny_config();
    cfg.c_task = 0.0;
    auto model = build_model(cfg, 3, 41);
    CHECK(task_loss(std::vector<double>{1.0, 0.0}, 0.0, *model) == doctest::Approx(0.0));
    CHECK(task_loss(std::vector<double>{0.5, 0.5}, 1.0, *model) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    LordConfig reg_cfg = tiny_config();
    reg_cfg.task = Task::regression;
    reg_cfg.c_task = 0.01;
    auto reg_model = build_model(reg_cfg, 3, 41);
    double l2 = 0.0;
    for (int s : reg_model->main_slots())
        for (double x : reg_model->registry().block(s).v) l2 += x * x;
    CHECK(task_loss(std::vector<double>{0.7}, 0.7, *reg_model) ==
          doctest::Approx(0.01 * l2).epsilon(1e-12));
}

TEST_CASE("full-pipeline gradients match finite differences") {
    std::mt19937_64 rng(99);
    LordConfig cfg = tiny_config();
    auto sample = make_sample(rng, cfg, 2, 9, 5, 1.0);  // W = 2 windows
    REQUIRE(sample.low.count() == 2);
    auto model = build_model(cfg, 3, 55);
    auto& reg = model->registry();
    const auto theta0 = dump(reg);

    auto slot_offsets = [&] {
        std::vector<std::size_t> offs(reg.size() + 1, 0);
        for (std::size_t s = 0; s < reg.size(); ++s)
            offs[s + 1] = offs[s] + reg.block(static_cast<int>(s)).size();
        return offs;
    }();

    auto check_loss = [&](auto&& builder, const std::vector<int>& live_slots,
                          const std::vector<int>& dead_slots) {
        load(reg, theta0);
        Tape tape;
        TapeBinder binder(tape, reg);
        Var loss = builder(binder);
        auto grads = nn::grad(tape, loss, reg);

        for (int s : dead_slots)
            for (double g : grads[static_cast<std::size_t>(s)].v) CHECK(g == 0.0);

        auto value = [&](std::span<const double> theta) {
            load(reg, theta);
            Tape t2;
            TapeBinder b2(t2, reg);
            return t2.scalar(builder(b2));
        };
        auto fd = oracles::finite_difference_gradient(value, theta0);
        load(reg, theta0);
        for (int s : live_slots) {
            const auto& g = grads[static_cast<std::size_t>(s)];
            for (std::size_t i = 0; i < g.size(); ++i)
                CHECK(oracles::rel_error(g.v[i], fd[slot_offsets[static_cast<std::size_t>(s)] + i]) <=
                      1e-4);
        }
    };

    SUBCASE("autoencoder loss") {
        std::vector<int> live = model->encoder_slots();
        live.insert(live.end(), model->decoder_slots().begin(), model->decoder_slots().end());
        check_loss([&](TapeBinder& b) { return ae_loss_taped(b, *model, sample); }, live,
                   model->main_slots());
    }
    SUBCASE("task loss") {
        std::vector<int> live = model->main_slots();
        for (int s : model->encoder_slots()) live.push_back(s);
        check_loss([&](TapeBinder& b) { return task_loss_taped(b, *model, sample); }, live,
                   model->decoder_slots());
    }
}

TEST_CASE("pretrain respects budgets and touches only autoencoder parameters") {
    std::mt19937_64 rng(111);
    LordConfig cfg = tiny_config();
    cfg.max_iter_ae = 5;
    std::vector<PreparedSample> train;
    for (int i = 0; i < 6; ++i) train.push_back(make_sample(rng, cfg, 2, 13, 5, i % 2));

    SUBCASE("zero budget leaves parameters unchanged") {
        LordConfig c0 = cfg;
        c0.max_iter_ae = 0;
        auto model = build_model(c0, 3, 61);
        auto before = dump(model->registry());
        auto report = pretrain(*model, train, 7);
        CHECK(report.history.empty());
        auto after = dump(model->registry());
        CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
    }
    SUBCASE("history length equals the budget and main params stay put") {
        auto model = build_model(cfg, 3, 61);
        auto before = dump(model->registry());
        auto report = pretrain(*model, train, 7);
        CHECK(report.history.size() == 5);
        for (const auto& rec : report.history) CHECK(rec.phase == "pretrain");
        // main group untouched by the autoencoder phase
        for (int s : model->main_slots()) {
            const auto& block = model->registry().block(s);
            std::size_t off = 0;
            for (int q = 0; q < s; ++q) off += model->registry().block(q).size();
            for (std::size_t i = 0; i < block.size(); ++i) CHECK(block.v[i] == before[off + i]);
        }
        // autoencoder loss actually moved
        bool moved = false;
        auto after = dump(model->registry());
        for (std::size_t i = 0; i < after.size(); ++i)
            if (after[i] != before[i]) moved = true;
        CHECK(moved);
    }
    SUBCASE("co-train-wo-pre refuses to pretrain") {
        LordConfig c = cfg;
        c.mode = Mode::co_train_wo_pre;
        auto model = build_model(c, 3, 61);
        CHECK_THROWS_AS((void)pretrain(*model, train, 7), std::logic_error);
    }
}

TEST_CASE("train_main honors the two-phase contract") {
    std::mt19937_64 rng(121);
    LordConfig cfg = tiny_config();
    cfg.max_iter_ae = 3;
    cfg.max_iter_task = 4;
    std::vector<PreparedSample> train, val;
    for (int i = 0; i < 6; ++i) train.push_back(make_sample(rng, cfg, 2, 13, 5, i % 2));
    for (int i = 0; i < 4; ++i) val.push_back(make_sample(rng, cfg, 2, 13, 5, i % 2));

    SUBCASE("mode lord freezes the encoder bit for bit and never reads the decoder") {
        auto model = build_model(cfg, 3, 71);
        (void)pretrain(*model, train, 7);
        std::vector<std::vector<double>> encoder_before;
        for (int s : model->encoder_slots()) encoder_before.push_back(model->registry().block(s).v);
        auto decoder_before = std::vector<std::vector<double>>{};
        for (int s : model->decoder_slots()) decoder_before.push_back(model->registry().block(s).v);

        auto report = train_main(*model, train, val, 7);
        CHECK(report.history.size() == 4);
        std::size_t k = 0;
        for (int s : model->encoder_slots()) {
            const auto& now = model->registry().block(s).v;
            CHECK(std::memcmp(now.data(), encoder_before[k].data(), now.size() * sizeof(double)) == 0);
            ++k;
        }
        k = 0;
        for (int s : model->decoder_slots()) {
            const auto& now = model->registry().block(s).v;
            CHECK(std::memcmp(now.data(), decoder_before[k].data(), now.size() * sizeof(double)) == 0);
            ++k;
        }
    }
    SUBCASE("zero budget returns the initial parameters as best") {
        LordConfig c = cfg;
        c.max_iter_task = 0;
        auto model = build_model(c, 3, 71);
        auto before = dump(model->registry());
        auto report = train_main(*model, train, val, 7);
        CHECK(report.history.empty());
        auto after = dump(model->registry());
        CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
    }
    SUBCASE("fine-tuning updates the encoder too") {
        LordConfig c = cfg;
        c.mode = Mode::fine_tuning;
        auto model = build_model(c, 3, 71);
        auto before = dump(model->registry());
        (void)train_main(*model, train, val, 7);
        bool encoder_moved = false;
        std::size_t off = 0;
        for (std::size_t s = 0; s < model->registry().size(); ++s) {
            const auto& block = model->registry().block(static_cast<int>(s));
            const bool is_encoder =
                std::find(model->encoder_slots().begin(), model->encoder_slots().end(),
                          static_cast<int>(s)) != model->encoder_slots().end();
            for (std::size_t i = 0; i < block.size(); ++i)
                if (is_encoder && block.v[i] != before[off + i]) encoder_moved = true;
            off += block.size();
        }
        CHECK(encoder_moved);
    }
    SUBCASE("identical seeds give identical histories") {
        auto m1 = build_model(cfg, 3, 71);
        auto m2 = build_model(cfg, 3, 71);
        (void)pretrain(*m1, train, 7);
        (void)pretrain(*m2, train, 7);
        auto r1 = train_main(*m1, train, val, 7);
        auto r2 = train_main(*m2, train, val, 7);
        REQUIRE(r1.history.size() == r2.history.size());
        for (std::size_t i = 0; i < r1.history.size(); ++i) {
            CHECK(r1.history[i].loss == r2.history[i].loss);
            CHECK(r1.history[i].val_metric == r2.history[i].val_metric);
        }
    }
}

TEST_CASE("de_nrde baseline") {
    std::mt19937_64 rng(131);
    LordConfig cfg = tiny_config();
    auto sample = make_sample(rng, cfg, 2, 13, 5, 1.0);
    const ode::SolverConfig solver{ode::Method::euler, 2};

    SUBCASE("identity embedding at ratio 1 matches the plain NRDE") {
        NrdeModel plain(3, 2, 4, {4, 1}, Task::classification, 2, 0.0, 1e-3, 8, solver, 17);
        DeNrdeModel de(3, 2, 1.0, 4, 0, 4, {4, 1}, Task::classification, 2, 0.0, 1e-3, 8, solver, 18);
        REQUIRE(de.embedded_dim() == 6);
        // identity-initialize the embedding and copy the shared blocks
        auto& emb = de.embedding();
        std::fill(emb.weights[0].v.begin(), emb.weights[0].v.end(), 0.0);
        for (int i = 0; i < 6; ++i) emb.weights[0].v[static_cast<std::size_t>(i * 6 + i)] = 1.0;
        std::fill(emb.biases[0].v.begin(), emb.biases[0].v.end(), 0.0);
        de.field().weights = plain.field().weights;
        de.field().biases = plain.field().biases;
        de.init_z().weight = plain.init_z().weight;
        de.init_z().bias = plain.init_z().bias;
        de.output().weight = plain.output().weight;
        de.output().bias = plain.output().bias;

        auto a = plain.forward(sample);
        auto b = de.forward(sample);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
    }
    SUBCASE("ratio 0.5 embeds logsig_dim(3,2)=6 down to 3") {
        DeNrdeModel de(3, 2, 0.5, 4, 1, 4, {4, 1}, Task::classification, 2, 0.0, 1e-3, 8, solver, 18);
        CHECK(de.embedded_dim() == 3);
    }
    SUBCASE("zero embedding keeps z at its initial value") {
        DeNrdeModel de(3, 2, 0.5, 4, 0, 4, {4, 1}, Task::classification, 2, 0.0, 1e-3, 8, solver, 18);
        std::fill(de.embedding().weights[0].v.begin(), de.embedding().weights[0].v.end(), 0.0);
        std::fill(de.embedding().biases[0].v.begin(), de.embedding().biases[0].v.end(), 0.0);
        auto probs = de.forward(sample);
        // prediction must equal output(phi_z(x0))
        std::vector<double> z0(4);
        for (int r = 0; r < 4; ++r) {
            double acc = de.init_z().bias.v[static_cast<std::size_t>(r)];
            for (int c = 0; c < 3; ++c)
                acc += de.init_z().weight.v[static_cast<std::size_t>(r * 3 + c)] *
                       sample.x0[static_cast<std::size_t>(c)];
            z0[static_cast<std::size_t>(r)] = acc;
        }
        std::vector<double> logits(2);
        for (int r = 0; r < 2; ++r) {
            double acc = de.output().bias.v[static_cast<std::size_t>(r)];
            for (int c = 0; c < 4; ++c)
                acc += de.output().weight.v[static_cast<std::size_t>(r * 4 + c)] * z0[static_cast<std::size_t>(c)];
            logits[static_cast<std::size_t>(r)] = acc;
        }
        const double m = std::max(logits[0], logits[1]);
        const double denom = std::exp(logits[0] - m) + std::exp(logits[1] - m);
        CHECK(probs[0] == doctest::Approx(std::exp(logits[0] - m) / denom).epsilon(1e-12));
    }
}

TEST_CASE("parameter counts split decoder from the rest") {
    LordConfig cfg = tiny_config();
    auto model = build_model(cfg, 3, 7);
    auto counts = count_parameters(*model);
    CHECK(counts.decoder > 0);
    CHECK(counts.rest > 0);
    CHECK(counts.decoder + counts.rest == model->registry().total_parameters());
}

TEST_CASE("training histories do not depend on the thread budget") {
    std::mt19937_64 rng(151);
    LordConfig cfg = tiny_config();
    cfg.max_iter_ae = 4;
    cfg.max_iter_task = 5;
    std::vector<PreparedSample> train, val;
    for (int i = 0; i < 10; ++i) train.push_back(make_sample(rng, cfg, 2, 13, 5, i % 2));
    for (int i = 0; i < 6; ++i) val.push_back(make_sample(rng, cfg, 2, 13, 5, i % 2));

    auto run_with_threads = [&](const char* budget) {
        setenv("LORDSIG_THREADS", budget, 1);
        auto model = build_model(cfg, 3, 81);
        auto pre = pretrain(*model, train, 9);
        auto main = train_main(*model, train, val, 9);
        unsetenv("LORDSIG_THREADS");
        std::vector<double> numbers;
        for (const auto& r : pre.history) numbers.push_back(r.loss);
        for (const auto& r : main.history) {
            numbers.push_back(r.loss);
            numbers.push_back(r.val_metric);
        }
        const auto params = dump(model->registry());
        numbers.insert(numbers.end(), params.begin(), params.end());
        return numbers;
    };

    auto serial = run_with_threads("1");
    auto threaded = run_with_threads("4");
    REQUIRE(serial.size() == threaded.size());
    // per-sample gradients are reduced in sample order, so the histories and
    // final parameters must agree to the bit
    CHECK(std::memcmp(serial.data(), threaded.data(), serial.size() * sizeof(double)) == 0);
}

TEST_CASE("zero autoencoder parameters contribute nothing to the regularizer") {
    std::mt19937_64 rng(161);
    LordConfig cfg = tiny_config();
    cfg.c_ae = 1.0;
    cfg.c_e = 0.0;
    auto sample = make_sample(rng, cfg, 2, 9, 5, 0.0);
    auto model = build_model(cfg, 3, 91);
    zero_net(model->encoder());
    zero_net(model->decoder());
    std::fill(model->init_e().weight.v.begin(), model->init_e().weight.v.end(), 0.0);
    std::fill(model->init_e().bias.v.begin(), model->init_e().bias.v.end(), 0.0);
    std::fill(model->init_s().weight.v.begin(), model->init_s().weight.v.end(), 0.0);
    std::fill(model->init_s().bias.v.begin(), model->init_s().bias.v.end(), 0.0);
    CHECK(ae_loss(*model, sample) == recon_loss(*model, sample));
}

TEST_CASE("regression task trains end to end") {
    std::mt19937_64 rng(171);
    LordConfig cfg = tiny_config();
    cfg.task = Task::regression;
    cfg.max_iter_ae = 3;
    cfg.max_iter_task = 10;
    // target: total increment of the first raw channel, a depth-1 functional
    auto low = tensoralg::lyndon_basis(3, cfg.depth_low);
    auto high = tensoralg::lyndon_basis(3, cfg.depth_high);
    std::vector<PreparedSample> train, val;
    for (int i = 0; i < 12; ++i) {
        auto series = random_series(rng, 13, 2);
        const double target = series.observation(12)[0] - series.observation(0)[0];
        auto sample = prepare_sample(series, 5, low, high, target);
        (i < 8 ? train : val).push_back(std::move(sample));
    }
    auto model = build_model(cfg, 3, 101);
    (void)pretrain(*model, train, 3);
    auto report = train_main(*model, train, val, 3);
    REQUIRE(report.history.size() == 10);
    for (const auto& rec : report.history) CHECK(std::isfinite(rec.loss));
    CHECK(std::isfinite(report.best_val_metric));  // validation R2 defined
    auto pred = task_forward(*model, val.front());
    REQUIRE(pred.size() == 1);
    CHECK(std::isfinite(pred[0]));
}

TEST_CASE("a zero main field cuts the gradient path to the encoder") {
    std::mt19937_64 rng(181);
    LordConfig cfg = tiny_config();
    cfg.c_task = 0.0;
    auto sample = make_sample(rng, cfg, 2, 9, 5, 0.0);
    auto model = build_model(cfg, 3, 111);
    zero_net(model->main_field());

    // z never moves, so the loss sees only phi_z(x0); the encoder still runs
    // but its output is multiplied by the zero field rows
    Tape tape;
    TapeBinder binder(tape, model->registry());
    Var out = task_output_taped(binder, *model, sample);
    auto grads = nn::grad(tape, tape.sq_norm(out), model->registry());

    for (int s : model->encoder_slots())
        for (double g : grads[static_cast<std::size_t>(s)].v) CHECK(g == 0.0);
    bool init_z_nonzero = false;
    const int wz = model->registry().slot_of(&model->init_z().weight);
    for (double g : grads[static_cast<std::size_t>(wz)].v)
        if (g != 0.0) init_z_nonzero = true;
    CHECK(init_z_nonzero);
}
