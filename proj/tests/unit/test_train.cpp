#include <cmath>

#include <gtest/gtest.h>

#include "beacon/error.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/nn/train.hpp"
#include "gradcheck.hpp"
#include "synthetic_set.hpp"
#include "temp_dir.hpp"

using namespace beacon;
using namespace beacon::nn;
using beacon::testing::TempDir;

namespace {

const beacon::testing::SyntheticVectors& two_family_set() {
    static const auto set = [] {
        SynthConfig cfg;
        cfg.n_families = 2;
        cfg.samples_per_family = {32};
        cfg.signal_strength = 1.0;
        cfg.seed = 5;
        return beacon::testing::synthetic_vectors(cfg);
    }();
    return set;
}

ModelSpec small_cnn(std::size_t input_len, std::size_t classes) {
    auto spec = ModelSpec::make(ModelKind::Cnn, input_len, classes);
    spec.cnn.conv_channels = {2, 3, 4};
    spec.cnn.dense_hidden = 5;
    return spec;
}

LabeledSet random_set(std::size_t n, std::size_t dim, std::size_t classes, Rng& rng) {
    LabeledSet s;
    std::vector<float> row(dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : row) v = static_cast<float>(rng.normal());
        s.add(row, rng.below(classes));
    }
    return s;
}

std::vector<std::vector<float>> snapshot(Sequential<float>& net) {
    std::vector<std::vector<float>> out;
    for (const auto& p : net.params()) out.emplace_back(p.value->storage());
    for (const auto& b : net.buffers()) out.emplace_back(b.value->storage());
    return out;
}

double train_set_accuracy(TrainedModel& model, const LabeledSet& data) {
    const auto pred = argmax_rows(predict(model, data));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i];
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace

TEST(CnnShapeChain, NineOutputShapes) {
    auto net = build_network<float>(ModelSpec::make(ModelKind::Cnn, 8448, 10));
    std::vector<ShapeTraceEntry> trace;
    const auto y = net.forward(Tensor<float>({1, 8448}, 0.01f), Mode::Eval, &trace);
    const std::vector<Shape> expected{{1, 32, 8448}, {1, 32, 4224}, {1, 64, 4224}, {1, 64, 2112}, {1, 128, 2112},
                                      {1, 128, 1056}, {1, 135168}, {1, 512}, {1, 10}};
    std::vector<Shape> got;
    for (const auto& t : trace) {
        if (t.layer == "conv1d" || t.layer == "maxpool1d" || t.layer == "flatten" || t.layer == "dense") got.push_back(t.shape);
    }
    EXPECT_EQ(got, expected);
    EXPECT_EQ(y.shape(), (Shape{1, 10}));
}

TEST(Mlp, ShapeAndZeroNetwork) {
    auto spec = ModelSpec::make(ModelKind::Mlp, 8448, 10);
    auto net = build_network<double>(spec);
    for (auto& p : net.params()) p.value->fill(0.0);
    auto& out = dynamic_cast<Dense<double>&>(net.layer(2));
    for (std::size_t k = 0; k < 10; ++k) out.bias()[k] = static_cast<double>(k);
    const auto y = net.forward(Tensor<double>({2, 8448}, 1.0), Mode::Eval);
    EXPECT_EQ(y.shape(), (Shape{2, 10}));
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(y[n * 10 + k], static_cast<double>(k));
    }
}

TEST(Mlp, ToyGradientCheck) {
    auto spec = ModelSpec::make(ModelKind::Mlp, 8, 3);
    spec.mlp.hidden = 5;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto net = build_network<double>(spec);
        net.init(seed);
        Rng rng(seed);
        const std::vector<std::size_t> labels{0, 2, 1, 1};
        const auto rep = beacon::testing::check_network(net, beacon::testing::random_tensor({4, 8}, rng), labels, Mode::Train);
        EXPECT_LT(rep.worst(), 1e-5) << seed;
    }
}

TEST(Cnn, SmallNetworkGradientCheck) {
    auto spec = small_cnn(16, 3);
    spec.cnn.dropout = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto net = build_network<double>(spec);
        net.init(seed);
        Rng rng(seed);
        const std::vector<std::size_t> labels{0, 1, 2};
        const auto rep = beacon::testing::check_network(net, beacon::testing::random_tensor({3, 16}, rng), labels, Mode::Train);
        EXPECT_LT(rep.input, 1e-4) << "input, seed " << seed;
        for (const auto& [name, err] : rep.params) {
            // Batchnorm cancels a per-channel shift, so the conv bias gradient is exactly zero
            // and the relative error compares rounding noise.
            if (name.ends_with("conv1d.bias")) continue;
            EXPECT_LT(err, 1e-4) << name << ", seed " << seed;
        }
        for (const auto& p : net.params()) {
            if (!p.name.ends_with("conv1d.bias")) continue;
            for (double g : p.grad->values()) EXPECT_LT(std::abs(g), 1e-12) << p.name << ", seed " << seed;
        }
    }
}

TEST(Train, CnnOverfitsTinySet) {
    const auto& set = two_family_set();
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.seed = 3;
    auto result = train(ModelSpec::make(ModelKind::Cnn, set.target_length, 2), set.label_set, set.data, nullptr, cfg);
    ASSERT_EQ(result.log.size(), 30u);
    EXPECT_LT(result.log.back().train_loss, result.log.front().train_loss);
    EXPECT_GE(train_set_accuracy(result.model, set.data), 0.99);
    EXPECT_TRUE(std::isnan(result.log.back().val_acc));
}

TEST(Train, MlpOverfitsAndLossFallsForEverySeed) {
    const auto& set = two_family_set();
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        TrainConfig cfg;
        cfg.epochs = 30;
        cfg.batch_size = 8;
        cfg.adam.lr = 1e-3;
        cfg.seed = seed;
        auto result = train(ModelSpec::make(ModelKind::Mlp, set.target_length, 2), set.label_set, set.data, &set.data, cfg);
        EXPECT_LT(result.log.back().train_loss, result.log.front().train_loss) << seed;
        EXPECT_GE(train_set_accuracy(result.model, set.data), 0.99) << seed;
        EXPECT_FALSE(std::isnan(result.log.back().val_acc));
    }
}

TEST(Train, ZeroLearningRateKeepsParameters) {
    Rng rng(1);
    const auto data = random_set(20, 16, 3, rng);
    const auto spec = small_cnn(16, 3);
    TrainConfig cfg;
    cfg.adam.lr = 0.0;
    cfg.epochs = 2;
    cfg.batch_size = 7;
    auto result = train(spec, {"a", "b", "c"}, data, nullptr, cfg);
    auto fresh = build_network<float>(spec);
    fresh.init(cfg.seed);
    const auto after = result.model.net.params();
    const auto before = fresh.params();
    ASSERT_EQ(after.size(), before.size());
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(after[i].value->storage(), before[i].value->storage()) << after[i].name;
}

TEST(Train, SameSeedIsBitIdentical) {
    Rng rng(2);
    const auto data = random_set(30, 32, 3, rng);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.adam.lr = 1e-3;
    for (auto spec : {small_cnn(32, 3), ModelSpec::make(ModelKind::Mlp, 32, 3)}) {
        auto a = train(spec, {"a", "b", "c"}, data, nullptr, cfg);
        auto b = train(spec, {"a", "b", "c"}, data, nullptr, cfg);
        EXPECT_EQ(snapshot(a.model.net), snapshot(b.model.net));
        cfg.seed = 99;
        auto c = train(spec, {"a", "b", "c"}, data, nullptr, cfg);
        EXPECT_NE(snapshot(a.model.net), snapshot(c.model.net));
        cfg.seed = 1;
    }
}

TEST(Train, LabelSetMismatchIsConfigError) {
    Rng rng(3);
    const auto data = random_set(10, 8, 2, rng);
    auto spec = ModelSpec::make(ModelKind::Mlp, 8, 2);
    TrainConfig cfg;
    cfg.epochs = 1;
    try {
        train(spec, {"a", "b", "c"}, data, nullptr, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
    LabeledSet bad = data;
    bad.labels[0] = 5;
    try {
        train(spec, {"a", "b"}, bad, nullptr, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Config);
    }
}

TEST(Train, DefaultBatchSizes) {
    EXPECT_EQ(TrainConfig::default_batch_size(ModelKind::Cnn), 64u);
    EXPECT_EQ(TrainConfig::default_batch_size(ModelKind::Mlp), 64u);
    EXPECT_EQ(TrainConfig::default_batch_size(ModelKind::BiLstm), 32u);
}

TEST(Predict, RowsAreSimplicesAndZeroNetworkIsUniform) {
    Rng rng(4);
    const auto data = random_set(9, 16, 4, rng);
    TrainedModel model{small_cnn(16, 4), {"a", "b", "c", "d"}, build_network<float>(small_cnn(16, 4))};
    model.net.init(1);
    const auto p = predict(model, data, 4);
    for (std::size_t n = 0; n < 9; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) s += p[n * 4 + k];
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
    auto mlp_spec = ModelSpec::make(ModelKind::Mlp, 16, 4);
    TrainedModel zero{mlp_spec, {"a", "b", "c", "d"}, build_network<float>(mlp_spec)};
    for (auto& prm : zero.net.params()) prm.value->fill(0.0f);
    const auto u = predict(zero, data);
    for (float v : u.storage()) EXPECT_NEAR(v, 0.25, 1e-6);
    LabeledSet wrong;
    wrong.add(std::vector<float>(15, 0.f), 0);
    EXPECT_THROW(predict(model, wrong), Error);
}

TEST(ModelFile, RoundTrip) {
    Rng rng(5);
    const auto data = random_set(12, 16, 3, rng);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.adam.lr = 1e-3;
    for (auto spec : {small_cnn(16, 3), ModelSpec::make(ModelKind::Mlp, 16, 3), [] {
             auto s = ModelSpec::make(ModelKind::BiLstm, 16, 3);
             s.lstm.hidden = 4;
             return s;
         }()}) {
        auto result = train(spec, {"x", "y", "z"}, data, nullptr, cfg);
        TempDir dir;
        save_model(dir / "m.beam", result.model);
        auto loaded = load_model(dir / "m.beam");
        EXPECT_EQ(loaded.label_set, result.model.label_set);
        EXPECT_EQ(loaded.spec.kind, spec.kind);
        EXPECT_EQ(snapshot(loaded.net), snapshot(result.model.net));
        EXPECT_EQ(predict(loaded, data).storage(), predict(result.model, data).storage());
        save_model(dir / "again.beam", loaded);
        EXPECT_EQ(read_file(dir / "m.beam"), read_file(dir / "again.beam"));
        EXPECT_EQ(read_file(dir / "m.beam").substr(0, 4), "BEAM");
    }
    try {
        load_model("/nonexistent/model.beam");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MissingArtifact);
    }
}

TEST(EpochLog, CsvFormat) {
    std::vector<EpochRecord> log{{1, 0.5, 0.75, std::nan("")}, {2, 0.25, 1.0, 0.5}};
    EXPECT_EQ(epoch_log_csv(log), "epoch,train_loss,train_acc,val_acc\n1,0.5,0.75,nan\n2,0.25,1,0.5\n");
}
