#include <gtest/gtest.h>

#include <cstdlib>
#include <random>

#include "efprune/checkpoint.hpp"
#include "efprune/data.hpp"
#include "efprune/presets.hpp"
#include "efprune/trainer.hpp"
#include "support/fixtures.hpp"

using namespace efprune;
namespace fs = std::filesystem;

namespace {

DataErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const DataError& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected a DataError";
    return DataErrorKind::BadFormat;
}

class IdxFixture : public ::testing::Test {
protected:
    void SetUp() override { dir = fixture::temp_dir("idx"); }
    void TearDown() override { fs::remove_all(dir); }

    Dataset load(const fixture::Bytes& images, const fixture::Bytes& labels) {
        fixture::write(dir / "img", images);
        fixture::write(dir / "lbl", labels);
        return load_mnist_idx(dir / "img", dir / "lbl");
    }
    DataErrorKind fails(const fixture::Bytes& images, const fixture::Bytes& labels) {
        return kind_of([&] { load(images, labels); });
    }

    fs::path dir;
};

} // namespace

TEST_F(IdxFixture, AcceptsValidMagicsAndNormalizes) {
    const auto images = fixture::idx_images(3);
    const auto ds = load(images, fixture::idx_labels({7, 0, 9}));
    EXPECT_EQ(ds.size(), 3);
    EXPECT_EQ(ds.sample_shape(), (Shape{1, 28, 28}));
    EXPECT_EQ(ds.labels, (std::vector<int>{7, 0, 9}));
    EXPECT_EQ(ds.classes, 10);
    // Pixel bytes start after the 16-byte header.
    for (Index i : {Index{0}, Index{100}, Index{3 * 784 - 1}}) {
        const float raw = static_cast<float>(images[16 + static_cast<std::size_t>(i)]) / 255.0f;
        EXPECT_FLOAT_EQ(ds.images[i], (raw - 0.1307f) / 0.3081f);
    }
    const auto back = ds.denormalized(1);
    EXPECT_NEAR(back[5], static_cast<float>(images[16 + 784 + 5]) / 255.0f, 1e-6);
}

TEST_F(IdxFixture, RejectsBadMagic) {
    EXPECT_EQ(fails(fixture::idx_images(2, 2049), fixture::idx_labels({1, 2})), DataErrorKind::BadMagic);
    EXPECT_EQ(fails(fixture::idx_images(2), fixture::idx_labels({1, 2}, 2051)), DataErrorKind::BadMagic);
    // Little-endian magic is a common corruption.
    EXPECT_EQ(fails(fixture::idx_images(2, 0x03080000), fixture::idx_labels({1, 2})), DataErrorKind::BadMagic);
}

TEST_F(IdxFixture, RejectsTruncatedAndEmptyFiles) {
    auto images = fixture::idx_images(2);
    images.resize(images.size() - 10);
    EXPECT_EQ(fails(images, fixture::idx_labels({1, 2})), DataErrorKind::Truncated);
    EXPECT_EQ(fails({}, fixture::idx_labels({1, 2})), DataErrorKind::Truncated);
    auto labels = fixture::idx_labels({1, 2});
    labels.pop_back();
    EXPECT_EQ(fails(fixture::idx_images(2), labels), DataErrorKind::Truncated);
    EXPECT_EQ(fails(fixture::idx_images(2), {0, 0, 8}), DataErrorKind::Truncated);
}

TEST_F(IdxFixture, RejectsCountAndSizeMismatches) {
    EXPECT_EQ(fails(fixture::idx_images(3), fixture::idx_labels({1, 2})), DataErrorKind::CountMismatch);
    auto images = fixture::idx_images(2);
    images.push_back(0);
    EXPECT_EQ(fails(images, fixture::idx_labels({1, 2})), DataErrorKind::SizeMismatch);
    EXPECT_EQ(fails(fixture::idx_images(2, 2051, 32, 32), fixture::idx_labels({1, 2})), DataErrorKind::BadFormat);
    EXPECT_EQ(fails(fixture::idx_images(0), fixture::idx_labels({})), DataErrorKind::BadFormat);
}

TEST_F(IdxFixture, RejectsOutOfRangeLabel) {
    EXPECT_EQ(fails(fixture::idx_images(2), fixture::idx_labels({1, 10})), DataErrorKind::BadFormat);
}

TEST_F(IdxFixture, MissingFilesAndDirectory) {
    EXPECT_EQ(kind_of([&] { load_mnist_idx(dir / "nope", dir / "nada"); }), DataErrorKind::NotFound);
    EXPECT_EQ(kind_of([&] { load_mnist_dir(dir / "missing", Split::Train); }), DataErrorKind::NotFound);
}

TEST_F(IdxFixture, DirectoryResolvesConventionalNames) {
    fixture::write(dir / "t10k-images-idx3-ubyte", fixture::idx_images(2));
    fixture::write(dir / "t10k-labels-idx1-ubyte", fixture::idx_labels({3, 4}));
    fixture::write(dir / "train-images.idx3-ubyte", fixture::idx_images(1));
    fixture::write(dir / "train-labels.idx1-ubyte", fixture::idx_labels({5}));
    EXPECT_EQ(load_mnist_dir(dir, Split::Test).size(), 2);
    EXPECT_EQ(load_mnist_dir(dir, Split::Train).labels, std::vector<int>{5});
}

// Official files, when available locally.
TEST(MnistFiles, OfficialSplitSizes) {
    const char* env = std::getenv("EFPRUNE_MNIST_DIR");
    if (!env || !fs::is_directory(env)) GTEST_SKIP() << "EFPRUNE_MNIST_DIR not set";
    const auto train = load_mnist_dir(env, Split::Train);
    const auto test = load_mnist_dir(env, Split::Test);
    EXPECT_EQ(train.size(), 60000);
    EXPECT_EQ(test.size(), 10000);
    for (int l : train.labels) ASSERT_TRUE(l >= 0 && l <= 9);
}

TEST(Cifar, SizeMismatchLabelsAndNormalization) {
    const auto dir = fixture::temp_dir("cifar");
    EXPECT_EQ(kind_of([&] { load_cifar10_binary(dir / "missing"); }), DataErrorKind::NotFound);
    EXPECT_EQ(kind_of([&] { load_cifar10_binary(dir, Split::Test); }), DataErrorKind::NotFound);
    fixture::write(dir / "test_batch.bin", fixture::Bytes(100, 0));
    EXPECT_EQ(kind_of([&] { load_cifar10_binary(dir, Split::Test); }), DataErrorKind::SizeMismatch);

    fixture::Bytes batch(kCifarRecordBytes * kCifarRecordsPerFile);
    std::mt19937_64 rng(3);
    for (std::size_t r = 0; r < kCifarRecordsPerFile; ++r) {
        batch[r * kCifarRecordBytes] = static_cast<unsigned char>(r % 10);
        for (std::size_t i = 1; i < kCifarRecordBytes; ++i) batch[r * kCifarRecordBytes + i] = static_cast<unsigned char>(rng());
    }
    fixture::write(dir / "test_batch.bin", batch);
    const auto ds = load_cifar10_binary(dir, Split::Test);
    EXPECT_EQ(ds.size(), 10000);
    EXPECT_EQ(ds.sample_shape(), (Shape{3, 32, 32}));
    EXPECT_EQ(ds.labels[13], 3);
    // Record 1, green channel, pixel 7.
    const float raw = static_cast<float>(batch[kCifarRecordBytes + 1 + 1024 + 7]) / 255.0f;
    EXPECT_FLOAT_EQ(ds.images[(1 * 3 + 1) * 1024 + 7], (raw - 0.4822f) / 0.2435f);

    batch[5 * kCifarRecordBytes] = 11;
    fixture::write(dir / "test_batch.bin", batch);
    EXPECT_EQ(kind_of([&] { load_cifar10_binary(dir, Split::Test); }), DataErrorKind::BadFormat);
    fs::remove_all(dir);
}

TEST(Synthetic, DeterministicBalancedAndSplitDistinct) {
    SyntheticSpec s;
    s.classes = 5;
    s.samples = 50;
    const auto a = synthetic_task(s), b = synthetic_task(s), t = synthetic_task(s, Split::Test);
    EXPECT_TRUE(a.images == b.images);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_FALSE(a.images == t.images);
    for (int c = 0; c < 5; ++c) EXPECT_EQ(std::count(a.labels.begin(), a.labels.end(), c), 10);
    EXPECT_TRUE(a.images.all_finite());
    EXPECT_EQ(a.images.dim(0), static_cast<Index>(a.labels.size()));
    s.seed = 2;
    EXPECT_FALSE(synthetic_task(s).images == a.images);
    s.classes = 1;
    EXPECT_THROW(synthetic_task(s), ConfigError);
}

TEST(Synthetic, HeadKeepsOrder) {
    SyntheticSpec s;
    s.samples = 20;
    const auto ds = synthetic_task(s);
    const auto h = ds.head(7);
    EXPECT_EQ(h.size(), 7);
    for (Index i = 0; i < 7 * 144; ++i) ASSERT_EQ(h.images[i], ds.images[i]);
    EXPECT_EQ(ds.head(100).size(), 20);
}

// Separation 0 carries no class signal; the default separation is learnable by a 2-conv model in 5 epochs.
TEST(Synthetic, LearnabilityCalibration) {
    auto accuracy = [](double separation) {
        SyntheticSpec s;
        s.classes = 4;
        s.samples = 800;
        s.height = s.width = 10;
        s.separation = separation;
        const auto train_set = synthetic_task(s);
        s.samples = 400;
        const auto test_set = synthetic_task(s, Split::Test);
        PresetOptions o;
        o.width = 8;
        o.depth = 2;
        o.input_chw = {1, 10, 10};
        o.classes = 4;
        auto m = build_preset<float>(o, 1);
        TrainConfig c;
        c.epochs = 5;
        c.batch_size = 32;
        c.lr_policy = LrPolicy::constant(0.05);
        train(m, train_set, nullptr, c);
        return evaluate(m, test_set);
    };
    EXPECT_LT(accuracy(0.0), 0.40);
    EXPECT_GT(accuracy(SyntheticSpec{}.separation), 0.90);
}

TEST(Checkpoint, RoundTripWithOptimizer) {
    const auto dir = fixture::temp_dir("ckpt");
    PresetOptions o;
    o.name = "toy-resnet";
    o.input_chw = {1, 8, 8};
    Checkpoint ck;
    ck.model = build_preset<double>(o, 4);
    ck.config_json = TrainConfig{}.to_json();
    ck.epoch = 17;
    Sgd<double> sgd(0.9, 5e-4);
    Gradients<double> g;
    for (const auto& p : ck.model.parameters()) g.emplace_back(p.value->shape());
    for (auto& t : g) t.data().setConstant(0.25);
    sgd.step(ck.model, g, 0.1);
    ck.optimizer = capture_optimizer(sgd);
    save_checkpoint(ck, dir / "a.bin");

    const auto back = load_checkpoint(dir / "a.bin");
    EXPECT_EQ(back.epoch, 17);
    EXPECT_EQ(back.config_json, ck.config_json);
    EXPECT_EQ(back.config_digest(), ck.config_digest());
    const auto pa = ck.model.parameters();
    const auto pb = back.model.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        EXPECT_EQ(pa[i].name, pb[i].name);
        EXPECT_TRUE(*pa[i].value == *pb[i].value) << pa[i].name;
    }
    ASSERT_TRUE(back.optimizer.has_value());
    EXPECT_EQ(back.optimizer->momentum, 0.9);
    EXPECT_EQ(back.optimizer->weight_decay, 5e-4);
    EXPECT_TRUE(back.optimizer->initialized);
    ASSERT_EQ(back.optimizer->velocity.size(), ck.optimizer->velocity.size());
    for (std::size_t i = 0; i < back.optimizer->velocity.size(); ++i)
        EXPECT_TRUE(back.optimizer->velocity[i] == ck.optimizer->velocity[i]);
    std::mt19937_64 rng(1);
    Tensor<double> x({2, 1, 8, 8});
    for (Index i = 0; i < x.size(); ++i) x[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    EXPECT_TRUE(forward(ck.model, x) == forward(back.model, x));
    fs::remove_all(dir);
}

TEST(Checkpoint, RejectsCorruptFiles) {
    const auto dir = fixture::temp_dir("ckpt_bad");
    Checkpoint ck;
    PresetOptions o;
    o.input_chw = {1, 8, 8};
    ck.model = build_preset<double>(o, 1);
    ck.config_json = "{}";
    save_checkpoint(ck, dir / "good.bin");
    std::ifstream in(dir / "good.bin", std::ios::binary);
    fixture::Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    EXPECT_EQ(kind_of([&] { load_checkpoint(dir / "absent.bin"); }), DataErrorKind::NotFound);
    auto bad = bytes;
    bad[0] = 'X';
    fixture::write(dir / "magic.bin", bad);
    EXPECT_EQ(kind_of([&] { load_checkpoint(dir / "magic.bin"); }), DataErrorKind::BadMagic);
    bad = bytes;
    bad.resize(bad.size() / 2);
    fixture::write(dir / "short.bin", bad);
    EXPECT_EQ(kind_of([&] { load_checkpoint(dir / "short.bin"); }), DataErrorKind::Truncated);
    // Flip a byte inside the stored config json so its digest no longer matches.
    bad = bytes;
    bad[8 + 4 + 8 + 8] ^= 0x01;
    fixture::write(dir / "digest.bin", bad);
    EXPECT_EQ(kind_of([&] { load_checkpoint(dir / "digest.bin"); }), DataErrorKind::BadFormat);
    fs::remove_all(dir);
}
