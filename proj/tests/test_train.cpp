#include <doctest.h>

#include <random>

#include "se3movf/errors.hpp"
#include "se3movf/synthetic.hpp"
#include "se3movf/train.hpp"

using namespace se3movf;

namespace {

ArchConfig tiny_arch(int classes = 2) {
    ArchConfig a;
    a.num_classes = classes;
    a.sigma_prime = 1.0;
    BlockConfig b;
    b.channels = 4;
    b.mlp_hidden = 4;
    b.sigma = 0.8;
    a.blocks = {b};
    return a;
}

} // namespace

TEST_CASE("cross entropy of symmetric two-class logits is ln 2") {
    const std::vector<double> logits = {-0.5, 0.5};
    // ce(label 1) = log(e^-1 + 1); ce with equal logits = ln 2
    CHECK(cross_entropy<double>({0.3, 0.3}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(cross_entropy(logits, 1) == doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
    CHECK(cross_entropy(logits, 0) ==
          doctest::Approx(1.0 + std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
}

TEST_CASE("cross entropy is stable for huge logits") {
    const std::vector<double> big = {1e30, -1e30};
    CHECK(cross_entropy(big, 0) == 0.0);
    CHECK(std::isfinite(cross_entropy(big, 1)));
    std::vector<double> g;
    (void)cross_entropy(big, 0, &g);
    CHECK(g[0] == doctest::Approx(0.0));
    CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("cross entropy gradient matches finite differences") {
    std::vector<double> logits = {0.2, -1.3, 0.9, 0.4};
    std::vector<double> g;
    (void)cross_entropy(logits, 2, &g);
    const double eps = 1e-7;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        auto lp = logits, lm = logits;
        lp[j] += eps;
        lm[j] -= eps;
        const double fd = (cross_entropy(lp, 2) - cross_entropy(lm, 2)) / (2 * eps);
        CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6));
    }
    // gradient sums to zero (softmax minus onehot)
    CHECK(g[0] + g[1] + g[2] + g[3] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("out-of-range labels are rejected") {
    const std::vector<float> logits = {0.0f, 1.0f};
    CHECK_THROWS_AS((void)cross_entropy(logits, 2), LabelOutOfRange);
    CHECK_THROWS_AS((void)cross_entropy(logits, -1), LabelOutOfRange);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
    const ArchConfig a = tiny_arch();
    std::mt19937_64 rng(80);
    auto p = init_params<double>(a, rng);
    const auto before = p;
    AdamState<double> st;
    TrainConfig cfg;
    adam_step(p, zero_like(p), st, cfg);
    adam_step(p, zero_like(p), st, cfg);
    for (const auto& [name, t] : before)
        if (is_trainable(name)) CHECK(p.at(name).v == t.v);
}

TEST_CASE("adam matches a two-parameter hand computation") {
    // one tensor of two entries, two steps with fixed gradients
    ParamMap<double> p;
    p.emplace("w", Tensor<double>({2}));
    p.at("w").v = {1.0, -2.0};
    ParamMap<double> g;
    g.emplace("w", Tensor<double>({2}));
    g.at("w").v = {0.5, -1.5};
    TrainConfig cfg;
    cfg.learning_rate = 0.1;

    // independent scalar reference
    double w[2] = {1.0, -2.0}, m[2] = {0, 0}, v[2] = {0, 0};
    for (int t = 1; t <= 2; ++t) {
        for (int i = 0; i < 2; ++i) {
            const double gr = g.at("w").v[i];
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * gr;
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * gr * gr;
            const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
            const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
            w[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }

    AdamState<double> st;
    adam_step(p, g, st, cfg);
    adam_step(p, g, st, cfg);
    CHECK(p.at("w").v[0] == doctest::Approx(w[0]).epsilon(1e-12));
    CHECK(p.at("w").v[1] == doctest::Approx(w[1]).epsilon(1e-12));
    // first-step property: update magnitude is about lr regardless of scale
    ParamMap<double> q;
    q.emplace("w", Tensor<double>({1}));
    q.at("w").v = {3.0};
    ParamMap<double> gq;
    gq.emplace("w", Tensor<double>({1}));
    gq.at("w").v = {1e-4};
    AdamState<double> st2;
    adam_step(q, gq, st2, cfg);
    CHECK(q.at("w").v[0] == doctest::Approx(3.0 - cfg.learning_rate).epsilon(1e-3));
}

TEST_CASE("sgd applies the plain update") {
    ParamMap<float> p;
    p.emplace("w", Tensor<float>({2}));
    p.at("w").v = {1.0f, 2.0f};
    ParamMap<float> g;
    g.emplace("w", Tensor<float>({2}));
    g.at("w").v = {0.5f, -1.0f};
    TrainConfig cfg;
    cfg.learning_rate = 0.2;
    sgd_step(p, g, cfg);
    CHECK(p.at("w").v[0] == doctest::Approx(0.9f));
    CHECK(p.at("w").v[1] == doctest::Approx(2.2f));
}

TEST_CASE("octahedral augmentation draws uniformly from the 24 rotations") {
    // chi-squared goodness of fit over 10000 draws; identify the drawn element
    // by where a marked voxel lands
    Volume probe(3, 3, 3, 1);
    {
        // generic values: every rotation produces a distinct image
        std::mt19937_64 prng(98);
        std::uniform_real_distribution<float> dist(0, 1);
        for (auto& x : probe.data) x = dist(prng);
    }
    const auto& group = octahedral_group();
    std::vector<std::vector<float>> images;
    for (const auto& g : group) images.push_back(rotate_grid(probe, g).data);
    for (int i = 0; i < 24; ++i)
        for (int j = i + 1; j < 24; ++j) REQUIRE(images[i] != images[j]);

    std::mt19937_64 rng(99);
    std::vector<int> counts(24, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        const Volume r = augment_octahedral(probe, rng);
        int hit = -1;
        for (int k = 0; k < 24; ++k)
            if (images[k] == r.data) hit = k;
        REQUIRE(hit >= 0);
        counts[hit]++;
    }
    const double expect = draws / 24.0;
    double chi2 = 0;
    for (int k = 0; k < 24; ++k) chi2 += (counts[k] - expect) * (counts[k] - expect) / expect;
    // 23 degrees of freedom, critical value at p=0.01
    CHECK(chi2 <= 41.638);
}

TEST_CASE("evaluate reports accuracy, per-class counts and margins") {
    const ArchConfig a = tiny_arch();
    std::mt19937_64 rng(81);
    auto p = init_params<float>(a, rng);
    // rig the head so that the prediction is always class 0
    p.at("head.w").v = {0, 0, 0, 0, 0, 0, 0, 0};
    p.at("head.b").v = {2.0f, -1.0f};
    Dataset<float> ds;
    std::mt19937_64 drng(82);
    std::uniform_real_distribution<float> dist(-1, 1);
    for (int i = 0; i < 4; ++i) {
        Volume v(7, 7, 7, 1);
        for (auto& x : v.data) x = dist(drng);
        ds.images.push_back(v);
        ds.labels.push_back(i % 2);
    }
    const Metrics m = evaluate(ds, p, a);
    CHECK(m.accuracy == doctest::Approx(0.5));
    CHECK(m.per_class_total == std::vector<std::size_t>{2, 2});
    CHECK(m.per_class_correct == std::vector<std::size_t>{2, 0});
    CHECK(m.predictions == std::vector<int>{0, 0, 0, 0});
    for (float mg : m.margins) CHECK(mg == doctest::Approx(3.0f));
    CHECK(m.mean_cross_entropy > 0.0);

    const Metrics empty = evaluate(Dataset<float>{}, p, a);
    CHECK(empty.accuracy == 0.0);
}

TEST_CASE("lr=0 training leaves the initialization fixed; history is well formed") {
    const ArchConfig a = tiny_arch();
    std::mt19937_64 seed_rng(83);
    Dataset<float> train, val;
    {
        std::mt19937_64 rng(84);
        auto ds = make_blob_dataset<float>(6, 15, rng, 3.0);
        train.images.assign(ds.images.begin(), ds.images.begin() + 4);
        train.labels.assign(ds.labels.begin(), ds.labels.begin() + 4);
        val.images.assign(ds.images.begin() + 4, ds.images.end());
        val.labels.assign(ds.labels.begin() + 4, ds.labels.end());
    }
    TrainConfig cfg;
    cfg.batch_size = 2;
    cfg.epochs = 2;
    cfg.learning_rate = 0.0;
    cfg.optimizer = "sgd";
    cfg.seed = 7;
    std::mt19937_64 rng(cfg.seed);
    const auto init = init_params<float>(a, rng);
    const auto res = train_loop(train, val, a, cfg);
    REQUIRE(res.history.size() == 2);
    CHECK(res.history[0].epoch == 0);
    CHECK(res.history[1].epoch == 1);
    CHECK(res.history[0].train_loss > 0.0);
    for (const auto& [name, t] : init)
        if (is_trainable(name)) CHECK(res.best_params.at(name).v == t.v);
}

TEST_CASE("identical seeds give bit-identical training runs") {
    const ArchConfig a = tiny_arch();
    Dataset<float> train, val;
    {
        std::mt19937_64 rng(85);
        auto ds = make_blob_dataset<float>(8, 15, rng, 3.0);
        train.images.assign(ds.images.begin(), ds.images.begin() + 6);
        train.labels.assign(ds.labels.begin(), ds.labels.begin() + 6);
        val.images.assign(ds.images.begin() + 6, ds.images.end());
        val.labels.assign(ds.labels.begin() + 6, ds.labels.end());
    }
    TrainConfig cfg;
    cfg.batch_size = 3;
    cfg.epochs = 2;
    cfg.learning_rate = 1e-3;
    cfg.augment = "octahedral";
    cfg.seed = 42;
    const auto r1 = train_loop(train, val, a, cfg);
    const auto r2 = train_loop(train, val, a, cfg);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t e = 0; e < r1.history.size(); ++e) {
        CHECK(r1.history[e].train_loss == r2.history[e].train_loss);
        CHECK(r1.history[e].val_accuracy == r2.history[e].val_accuracy);
    }
    for (const auto& [name, t] : r1.best_params) CHECK(r2.best_params.at(name).v == t.v);

    // a different seed changes the trajectory
    cfg.seed = 43;
    const auto r3 = train_loop(train, val, a, cfg);
    CHECK(r3.history[0].train_loss != r1.history[0].train_loss);
}

TEST_CASE("training reduces the loss on a separable synthetic problem") {
    const ArchConfig a = tiny_arch();
    Dataset<float> train;
    {
        std::mt19937_64 rng(86);
        auto ds = make_blob_dataset<float>(8, 15, rng, 3.0);
        train = ds;
    }
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 6;
    cfg.learning_rate = 3e-3;
    cfg.seed = 1;
    const auto res = train_loop(train, train, a, cfg);
    CHECK(res.history.back().train_loss < res.history.front().train_loss);
}

TEST_CASE("empty training set is rejected") {
    const ArchConfig a = tiny_arch();
    TrainConfig cfg;
    CHECK_THROWS_AS((void)train_loop(Dataset<float>{}, Dataset<float>{}, a, cfg), ShapeMismatch);
}

TEST_CASE("blob generator: labels balanced, shapes right, mass matched") {
    std::mt19937_64 rng(87);
    const auto ds = make_blob_dataset<float>(10, 29, rng);
    REQUIRE(ds.size() == 10);
    int ones = 0;
    for (int l : ds.labels) ones += l;
    CHECK(ones == 5);
    double mass0 = 0, mass1 = 0;
    int n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.images[i].dims() == std::array<int, 3>{29, 29, 29});
        double m = 0;
        for (float x : ds.images[i].data) m += x;
        (ds.labels[i] ? mass1 : mass0) += m;
        (ds.labels[i] ? n1 : n0)++;
    }
    // both classes carry about the same total intensity
    CHECK(mass0 / n0 == doctest::Approx(mass1 / n1).epsilon(0.05));
}
