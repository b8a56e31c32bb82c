#pragma once

// Loss, optimizers, octahedral augmentation, the training loop and evaluation
// metrics. Everything is seeded and single-threaded deterministic: identical
// seeds give bit-identical histories.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "se3movf/errors.hpp"
#include "se3movf/network.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

struct TrainConfig {
    int batch_size = 32;
    int epochs = 10;
    double learning_rate = 1e-3;
    std::string optimizer = "adam"; // adam | sgd
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    std::string augment = "none"; // none | octahedral | interp
    std::uint64_t seed = 0;
};

struct Metrics {
    double accuracy = 0;
    double mean_cross_entropy = 0;
    std::vector<std::size_t> per_class_correct;
    std::vector<std::size_t> per_class_total;
    std::vector<int> predictions;
    std::vector<float> margins; // logit margin of the predicted class
};

struct EpochStats {
    int epoch;
    double train_loss;
    double val_accuracy;
};

template <typename T>
struct Dataset {
    std::vector<VolumeT<T>> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

// Numerically stable cross entropy; dlogits = softmax - onehot.
template <typename T>
T cross_entropy(const std::vector<T>& logits, int label, std::vector<T>* dlogits = nullptr) {
    const int n = static_cast<int>(logits.size());
    if (label < 0 || label >= n)
        throw LabelOutOfRange("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(n) + ")");
    const T mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    for (const T l : logits) sum += std::exp(static_cast<double>(l - mx));
    const double logz = std::log(sum) + static_cast<double>(mx);
    if (dlogits) {
        dlogits->resize(n);
        for (int j = 0; j < n; ++j)
            (*dlogits)[j] = static_cast<T>(std::exp(static_cast<double>(logits[j]) - logz) -
                                           (j == label ? 1.0 : 0.0));
    }
    return static_cast<T>(logz - static_cast<double>(logits[label]));
}

template <typename T>
struct AdamState {
    ParamMap<T> m, v;
    long t = 0;
};

template <typename T>
void adam_step(ParamMap<T>& params, const ParamMap<T>& grads, AdamState<T>& state,
               const TrainConfig& cfg) {
    if (state.t == 0) {
        state.m = zero_like(params);
        state.v = zero_like(params);
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, state.t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, state.t);
    for (const auto& [name, g] : grads) {
        auto& p = params.at(name);
        if (p.size() != g.size()) throw ShapeMismatch("adam: gradient shape mismatch for " + name);
        auto& m = state.m.at(name);
        auto& v = state.v.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m.v[i] = static_cast<T>(cfg.beta1 * m.v[i] + (1.0 - cfg.beta1) * g.v[i]);
            v.v[i] = static_cast<T>(cfg.beta2 * v.v[i] +
                                    (1.0 - cfg.beta2) * static_cast<double>(g.v[i]) * g.v[i]);
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] -= static_cast<T>(cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

template <typename T>
void sgd_step(ParamMap<T>& params, const ParamMap<T>& grads, const TrainConfig& cfg) {
    for (const auto& [name, g] : grads) {
        auto& p = params.at(name);
        if (p.size() != g.size()) throw ShapeMismatch("sgd: gradient shape mismatch for " + name);
        for (std::size_t i = 0; i < p.size(); ++i)
            p.v[i] -= static_cast<T>(cfg.learning_rate * g.v[i]);
    }
}

// Uniformly random element of the 24-element grid rotation group, applied
// losslessly (pure index permutation).
template <typename T>
VolumeT<T> augment_octahedral(const VolumeT<T>& v, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 23);
    return rotate_grid(v, octahedral_group()[pick(rng)]);
}

template <typename T>
Metrics evaluate(const Dataset<T>& ds, const ParamMap<T>& params, const ArchConfig& arch) {
    Metrics m;
    m.per_class_correct.assign(arch.num_classes, 0);
    m.per_class_total.assign(arch.num_classes, 0);
    std::size_t correct = 0;
    double ce = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto logits = network_forward(ds.images[i], arch, params);
        const int pred = static_cast<int>(
            std::max_element(logits.begin(), logits.end()) - logits.begin());
        // margin: best logit minus runner-up
        T best = logits[pred], second = std::numeric_limits<T>::lowest();
        for (int j = 0; j < arch.num_classes; ++j)
            if (j != pred && logits[j] > second) second = logits[j];
        m.predictions.push_back(pred);
        m.margins.push_back(static_cast<float>(best - second));
        ce += cross_entropy(logits, ds.labels[i]);
        m.per_class_total[ds.labels[i]]++;
        if (pred == ds.labels[i]) {
            ++correct;
            m.per_class_correct[ds.labels[i]]++;
        }
    }
    m.accuracy = ds.size() ? static_cast<double>(correct) / ds.size() : 0.0;
    m.mean_cross_entropy = ds.size() ? ce / ds.size() : 0.0;
    return m;
}

template <typename T>
struct TrainResult {
    ParamMap<T> best_params;
    std::vector<EpochStats> history;
};

template <typename T>
TrainResult<T> train_loop(const Dataset<T>& train, const Dataset<T>& val,
                          const ArchConfig& arch, const TrainConfig& cfg,
                          const std::function<void(const EpochStats&)>& on_epoch = {}) {
    if (train.size() == 0) throw ShapeMismatch("empty training set");
    std::mt19937_64 rng(cfg.seed);
    ParamMap<T> params = init_params<T>(arch, rng);
    AdamState<T> adam;

    TrainResult<T> result;
    result.best_params = params;
    double best_val = -1.0;

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<VolumeT<T>> batch;
            std::vector<int> labels;
            batch.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) {
                VolumeT<T> img = train.images[order[k]];
                if (cfg.augment == "octahedral") {
                    img = augment_octahedral(img, rng);
                } else if (cfg.augment == "interp") {
                    std::uniform_int_distribution<int> ax(0, 2);
                    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
                    img = rotate_interp(img, static_cast<Axis>(ax(rng)), ang(rng));
                }
                batch.push_back(std::move(img));
                labels.push_back(train.labels[order[k]]);
            }

            NetCacheT<T> cache;
            const auto logits = network_forward_batch(batch, arch, params, Mode::Train, &cache);
            std::vector<std::vector<T>> dlogits(batch.size());
            for (std::size_t s = 0; s < batch.size(); ++s) {
                epoch_loss += cross_entropy(logits[s], labels[s], &dlogits[s]);
                // mean loss over the batch
                for (auto& g : dlogits[s]) g /= static_cast<T>(batch.size());
            }
            seen += batch.size();
            const auto grads = network_backward(cache, dlogits, params);
            if (cfg.optimizer == "adam")
                adam_step(params, grads, adam, cfg);
            else
                sgd_step(params, grads, cfg);
        }

        const Metrics vm = evaluate(val, params, arch);
        EpochStats stats{epoch, seen ? epoch_loss / seen : 0.0, vm.accuracy};
        result.history.push_back(stats);
        if (on_epoch) on_epoch(stats);
        if (vm.accuracy > best_val) {
            best_val = vm.accuracy;
            result.best_params = params;
        }
    }
    if (val.size() == 0) result.best_params = params;
    return result;
}

} // namespace se3movf
