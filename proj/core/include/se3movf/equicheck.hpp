#pragma once

// Empirical equivariance/invariance verification and rotation sweeps.

#include <functional>
#include <string>
#include <vector>

#include "se3movf/errors.hpp"
#include "se3movf/frame.hpp"
#include "se3movf/network.hpp"
#include "se3movf/train.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

// Max over all 24 octahedral rotations of ||logits(g*v) - logits(v)||_inf.
template <typename T>
double logit_invariance(const ParamMap<T>& params, const ArchConfig& arch,
                        const VolumeT<T>& v) {
    const auto base = network_forward(v, arch, params);
    double worst = 0;
    for (const auto& g : octahedral_group()) {
        const auto rotated = network_forward(rotate_grid(v, g), arch, params);
        for (std::size_t j = 0; j < base.size(); ++j)
            worst = std::max(worst, std::abs(static_cast<double>(rotated[j]) - base[j]));
    }
    return worst;
}

struct SweepRow {
    char axis;
    double angle_deg;
    double accuracy;
    double mean_logit_dev;
    std::vector<int> predictions;
    std::vector<float> margins;
};

// Evaluate the test set rotated by each angle about one axis; the deviation
// column is the mean over samples of ||logits(angle) - logits(0)||_inf.
template <typename T>
std::vector<SweepRow> rotation_sweep(const ParamMap<T>& params, const ArchConfig& arch,
                                     const Dataset<T>& test, Axis axis,
                                     const std::vector<double>& angles_deg) {
    std::vector<std::vector<T>> base_logits;
    base_logits.reserve(test.size());
    for (const auto& img : test.images)
        base_logits.push_back(network_forward(img, arch, params));

    const char axis_names[3] = {'X', 'Y', 'Z'};
    std::vector<SweepRow> rows;
    for (const double deg : angles_deg) {
        const double rad = deg * M_PI / 180.0;
        SweepRow row{axis_names[static_cast<int>(axis)], deg, 0.0, 0.0, {}, {}};
        std::size_t correct = 0;
        double dev = 0;
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto img = deg == 0.0 ? test.images[i] : rotate_interp(test.images[i], axis, rad);
            const auto logits = network_forward(img, arch, params);
            double worst = 0;
            for (std::size_t j = 0; j < logits.size(); ++j)
                worst = std::max(worst,
                                 std::abs(static_cast<double>(logits[j]) - base_logits[i][j]));
            dev += worst;
            const int pred = static_cast<int>(
                std::max_element(logits.begin(), logits.end()) - logits.begin());
            T second = std::numeric_limits<T>::lowest();
            for (std::size_t j = 0; j < logits.size(); ++j)
                if (static_cast<int>(j) != pred && logits[j] > second) second = logits[j];
            row.predictions.push_back(pred);
            row.margins.push_back(static_cast<float>(logits[pred] - second));
            if (pred == test.labels[i]) ++correct;
        }
        row.accuracy = test.size() ? static_cast<double>(correct) / test.size() : 0.0;
        row.mean_logit_dev = test.size() ? dev / test.size() : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "axis,angle_deg,accuracy,mean_logit_dev\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%c,%g,%.6f,%.9g\n", r.axis, r.angle_deg, r.accuracy,
                      r.mean_logit_dev);
        out += buf;
    }
    return out;
}

// How the channels of an operator's output transform under a rotation.
enum class ChannelTransform {
    Scalar, // channels permute with the voxels only
    Jet,    // groups of 10: scalar, gradient by R, Hessian by R . R^T
};

// Transform jet-layout channels (groups of 10) by the prolonged action of g.
template <typename T>
VolumeT<T> transform_jet_channels(const VolumeT<T>& jet, const GridRotation& g) {
    if (jet.c % kJetChannels != 0)
        throw ShapeMismatch("jet channel count must be a multiple of 10");
    const auto rm = g.matrix();
    FrameFieldT<T> rot;
    rot.rows = VolumeT<T>(jet.w, jet.h, jet.d, 9);
    for (std::size_t vox = 0; vox < jet.voxels(); ++vox) {
        T* p = rot.rows.data.data() + vox * 9;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) p[3 * i + j] = static_cast<T>(rm[i][j]);
    }
    return apply_frame(rot, jet);
}

// ||op(g*v) - g*op(v)||_inf with the output channels transformed according to
// the operator's declared type.
template <typename T>
double operator_equivariance(const std::function<VolumeT<T>(const VolumeT<T>&)>& op,
                             const VolumeT<T>& v, const GridRotation& g,
                             ChannelTransform transform) {
    const VolumeT<T> lhs = op(rotate_grid(v, g));
    VolumeT<T> rhs = rotate_grid(op(v), g);
    switch (transform) {
        case ChannelTransform::Scalar: break;
        case ChannelTransform::Jet: rhs = transform_jet_channels(rhs, g); break;
        default: throw UnknownChannelTransformType("unknown channel transform");
    }
    if (!lhs.same_shape(rhs)) throw ShapeMismatch("operator changed shape under rotation");
    double worst = 0;
    for (std::size_t i = 0; i < lhs.data.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(lhs.data[i]) - rhs.data[i]));
    return worst;
}

} // namespace se3movf
