#pragma once

// SE3MovF blocks and the full network: frames computed once from the input,
// per-block Gaussian jets invariantized with those fixed frames, voxelwise
// MLPs with batchnorm, optional residual connections, 1x1x1 transition
// convolutions at width changes, stride-2 subsampling and a global max-pool
// head. Backward is hand-written reverse mode; the frame is a constant input,
// so no gradient ever flows through the eigendecomposition.

#include <array>
#include <cstring>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "se3movf/errors.hpp"
#include "se3movf/frame.hpp"
#include "se3movf/gaussian.hpp"
#include "se3movf/npy.hpp"
#include "se3movf/volume.hpp"

namespace se3movf {

template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s, T fill = T(0)) : shape(std::move(s)) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        v.assign(n, fill);
    }
    std::size_t size() const { return v.size(); }
    T& operator[](std::size_t i) { return v[i]; }
    T operator[](std::size_t i) const { return v[i]; }
};

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

struct BlockConfig {
    int channels = 8;
    int mlp_hidden = 8;
    double sigma = 1.0;
    double leaky_slope = 0.01;
    bool residual = false;
    int stride = 1; // 2 = subsample after this block
};

struct ArchConfig {
    std::vector<BlockConfig> blocks;
    int in_channels = 1;
    int num_classes = 2;
    double sigma_prime = 2.0; // frame scale
    double tau = 1e-2;        // frame row zeroing threshold
    double bn_eps = 1e-5;
    double bn_momentum = 0.9;

    int block_in_channels(std::size_t i) const {
        const int q_prev = i == 0 ? in_channels : blocks[i - 1].channels;
        return has_transition(i) ? blocks[i].channels : q_prev;
    }
    bool has_transition(std::size_t i) const {
        const int q_prev = i == 0 ? in_channels : blocks[i - 1].channels;
        return blocks[i].residual && q_prev != blocks[i].channels;
    }
    int mlp_in_dim(std::size_t i) const {
        return kJetChannels * block_in_channels(i) + (i == 0 ? 3 : 0);
    }
};

enum class Mode { Train, Eval };

// ---------------------------------------------------------------------------
// voxelwise linear (1x1x1 convolution)

template <typename T>
VolumeT<T> linear_forward(const VolumeT<T>& in, const Tensor<T>& w, const Tensor<T>* bias) {
    const int cin = static_cast<int>(w.shape[0]);
    const int cout = static_cast<int>(w.shape[1]);
    if (in.c != cin) throw ShapeMismatch("linear: input channels != weight rows");
    VolumeT<T> out(in.w, in.h, in.d, cout);
    for (std::size_t vox = 0; vox < in.voxels(); ++vox) {
        const T* x = in.data.data() + vox * cin;
        T* y = out.data.data() + vox * cout;
        if (bias)
            for (int j = 0; j < cout; ++j) y[j] = bias->v[j];
        for (int i = 0; i < cin; ++i) {
            const T xi = x[i];
            if (xi == T(0)) continue;
            const T* wr = w.v.data() + static_cast<std::size_t>(i) * cout;
            for (int j = 0; j < cout; ++j) y[j] += xi * wr[j];
        }
    }
    return out;
}

template <typename T>
VolumeT<T> linear_backward(const VolumeT<T>& in, const Tensor<T>& w, const VolumeT<T>& dout,
                           Tensor<T>& dw, Tensor<T>* db) {
    const int cin = static_cast<int>(w.shape[0]);
    const int cout = static_cast<int>(w.shape[1]);
    VolumeT<T> din(in.w, in.h, in.d, cin);
    for (std::size_t vox = 0; vox < in.voxels(); ++vox) {
        const T* x = in.data.data() + vox * cin;
        const T* gy = dout.data.data() + vox * cout;
        T* gx = din.data.data() + vox * cin;
        if (db)
            for (int j = 0; j < cout; ++j) db->v[j] += gy[j];
        for (int i = 0; i < cin; ++i) {
            const T* wr = w.v.data() + static_cast<std::size_t>(i) * cout;
            T* gwr = dw.v.data() + static_cast<std::size_t>(i) * cout;
            T acc = T(0);
            const T xi = x[i];
            for (int j = 0; j < cout; ++j) {
                acc += wr[j] * gy[j];
                gwr[j] += xi * gy[j];
            }
            gx[i] = acc;
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// batchnorm over batch + spatial dims, per channel

template <typename T>
struct BnCache {
    std::vector<T> invstd;
    std::vector<VolumeT<T>> xhat;
};

template <typename T>
void bn_forward(std::vector<VolumeT<T>>& xs, const Tensor<T>& gamma, const Tensor<T>& beta,
                Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode, double eps,
                double momentum, BnCache<T>* cache) {
    const int c = xs[0].c;
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    if (mode == Mode::Train) {
        std::size_t n = 0;
        for (const auto& x : xs) {
            n += x.voxels();
            for (std::size_t vox = 0; vox < x.voxels(); ++vox) {
                const T* p = x.data.data() + vox * c;
                for (int ch = 0; ch < c; ++ch) mean[ch] += p[ch];
            }
        }
        for (int ch = 0; ch < c; ++ch) mean[ch] /= static_cast<double>(n);
        for (const auto& x : xs)
            for (std::size_t vox = 0; vox < x.voxels(); ++vox) {
                const T* p = x.data.data() + vox * c;
                for (int ch = 0; ch < c; ++ch) {
                    const double d = p[ch] - mean[ch];
                    var[ch] += d * d;
                }
            }
        for (int ch = 0; ch < c; ++ch) var[ch] /= static_cast<double>(n);
        for (int ch = 0; ch < c; ++ch) {
            running_mean.v[ch] = static_cast<T>(momentum * running_mean.v[ch] +
                                                (1.0 - momentum) * mean[ch]);
            running_var.v[ch] = static_cast<T>(momentum * running_var.v[ch] +
                                               (1.0 - momentum) * var[ch]);
        }
    } else {
        for (int ch = 0; ch < c; ++ch) {
            mean[ch] = running_mean.v[ch];
            var[ch] = running_var.v[ch];
        }
    }

    std::vector<T> invstd(c);
    for (int ch = 0; ch < c; ++ch)
        invstd[ch] = static_cast<T>(1.0 / std::sqrt(var[ch] + eps));
    if (cache) {
        cache->invstd = invstd;
        cache->xhat.clear();
        cache->xhat.reserve(xs.size());
    }
    for (auto& x : xs) {
        VolumeT<T>* xh = nullptr;
        if (cache) {
            cache->xhat.emplace_back(x.w, x.h, x.d, c);
            xh = &cache->xhat.back();
        }
        for (std::size_t vox = 0; vox < x.voxels(); ++vox) {
            T* p = x.data.data() + vox * c;
            T* ph = xh ? xh->data.data() + vox * c : nullptr;
            for (int ch = 0; ch < c; ++ch) {
                const T h = static_cast<T>((p[ch] - mean[ch]) * invstd[ch]);
                if (ph) ph[ch] = h;
                p[ch] = gamma.v[ch] * h + beta.v[ch];
            }
        }
    }
}

template <typename T>
void bn_backward(std::vector<VolumeT<T>>& douts, const BnCache<T>& cache,
                 const Tensor<T>& gamma, Tensor<T>& dgamma, Tensor<T>& dbeta) {
    const int c = douts[0].c;
    std::size_t n = 0;
    std::vector<double> sum_dxhat(c, 0.0), sum_dxhat_xhat(c, 0.0);
    for (std::size_t s = 0; s < douts.size(); ++s) {
        const auto& gy = douts[s];
        const auto& xh = cache.xhat[s];
        n += gy.voxels();
        for (std::size_t vox = 0; vox < gy.voxels(); ++vox) {
            const T* g = gy.data.data() + vox * c;
            const T* h = xh.data.data() + vox * c;
            for (int ch = 0; ch < c; ++ch) {
                dgamma.v[ch] += g[ch] * h[ch];
                dbeta.v[ch] += g[ch];
                const double dxh = static_cast<double>(g[ch]) * gamma.v[ch];
                sum_dxhat[ch] += dxh;
                sum_dxhat_xhat[ch] += dxh * h[ch];
            }
        }
    }
    for (std::size_t s = 0; s < douts.size(); ++s) {
        auto& gy = douts[s];
        const auto& xh = cache.xhat[s];
        for (std::size_t vox = 0; vox < gy.voxels(); ++vox) {
            T* g = gy.data.data() + vox * c;
            const T* h = xh.data.data() + vox * c;
            for (int ch = 0; ch < c; ++ch) {
                const double dxh = static_cast<double>(g[ch]) * gamma.v[ch];
                g[ch] = static_cast<T>(cache.invstd[ch] *
                                       (dxh - sum_dxhat[ch] / n - h[ch] * sum_dxhat_xhat[ch] / n));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// parameters

inline std::vector<std::pair<std::string, std::vector<std::size_t>>> param_shapes(
    const ArchConfig& arch) {
    std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
    auto u = [](int x) { return static_cast<std::size_t>(x); };
    for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
        const auto& b = arch.blocks[i];
        const std::string pre = "block" + std::to_string(i) + ".";
        if (arch.has_transition(i)) {
            const int q_prev = i == 0 ? arch.in_channels : arch.blocks[i - 1].channels;
            out.push_back({pre + "trans.w", {u(q_prev), u(b.channels)}});
        }
        out.push_back({pre + "fc1.w", {u(arch.mlp_in_dim(i)), u(b.mlp_hidden)}});
        out.push_back({pre + "fc1.b", {u(b.mlp_hidden)}});
        for (const char* s : {"gamma", "beta", "running_mean", "running_var"})
            out.push_back({pre + "bn1." + std::string(s), {u(b.mlp_hidden)}});
        out.push_back({pre + "fc2.w", {u(b.mlp_hidden), u(b.channels)}});
        out.push_back({pre + "fc2.b", {u(b.channels)}});
        for (const char* s : {"gamma", "beta", "running_mean", "running_var"})
            out.push_back({pre + "bn2." + std::string(s), {u(b.channels)}});
    }
    out.push_back({"head.w", {u(arch.blocks.back().channels), u(arch.num_classes)}});
    out.push_back({"head.b", {u(arch.num_classes)}});
    return out;
}

inline bool is_trainable(const std::string& name) {
    return name.find("running_") == std::string::npos;
}

template <typename T>
ParamMap<T> init_params(const ArchConfig& arch, std::mt19937_64& rng) {
    ParamMap<T> p;
    const double slope = arch.blocks.empty() ? 0.01 : arch.blocks[0].leaky_slope;
    for (const auto& [name, shape] : param_shapes(arch)) {
        Tensor<T> t(shape);
        const bool is_weight = name.size() > 2 && name.substr(name.size() - 2) == ".w";
        if (is_weight && name != "head.b") {
            const double fan_in = static_cast<double>(shape[0]);
            const double var = 2.0 / (fan_in * (1.0 + slope * slope));
            const double bound = std::sqrt(3.0 * var);
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& x : t.v) x = static_cast<T>(dist(rng));
        } else if (name.find("gamma") != std::string::npos ||
                   name.find("running_var") != std::string::npos) {
            for (auto& x : t.v) x = T(1);
        }
        p.emplace(name, std::move(t));
    }
    return p;
}

template <typename T>
ParamMap<T> zero_like(const ParamMap<T>& params, bool trainable_only = true) {
    ParamMap<T> g;
    for (const auto& [name, t] : params) {
        if (trainable_only && !is_trainable(name)) continue;
        g.emplace(name, Tensor<T>(t.shape));
    }
    return g;
}

// ---------------------------------------------------------------------------
// forward / backward

template <typename T>
struct BlockCacheT {
    std::vector<VolumeT<T>> pre_trans; // inputs to the transition conv, if any
    std::vector<VolumeT<T>> feat_in;   // post-transition block inputs
    std::vector<VolumeT<T>> mlp_in;    // invariantized jet (+ lambdas on block 0)
    BnCache<T> bn1, bn2;
    std::vector<VolumeT<T>> act_out;   // leaky ReLU output, input to fc2
    std::vector<FrameFieldT<T>> frames;
};

template <typename T>
struct NetCacheT {
    ArchConfig arch;
    const void* params_id = nullptr;
    Mode mode = Mode::Eval;
    std::vector<BlockCacheT<T>> blocks;
    std::vector<std::vector<int>> argmax; // per sample, per channel: winning voxel
    std::vector<std::vector<T>> pooled;   // per sample
    bool valid = false;
};

using NetCache = NetCacheT<float>;

template <typename T>
VolumeT<T> leaky_relu(const VolumeT<T>& x, double slope) {
    VolumeT<T> y = x;
    const T s = static_cast<T>(slope);
    for (auto& v : y.data) v = v > T(0) ? v : s * v;
    return y;
}

template <typename T>
std::vector<std::vector<T>> network_forward_batch(const std::vector<VolumeT<T>>& inputs,
                                                  const ArchConfig& arch, ParamMap<T>& params,
                                                  Mode mode, NetCacheT<T>* cache = nullptr) {
    if (inputs.empty()) throw ShapeMismatch("empty batch");
    const std::size_t bsz = inputs.size();
    for (const auto& v : inputs)
        if (v.c != arch.in_channels)
            throw ShapeMismatch("input channel count does not match architecture");
    if (arch.in_channels != 1)
        throw MultiChannelInput("frames are built from a single-channel input");

    if (cache) {
        cache->arch = arch;
        cache->params_id = &params;
        cache->mode = mode;
        cache->blocks.assign(arch.blocks.size(), {});
        cache->valid = true;
    }

    // frames once, from the input, at sigma_prime
    std::vector<FrameFieldT<T>> frames;
    frames.reserve(bsz);
    for (const auto& v : inputs)
        frames.push_back(build_frame(jet2(v, arch.sigma_prime), arch.tau));

    std::vector<VolumeT<T>> feats = inputs;
    for (std::size_t i = 0; i < arch.blocks.size(); ++i) {
        const auto& blk = arch.blocks[i];
        const std::string pre = "block" + std::to_string(i) + ".";
        BlockCacheT<T>* bc = cache ? &cache->blocks[i] : nullptr;
        if (bc) bc->frames = frames;

        if (arch.has_transition(i)) {
            const auto& w = params.at(pre + "trans.w");
            if (bc) bc->pre_trans = feats;
            for (auto& f : feats) f = linear_forward<T>(f, w, nullptr);
        }
        if (bc) bc->feat_in = feats;

        // jet -> invariant features under the fixed frame
        std::vector<VolumeT<T>> x;
        x.reserve(bsz);
        for (std::size_t s = 0; s < bsz; ++s) {
            VolumeT<T> inv = apply_frame(frames[s], jet2(feats[s], blk.sigma));
            if (i == 0) {
                // first block also sees the fundamental invariants lambda_i
                VolumeT<T> withl(inv.w, inv.h, inv.d, inv.c + 3);
                const auto& lam = frames[s].lambdas;
                for (std::size_t vox = 0; vox < inv.voxels(); ++vox) {
                    const T* a = inv.data.data() + vox * inv.c;
                    const T* l = lam.data.data() + vox * 3;
                    T* o = withl.data.data() + vox * withl.c;
                    std::memcpy(o, a, sizeof(T) * inv.c);
                    o[inv.c] = l[0]; o[inv.c + 1] = l[1]; o[inv.c + 2] = l[2];
                }
                inv = std::move(withl);
            }
            x.push_back(std::move(inv));
        }
        if (bc) bc->mlp_in = x;

        for (auto& xs : x) xs = linear_forward(xs, params.at(pre + "fc1.w"), &params.at(pre + "fc1.b"));
        bn_forward(x, params.at(pre + "bn1.gamma"), params.at(pre + "bn1.beta"),
                   params.at(pre + "bn1.running_mean"), params.at(pre + "bn1.running_var"),
                   mode, arch.bn_eps, arch.bn_momentum, bc ? &bc->bn1 : nullptr);
        for (auto& xs : x) xs = leaky_relu(xs, blk.leaky_slope);
        if (bc) bc->act_out = x;
        for (auto& xs : x) xs = linear_forward(xs, params.at(pre + "fc2.w"), &params.at(pre + "fc2.b"));
        bn_forward(x, params.at(pre + "bn2.gamma"), params.at(pre + "bn2.beta"),
                   params.at(pre + "bn2.running_mean"), params.at(pre + "bn2.running_var"),
                   mode, arch.bn_eps, arch.bn_momentum, bc ? &bc->bn2 : nullptr);

        if (blk.residual) {
            if (feats[0].c != blk.channels)
                throw ShapeMismatch("residual block requires equal input/output channels");
            for (std::size_t s = 0; s < bsz; ++s)
                for (std::size_t k = 0; k < x[s].data.size(); ++k)
                    x[s].data[k] += feats[s].data[k];
        }
        feats = std::move(x);

        if (blk.stride == 2) {
            for (auto& f : feats) f = subsample2(f);
            for (auto& fr : frames) fr = subsample2(fr);
        }
    }

    // global max-pool + dense head
    const auto& hw = params.at("head.w");
    const auto& hb = params.at("head.b");
    const int q = static_cast<int>(hw.shape[0]);
    std::vector<std::vector<T>> logits(bsz, std::vector<T>(arch.num_classes));
    if (cache) {
        cache->argmax.assign(bsz, {});
        cache->pooled.assign(bsz, {});
    }
    for (std::size_t s = 0; s < bsz; ++s) {
        std::vector<T> pooled(q, std::numeric_limits<T>::lowest());
        std::vector<int> arg(q, 0);
        for (std::size_t vox = 0; vox < feats[s].voxels(); ++vox) {
            const T* p = feats[s].data.data() + vox * q;
            for (int ch = 0; ch < q; ++ch)
                if (p[ch] > pooled[ch]) {
                    pooled[ch] = p[ch];
                    arg[ch] = static_cast<int>(vox);
                }
        }
        for (int j = 0; j < arch.num_classes; ++j) {
            double acc = hb.v[j];
            for (int ch = 0; ch < q; ++ch) acc += static_cast<double>(pooled[ch]) * hw.v[ch * arch.num_classes + j];
            logits[s][j] = static_cast<T>(acc);
        }
        if (cache) {
            cache->argmax[s] = std::move(arg);
            cache->pooled[s] = std::move(pooled);
        }
    }
    return logits;
}

template <typename T>
std::vector<T> network_forward(const VolumeT<T>& v, const ArchConfig& arch,
                               const ParamMap<T>& params) {
    std::vector<VolumeT<T>> batch{v};
    // Eval mode never mutates parameters
    auto& p = const_cast<ParamMap<T>&>(params);
    return network_forward_batch(batch, arch, p, Mode::Eval)[0];
}

template <typename T>
ParamMap<T> network_backward(NetCacheT<T>& cache, const std::vector<std::vector<T>>& dlogits,
                             const ParamMap<T>& params) {
    if (!cache.valid || cache.params_id != &params)
        throw StaleCache("backward requires the cache of a forward pass on the same params");
    if (cache.mode != Mode::Train)
        throw StaleCache("backward requires a train-mode forward cache");
    const ArchConfig& arch = cache.arch;
    const std::size_t bsz = dlogits.size();
    if (bsz != cache.pooled.size()) throw ShapeMismatch("dlogits batch size mismatch");

    ParamMap<T> grads = zero_like(params);

    // head + max-pool routing
    const auto& hw = params.at("head.w");
    const int q = static_cast<int>(hw.shape[0]);
    auto& dhw = grads.at("head.w");
    auto& dhb = grads.at("head.b");
    const auto& last_bc = cache.blocks.back();
    std::vector<VolumeT<T>> dfeat;
    dfeat.reserve(bsz);
    // last block's output resolution: its own activations, after any stride
    for (std::size_t s = 0; s < bsz; ++s) {
        std::array<int, 3> dims = last_bc.act_out[s].dims();
        if (arch.blocks.back().stride == 2) {
            dims = {(dims[0] + 1) / 2, (dims[1] + 1) / 2, (dims[2] + 1) / 2};
        }
        VolumeT<T> g(dims[0], dims[1], dims[2], q);
        for (int ch = 0; ch < q; ++ch) {
            double dp = 0;
            for (int j = 0; j < arch.num_classes; ++j) {
                dhw.v[ch * arch.num_classes + j] += cache.pooled[s][ch] * dlogits[s][j];
                dp += static_cast<double>(hw.v[ch * arch.num_classes + j]) * dlogits[s][j];
            }
            g.data[static_cast<std::size_t>(cache.argmax[s][ch]) * q + ch] = static_cast<T>(dp);
        }
        dfeat.push_back(std::move(g));
    }
    for (std::size_t s = 0; s < bsz; ++s)
        for (int j = 0; j < arch.num_classes; ++j) dhb.v[j] += dlogits[s][j];

    for (std::size_t bi = arch.blocks.size(); bi-- > 0;) {
        const auto& blk = arch.blocks[bi];
        const std::string pre = "block" + std::to_string(bi) + ".";
        auto& bc = cache.blocks[bi];

        if (blk.stride == 2) {
            // scatter gradients back to the even lattice
            for (std::size_t s = 0; s < bsz; ++s) {
                const auto dims = bc.act_out[s].dims();
                VolumeT<T> up(dims[0], dims[1], dims[2], dfeat[s].c);
                for (int x = 0; x < dfeat[s].w; ++x)
                    for (int y = 0; y < dfeat[s].h; ++y)
                        for (int z = 0; z < dfeat[s].d; ++z) {
                            const T* src = dfeat[s].voxel(x, y, z);
                            T* dst = up.voxel(2 * x, 2 * y, 2 * z);
                            for (int ch = 0; ch < up.c; ++ch) dst[ch] = src[ch];
                        }
                dfeat[s] = std::move(up);
            }
        }

        std::vector<VolumeT<T>> dskip;
        if (blk.residual) dskip = dfeat; // identity branch

        bn_backward(dfeat, bc.bn2, params.at(pre + "bn2.gamma"), grads.at(pre + "bn2.gamma"),
                    grads.at(pre + "bn2.beta"));
        for (std::size_t s = 0; s < bsz; ++s)
            dfeat[s] = linear_backward(bc.act_out[s], params.at(pre + "fc2.w"), dfeat[s],
                                       grads.at(pre + "fc2.w"), &grads.at(pre + "fc2.b"));
        const T slope = static_cast<T>(blk.leaky_slope);
        for (std::size_t s = 0; s < bsz; ++s)
            for (std::size_t k = 0; k < dfeat[s].data.size(); ++k)
                if (bc.act_out[s].data[k] <= T(0)) dfeat[s].data[k] *= slope;
        bn_backward(dfeat, bc.bn1, params.at(pre + "bn1.gamma"), grads.at(pre + "bn1.gamma"),
                    grads.at(pre + "bn1.beta"));
        for (std::size_t s = 0; s < bsz; ++s)
            dfeat[s] = linear_backward(bc.mlp_in[s], params.at(pre + "fc1.w"), dfeat[s],
                                       grads.at(pre + "fc1.w"), &grads.at(pre + "fc1.b"));

        // through the frame application (transpose) and the jet (correlation)
        for (std::size_t s = 0; s < bsz; ++s) {
            VolumeT<T> djet = dfeat[s];
            if (bi == 0) {
                // drop the lambda channels: they come from the frame, a constant
                VolumeT<T> trimmed(djet.w, djet.h, djet.d, djet.c - 3);
                for (std::size_t vox = 0; vox < djet.voxels(); ++vox)
                    std::memcpy(trimmed.data.data() + vox * trimmed.c,
                                djet.data.data() + vox * djet.c, sizeof(T) * trimmed.c);
                djet = std::move(trimmed);
            }
            djet = apply_frame_adjoint(bc.frames[s], djet);
            dfeat[s] = jet2_adjoint(djet, blk.sigma);
        }

        if (blk.residual)
            for (std::size_t s = 0; s < bsz; ++s)
                for (std::size_t k = 0; k < dfeat[s].data.size(); ++k)
                    dfeat[s].data[k] += dskip[s].data[k];

        if (arch.has_transition(bi)) {
            for (std::size_t s = 0; s < bsz; ++s)
                dfeat[s] = linear_backward<T>(bc.pre_trans[s], params.at(pre + "trans.w"),
                                              dfeat[s], grads.at(pre + "trans.w"), nullptr);
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// checkpoints: ZIP of NPY tensors plus a JSON manifest

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json arch_to_json(const ArchConfig& a) {
    nlohmann::json j;
    j["in_channels"] = a.in_channels;
    j["num_classes"] = a.num_classes;
    j["sigma_prime"] = a.sigma_prime;
    j["tau"] = a.tau;
    j["bn_eps"] = a.bn_eps;
    j["bn_momentum"] = a.bn_momentum;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : a.blocks)
        j["blocks"].push_back({{"channels", b.channels},
                               {"mlp_hidden", b.mlp_hidden},
                               {"sigma", b.sigma},
                               {"leaky_slope", b.leaky_slope},
                               {"residual", b.residual},
                               {"stride", b.stride}});
    return j;
}

inline ArchConfig arch_from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.in_channels = j.at("in_channels");
    a.num_classes = j.at("num_classes");
    a.sigma_prime = j.at("sigma_prime");
    a.tau = j.at("tau");
    a.bn_eps = j.at("bn_eps");
    a.bn_momentum = j.at("bn_momentum");
    for (const auto& bj : j.at("blocks")) {
        BlockConfig b;
        b.channels = bj.at("channels");
        b.mlp_hidden = bj.at("mlp_hidden");
        b.sigma = bj.at("sigma");
        b.leaky_slope = bj.at("leaky_slope");
        b.residual = bj.at("residual");
        b.stride = bj.at("stride");
        a.blocks.push_back(b);
    }
    return a;
}

template <typename T>
std::vector<std::uint8_t> save_checkpoint(const ParamMap<T>& params, const ArchConfig& arch) {
    nlohmann::json manifest;
    manifest["format_version"] = kCheckpointVersion;
    manifest["dtype"] = sizeof(T) == 8 ? "f8" : "f4";
    manifest["arch"] = arch_to_json(arch);

    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> entries;
    const std::string mtext = manifest.dump(2);
    entries.emplace_back("manifest.json", std::vector<std::uint8_t>(mtext.begin(), mtext.end()));
    for (const auto& [name, t] : params) {
        NpyArray a;
        a.dtype = sizeof(T) == 8 ? NpyDtype::F64 : NpyDtype::F32;
        a.shape = t.shape;
        a.payload.resize(t.v.size() * sizeof(T));
        std::memcpy(a.payload.data(), t.v.data(), a.payload.size());
        entries.emplace_back("params/" + name + ".npy", npy_serialize(a));
    }
    return zip_write(entries);
}

template <typename T>
std::pair<ParamMap<T>, ArchConfig> load_checkpoint(std::span<const std::uint8_t> bytes) {
    auto files = zip_read(bytes);
    auto mit = files.find("manifest.json");
    if (mit == files.end()) throw MissingEntry("manifest.json");
    const auto manifest = nlohmann::json::parse(mit->second.begin(), mit->second.end());
    if (manifest.at("format_version") != kCheckpointVersion)
        throw VersionMismatch("unsupported checkpoint format version " +
                              manifest.at("format_version").dump());
    const std::string want_dtype = sizeof(T) == 8 ? "f8" : "f4";
    if (manifest.at("dtype") != want_dtype)
        throw UnsupportedDtype("checkpoint dtype " + manifest.at("dtype").get<std::string>() +
                               " does not match requested precision");
    const ArchConfig arch = arch_from_json(manifest.at("arch"));

    ParamMap<T> params;
    for (const auto& [name, shape] : param_shapes(arch)) {
        auto it = files.find("params/" + name + ".npy");
        if (it == files.end()) throw MissingTensor(name);
        const NpyArray a = npy_parse(it->second);
        if (a.element_size() != sizeof(T))
            throw UnsupportedDtype("tensor " + name + " has wrong element size");
        Tensor<T> t(a.shape);
        std::memcpy(t.v.data(), a.payload.data(), a.payload.size());
        params.emplace(name, std::move(t));
    }
    return {std::move(params), arch};
}

} // namespace se3movf
