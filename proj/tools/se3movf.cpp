// se3movf: command-line front end for the rotation-invariant volumetric
// network toolkit. Subcommands: convert, selftest, train, eval, sweep, bench.
// Exit codes: 0 success, 1 test/assertion failure, 2 usage or config error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "se3movf/config.hpp"
#include "se3movf/dataset.hpp"
#include "se3movf/equicheck.hpp"
#include "se3movf/errors.hpp"
#include "se3movf/synthetic.hpp"
#include "se3movf/train.hpp"

using namespace se3movf;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// shared helpers

template <typename T>
VolumeT<T> random_cube(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<T> dist(T(-1), T(1));
    VolumeT<T> v(n, n, n, 1);
    for (auto& x : v.data) x = dist(rng);
    return v;
}

template <typename T>
VolumeT<T> smooth_random_cube(int n, std::mt19937_64& rng) {
    const auto k = make_kernel<T>(1.0, 0);
    return conv_separable(random_cube<T>(n, rng), k, k, k);
}

// dense triple-loop separable convolution used as the selftest oracle
template <typename T>
VolumeT<T> dense_conv(const VolumeT<T>& v, const Kernel1DT<T>& kx, const Kernel1DT<T>& ky,
                      const Kernel1DT<T>& kz) {
    auto idx = [](int i, int n) { return i < 0 ? -i - 1 : (i >= n ? 2 * n - i - 1 : i); };
    VolumeT<T> out(v.w, v.h, v.d, v.c);
    for (int x = 0; x < v.w; ++x)
        for (int y = 0; y < v.h; ++y)
            for (int z = 0; z < v.d; ++z)
                for (int c = 0; c < v.c; ++c) {
                    double acc = 0;
                    for (int tx = -kx.radius; tx <= kx.radius; ++tx)
                        for (int ty = -ky.radius; ty <= ky.radius; ++ty)
                            for (int tz = -kz.radius; tz <= kz.radius; ++tz)
                                acc += double(kx.tap(tx)) * ky.tap(ty) * kz.tap(tz) *
                                       v.at(idx(x - tx, v.w), idx(y - ty, v.h),
                                            idx(z - tz, v.d), c);
                    out.at(x, y, z, c) = static_cast<T>(acc);
                }
    return out;
}

int config_int(const std::map<std::string, std::string>& cfg, const std::string& key,
               int fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected an integer, got '" + it->second + "'");
    }
}

double config_double(const std::map<std::string, std::string>& cfg, const std::string& key,
                     double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError("key " + key + ": expected a number, got '" + it->second + "'");
    }
}

std::string config_str(const std::map<std::string, std::string>& cfg, const std::string& key,
                       const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

ArchConfig arch_from_config(const std::map<std::string, std::string>& cfg) {
    ArchConfig a;
    a.num_classes = config_int(cfg, "arch.num_classes", 2);
    a.sigma_prime = config_double(cfg, "arch.sigma_prime", 2.0);
    a.tau = config_double(cfg, "arch.tau", 1e-2);
    a.bn_eps = config_double(cfg, "arch.bn_eps", 1e-5);
    a.bn_momentum = config_double(cfg, "arch.bn_momentum", 0.9);
    const int nblocks = config_int(cfg, "arch.blocks", 0);
    if (nblocks < 1) throw ConfigError("arch.blocks must be >= 1");
    for (int i = 0; i < nblocks; ++i) {
        const std::string pre = "block" + std::to_string(i) + ".";
        BlockConfig b;
        b.channels = config_int(cfg, pre + "channels", 8);
        b.mlp_hidden = config_int(cfg, pre + "mlp_hidden", b.channels);
        b.sigma = config_double(cfg, pre + "sigma", 1.0);
        b.leaky_slope = config_double(cfg, pre + "leaky_slope", 0.01);
        b.residual = config_int(cfg, pre + "residual", 0) != 0;
        b.stride = config_int(cfg, pre + "stride", 1);
        a.blocks.push_back(b);
    }
    return a;
}

TrainConfig train_from_config(const std::map<std::string, std::string>& cfg) {
    TrainConfig t;
    t.batch_size = config_int(cfg, "train.batch_size", 32);
    t.epochs = config_int(cfg, "train.epochs", 10);
    t.learning_rate = config_double(cfg, "train.learning_rate", 1e-3);
    t.optimizer = config_str(cfg, "train.optimizer", "adam");
    t.augment = config_str(cfg, "train.augment", "none");
    t.seed = static_cast<std::uint64_t>(config_int(cfg, "train.seed", 0));
    if (t.optimizer != "adam" && t.optimizer != "sgd")
        throw ConfigError("train.optimizer must be adam or sgd");
    if (t.augment != "none" && t.augment != "octahedral" && t.augment != "interp")
        throw ConfigError("train.augment must be none, octahedral or interp");
    return t;
}

std::uint64_t dataset_fingerprint(const DatasetSplits& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](const Dataset<float>& ds) {
        for (const auto& img : ds.images)
            h ^= fnv1a64({reinterpret_cast<const std::uint8_t*>(img.data.data()),
                          img.data.size() * sizeof(float)});
        for (int l : ds.labels) h = (h ^ static_cast<std::uint64_t>(l)) * 0x100000001b3ull;
    };
    mix(s.train);
    mix(s.val);
    mix(s.test);
    return h;
}

DatasetSplits load_splits(const std::map<std::string, std::string>& cfg) {
    const std::string source = config_str(cfg, "data.source", "file");
    DatasetSplits s;
    if (source == "synthetic") {
        const int dim = config_int(cfg, "data.dim", 29);
        std::mt19937_64 rng(static_cast<std::uint64_t>(config_int(cfg, "data.seed", 0)));
        s.train = make_blob_dataset<float>(config_int(cfg, "data.train_n", 200), dim, rng);
        s.val = make_blob_dataset<float>(config_int(cfg, "data.val_n", 50), dim, rng);
        s.test = make_blob_dataset<float>(config_int(cfg, "data.test_n", 50), dim, rng);
    } else if (source == "file") {
        const std::string path = config_str(cfg, "data.path", "");
        if (path.empty()) throw ConfigError("data.path is required with data.source = file");
        s = load_dataset_file(path, config_int(cfg, "data.resize_to", 0));
    } else {
        throw ConfigError("data.source must be file or synthetic");
    }
    return s;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << text;
}

// ---------------------------------------------------------------------------
// selftest

struct SuiteResult {
    std::string name;
    double residual;
    double tol;
    bool pass() const { return residual <= tol; }
};

template <typename T>
std::vector<SuiteResult> run_selftest(bool break_signs) {
    constexpr bool f64 = sizeof(T) == 8;
    std::vector<SuiteResult> out;
    std::mt19937_64 rng(2024);

    {
        double worst = 0;
        for (double sigma : {0.8, 1.0, 2.0})
            for (int trial = 0; trial < 3; ++trial) {
                const auto v = random_cube<T>(9, rng);
                JetKernels<T> ker(sigma);
                for (int jet = 0; jet < kJetChannels; ++jet) {
                    const auto& kx = ker.k[kJetOrders[jet][0]];
                    const auto& ky = ker.k[kJetOrders[jet][1]];
                    const auto& kz = ker.k[kJetOrders[jet][2]];
                    const auto fast = conv_separable(v, kx, ky, kz);
                    const auto slow = dense_conv(v, kx, ky, kz);
                    double scale = 0;
                    for (auto x : slow.data) scale = std::max(scale, std::abs(double(x)));
                    for (std::size_t i = 0; i < fast.data.size(); ++i)
                        worst = std::max(worst, std::abs(double(fast.data[i]) - slow.data[i]) /
                                                    std::max(1.0, scale));
                }
            }
        out.push_back({"jet-vs-dense-oracle", worst, f64 ? 1e-12 : 1e-5});
    }

    {
        std::uniform_real_distribution<double> dist(-10, 10);
        double worst = 0;
        for (int trial = 0; trial < 20000; ++trial) {
            Sym3 h;
            if (trial % 4 == 3) {
                // near-degenerate pair
                h.xx = 1;
                h.yy = 1 + 1e-8;
                h.zz = dist(rng);
                h.xy = 1e-9 * dist(rng);
            } else {
                h.xx = dist(rng); h.xy = dist(rng); h.yy = dist(rng);
                h.xz = dist(rng); h.yz = dist(rng); h.zz = dist(rng);
            }
            const auto e = eigh3(h);
            const double hm[3][3] = {{h.xx, h.xy, h.xz}, {h.xy, h.yy, h.yz}, {h.xz, h.yz, h.zz}};
            const double scale = std::max(1.0, h.frobenius());
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    double rec = 0, dot = 0;
                    for (int k = 0; k < 3; ++k) {
                        rec += e.v[k][i] * e.lambda[k] * e.v[k][j];
                        dot += e.v[i][k] * e.v[j][k];
                    }
                    worst = std::max(worst, std::abs(rec - hm[i][j]) / scale);
                    worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
                }
        }
        out.push_back({"eigensolver", worst, 1e-10});
    }

    {
        // frame co-rotation and invariantized-feature invariance at voxels
        // with a healthy eigen-gap and full frames
        double worst = 0;
        for (int trial = 0; trial < 3; ++trial) {
            const auto v = smooth_random_cube<T>(9, rng);
            const auto jet = jet2(v, 1.2);
            const auto f = build_frame(jet, 1e-2, !break_signs);
            const auto inv = apply_frame(f, jet);
            for (const auto& g : octahedral_group()) {
                const auto jr = jet2(rotate_grid(v, g), 1.2);
                const auto fr = build_frame(jr, 1e-2, !break_signs);
                const auto invr = rotate_grid(apply_frame(fr, jr), g.inverse());
                const auto lamr = rotate_grid(fr.lambdas, g.inverse());
                for (std::size_t vox = 0; vox < v.voxels(); ++vox) {
                    const T* lam = f.lambdas.data.data() + vox * 3;
                    if (lam[0] - lam[1] < 1e-3 || lam[1] - lam[2] < 1e-3) continue;
                    bool full = true;
                    for (int r = 0; r < 3 && full; ++r) {
                        double n1 = 0, n2 = 0;
                        for (int c = 0; c < 3; ++c) {
                            n1 += std::abs(double(f.rows.data[vox * 9 + 3 * r + c]));
                            n2 += std::abs(double(fr.rows.data[vox * 9 + 3 * r + c]));
                        }
                        if (n1 < 0.5 || n2 < 0.5) full = false;
                    }
                    if (!full) continue;
                    for (int c = 0; c < 3; ++c)
                        worst = std::max(worst, std::abs(double(lam[c]) -
                                                         lamr.data[vox * 3 + c]));
                    for (int c = 0; c < kJetChannels; ++c)
                        worst = std::max(worst, std::abs(double(inv.data[vox * 10 + c]) -
                                                         invr.data[vox * 10 + c]));
                }
            }
        }
        out.push_back({"frame-equivariance", worst, f64 ? 1e-10 : 1e-5});
    }

    {
        // finite-difference check of the full backward pass (always 64-bit)
        ArchConfig a;
        a.num_classes = 2;
        a.sigma_prime = 1.0;
        BlockConfig b0;
        b0.channels = 4;
        b0.mlp_hidden = 4;
        b0.sigma = 0.8;
        BlockConfig b1 = b0;
        b1.residual = true;
        a.blocks = {b0, b1};
        auto p = init_params<double>(a, rng);
        std::vector<VolumeD> batch{random_cube<double>(7, rng), random_cube<double>(7, rng)};
        const std::vector<std::vector<double>> r = {{0.7, -0.4}, {-1.2, 0.5}};
        auto loss = [&](ParamMap<double>& params) {
            const auto logits = network_forward_batch(batch, a, params, Mode::Train);
            double l = 0;
            for (std::size_t s = 0; s < batch.size(); ++s)
                for (int j = 0; j < a.num_classes; ++j) l += r[s][j] * logits[s][j];
            return l;
        };
        NetCacheT<double> cache;
        (void)network_forward_batch(batch, a, p, Mode::Train, &cache);
        const auto grads = network_backward(cache, r, p);
        double worst = 0;
        const double eps = 1e-6;
        for (const auto& [name, g] : grads) {
            const std::vector<std::size_t> idx = {0, g.size() / 2, g.size() - 1};
            for (std::size_t i : idx) {
                auto& t = p.at(name);
                const double save = t.v[i];
                t.v[i] = save + eps;
                const double lp = loss(p);
                t.v[i] = save - eps;
                const double lm = loss(p);
                t.v[i] = save;
                const double fd = (lp - lm) / (2 * eps);
                worst = std::max(worst, std::abs(fd - g.v[i]) /
                                            std::max({1.0, std::abs(fd), std::abs(g.v[i])}));
            }
        }
        out.push_back({"gradient-check", worst, 1e-5});
    }

    {
        // invariance of the logits; the broken-frame mutation is injected by
        // replacing the first invariantization stage explicitly
        ArchConfig a;
        a.num_classes = 3;
        a.sigma_prime = 1.2;
        BlockConfig b0;
        b0.channels = 6;
        b0.mlp_hidden = 6;
        b0.sigma = 1.0;
        a.blocks = {b0};
        auto p = init_params<T>(a, rng);
        double worst = 0;
        for (int trial = 0; trial < 2; ++trial) {
            const auto v = random_cube<T>(9, rng);
            if (!break_signs) {
                worst = std::max(worst, logit_invariance(p, a, v));
            } else {
                // stand-in pipeline with the disambiguation disabled; measures
                // the invariance of the first-stage features instead
                auto features = [&](const VolumeT<T>& img) {
                    const auto jet = jet2(img, a.sigma_prime);
                    return apply_frame(build_frame(jet, a.tau, false), jet);
                };
                const auto base = features(v);
                for (const auto& g : octahedral_group()) {
                    const auto rot = rotate_grid(features(rotate_grid(v, g)), g.inverse());
                    for (std::size_t i = 0; i < base.data.size(); ++i)
                        worst = std::max(worst,
                                         std::abs(double(base.data[i]) - rot.data[i]));
                }
            }
        }
        out.push_back({"logit-invariance", worst, f64 ? 1e-8 : 1e-3});
    }

    return out;
}

int cmd_selftest(bool fp64, bool break_signs) {
    const auto results =
        fp64 ? run_selftest<double>(break_signs) : run_selftest<float>(break_signs);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-20s max residual %.3e (tol %.0e) %s\n", r.name.c_str(), r.residual,
                    r.tol, r.pass() ? "PASS" : "FAIL");
        ok = ok && r.pass();
    }
    std::printf("selftest: %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// convert / train / eval / sweep / bench

int cmd_convert(const std::string& in_path, const std::string& out_path) {
    const auto bytes = read_file(in_path);
    const auto files = zip_read(bytes);
    const bool from_container = files.count("manifest.json") > 0;
    const auto converted = from_container ? container_to_npz(bytes) : npz_to_container(bytes);
    write_file(out_path, converted);
    std::printf("%s -> %s (%s)\n", in_path.c_str(), out_path.c_str(),
                from_container ? "container to npz" : "npz to container");
    return 0;
}

void print_metrics(const Metrics& m) {
    std::printf("accuracy %.4f  mean_cross_entropy %.6f\n", m.accuracy, m.mean_cross_entropy);
    for (std::size_t c = 0; c < m.per_class_total.size(); ++c)
        std::printf("  class %zu: %zu/%zu\n", c, m.per_class_correct[c], m.per_class_total[c]);
}

int cmd_train(const std::string& config_path) {
    const auto cfg = parse_config_file(config_path);
    const ArchConfig arch = arch_from_config(cfg);
    const TrainConfig tcfg = train_from_config(cfg);
    const DatasetSplits data = load_splits(cfg);
    const fs::path out_dir = config_str(cfg, "output.dir", "run");
    fs::create_directories(out_dir);

    std::string history = "epoch,train_loss,val_accuracy\n";
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = train_loop(data.train, data.val, arch, tcfg, [&](const EpochStats& e) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f\n", e.epoch, e.train_loss, e.val_accuracy);
        history += buf;
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("epoch %d  train_loss %.5f  val_accuracy %.4f  (%.1fs)\n", e.epoch,
                    e.train_loss, e.val_accuracy, sec);
    });

    write_text(out_dir / "history.csv", history);
    write_file((out_dir / "checkpoint.zip").string(), save_checkpoint(result.best_params, arch));
    write_text(out_dir / "manifest.json",
               make_run_manifest(cfg, dataset_fingerprint(data)).dump(2) + "\n");

    if (data.test.size() > 0) {
        std::printf("test: ");
        print_metrics(evaluate(data.test, result.best_params, arch));
    }
    std::printf("wrote %s\n", (out_dir / "checkpoint.zip").string().c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& split, int resize_to) {
    const auto [params, arch] = load_checkpoint<float>(read_file(ckpt_path));
    const DatasetSplits s = load_dataset_file(data_path, resize_to);
    const Dataset<float>& ds = split == "train" ? s.train : (split == "val" ? s.val : s.test);
    print_metrics(evaluate(ds, params, arch));
    return 0;
}

int cmd_sweep(const std::string& ckpt_path, const std::string& data_path,
              const std::string& axes, const std::string& out_dir_s, int resize_to,
              double step) {
    const auto [params, arch] = load_checkpoint<float>(read_file(ckpt_path));
    const DatasetSplits s = load_dataset_file(data_path, resize_to);
    const fs::path out_dir = out_dir_s;
    fs::create_directories(out_dir);

    std::vector<double> angles;
    for (double a = 0; a <= 360.0 + 1e-9; a += step) angles.push_back(a);

    std::map<std::string, std::string> manifest_cfg = {
        {"sweep.checkpoint", ckpt_path}, {"sweep.data", data_path}, {"sweep.axes", axes}};
    write_text(out_dir / "manifest.json",
               make_run_manifest(manifest_cfg, dataset_fingerprint(s)).dump(2) + "\n");

    for (char ax : axes) {
        if (ax == ',') continue;
        Axis axis;
        switch (ax) {
            case 'X': case 'x': axis = Axis::X; break;
            case 'Y': case 'y': axis = Axis::Y; break;
            case 'Z': case 'z': axis = Axis::Z; break;
            default: throw ConfigError(std::string("unknown sweep axis '") + ax + "'");
        }
        const auto rows = rotation_sweep(params, arch, s.test, axis, angles);
        const std::string name = std::string("sweep_") + static_cast<char>(std::toupper(ax)) + ".csv";
        write_text(out_dir / name, sweep_csv(rows));
        std::printf("%s: accuracy at 0deg %.4f, min over sweep %.4f\n", name.c_str(),
                    rows.front().accuracy,
                    std::min_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
                        return a.accuracy < b.accuracy;
                    })->accuracy);
    }
    return 0;
}

int cmd_bench(const std::string& out_path) {
    std::mt19937_64 rng(7);
    const Volume v = random_cube<float>(64, rng);
    const std::vector<int> widths = {5, 9, 13, 17};
    std::vector<double> secs;
    std::string csv = "w,h,d,width,seconds\n";
    for (int w : widths) {
        const int radius = (w - 1) / 2;
        const double sigma = w / 6.0;
        // warm-up, then best of 3
        (void)jet2(v, sigma, Padding::Reflect, radius);
        double best = 1e30;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto j = jet2(v, sigma, Padding::Reflect, radius);
            const double dt =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            best = std::min(best, dt + 1e-12 * j.data[0]);
        }
        secs.push_back(best);
        char buf[96];
        std::snprintf(buf, sizeof buf, "64,64,64,%d,%.6f\n", w, best);
        csv += buf;
        std::printf("width %2d: %.4f s\n", w, best);
    }

    // least-squares fit seconds = a + b * width
    const std::size_t n = widths.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += widths[i];
        sy += secs[i];
        sxx += double(widths[i]) * widths[i];
        sxy += widths[i] * secs[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double a = (sy - b * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double fit = a + b * widths[i];
        ss_res += (secs[i] - fit) * (secs[i] - fit);
        ss_tot += (secs[i] - sy / n) * (secs[i] - sy / n);
    }
    const double r2 = 1.0 - ss_res / ss_tot;
    char buf[64];
    std::snprintf(buf, sizeof buf, "# linear fit R^2 = %.6f\n", r2);
    csv += buf;
    if (!out_path.empty()) write_text(out_path, csv);
    std::printf("linear fit: seconds = %.5f + %.5f * width, R^2 = %.4f\n", a, b, r2);
    return r2 >= 0.95 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rotation-invariant volumetric network toolkit"};
    app.require_subcommand(1);

    std::string in_path, out_path;
    auto* convert = app.add_subcommand("convert", "convert between NPZ and the container format");
    convert->add_option("input", in_path, "input file (NPZ or container)")->required();
    convert->add_option("output", out_path, "output file")->required();

    bool fp64 = false, break_signs = false;
    auto* selftest = app.add_subcommand("selftest", "run the numerical invariant suites");
    selftest->add_flag("--fp64", fp64, "run in 64-bit precision");
    selftest->add_flag("--break-frame-signs", break_signs)->group(""); // hidden mutation hook

    std::string config_path;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("config", config_path, "key = value config file")->required();

    std::string ckpt_path, data_path, split = "test";
    int resize_to = 0;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("data", data_path, "dataset file (NPZ or container)")->required();
    eval->add_option("--split", split, "train, val or test (default test)");
    eval->add_option("--resize-to", resize_to, "resize volumes to a cube of this side");

    std::string axes = "Z,Y,X", sweep_out = "sweep";
    double step = 15.0;
    auto* sweep = app.add_subcommand("sweep", "rotation sweep of a checkpoint over a test set");
    sweep->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
    sweep->add_option("data", data_path, "dataset file")->required();
    sweep->add_option("--axes", axes, "axes to sweep (default Z,Y,X)");
    sweep->add_option("--out", sweep_out, "output directory");
    sweep->add_option("--step", step, "angle step in degrees (default 15)");
    sweep->add_option("--resize-to", resize_to, "resize volumes to a cube of this side");

    std::string bench_out;
    auto* bench = app.add_subcommand("bench", "jet runtime scaling vs kernel width at 64^3");
    bench->add_option("--out", bench_out, "write the timing CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (convert->parsed()) return cmd_convert(in_path, out_path);
        if (selftest->parsed()) return cmd_selftest(fp64, break_signs);
        if (train->parsed()) return cmd_train(config_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, data_path, split, resize_to);
        if (sweep->parsed()) return cmd_sweep(ckpt_path, data_path, axes, sweep_out, resize_to, step);
        if (bench->parsed()) return cmd_bench(bench_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
