#include "aoff/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "aoff/field_ops.hpp"
#include "aoff/metrics.hpp"
#include "aoff/parallel.hpp"
#include "fft_backend.hpp"
#include "gemm.hpp"

using nlohmann::json;

namespace aoff {

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

std::vector<double> binarize(const std::vector<double>& weights) {
    std::vector<double> out(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        if (!std::isfinite(weights[i])) throw std::invalid_argument("binarize: non-finite weight");
        out[i] = weights[i] > 0.0 ? 1.0 : 0.0;
    }
    return out;
}

std::vector<double> quantize(const std::vector<double>& weights, int bits) {
    if (bits == 1) return binarize(weights);
    if (bits != 2 && bits != 8 && bits != 32)
        throw std::invalid_argument("quantize: unsupported bit depth " + std::to_string(bits));
    std::vector<double> out(weights.size());
    if (bits == 32) {
        for (size_t i = 0; i < weights.size(); ++i) out[i] = sigmoid(weights[i]);
        return out;
    }
    const double levels = static_cast<double>((1 << bits) - 1);
    for (size_t i = 0; i < weights.size(); ++i)
        out[i] = std::round(sigmoid(weights[i]) * levels) / levels;
    return out;
}

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

RealImage KernelBank::mask(int k) const {
    std::vector<double> w(kernel(k), kernel(k) + kernel_stride());
    std::vector<double> q = quantize(w, quant_bits);
    RealImage m(rows, cols);
    m.values = std::move(q);
    return m;
}

KernelBank KernelBank::random_init(int num_kernels, int rows, int cols, int quant_bits,
                                   uint64_t seed, double stddev) {
    KernelBank bank;
    bank.num_kernels = num_kernels;
    bank.rows = rows;
    bank.cols = cols;
    bank.quant_bits = quant_bits;
    bank.weights.resize(static_cast<size_t>(num_kernels) * rows * cols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& w : bank.weights) w = dist(rng);
    return bank;
}

NetHead NetHead::init(int channels, int map_size, int hidden, uint64_t seed) {
    NetHead h;
    h.channels = channels;
    h.map_size = map_size;
    h.hidden = hidden;
    h.bn_gamma.assign(channels, 1.0);
    h.bn_beta.assign(channels, 0.0);
    h.bn_run_mean.assign(channels, 0.0);
    h.bn_run_var.assign(channels, 1.0);
    const int feat = h.feature_dim();
    h.fc1_w.resize(static_cast<size_t>(hidden) * feat);
    h.fc1_b.assign(hidden, 0.0);
    h.fc2_w.resize(static_cast<size_t>(h.classes) * hidden);
    h.fc2_b.assign(h.classes, 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d1(0.0, std::sqrt(2.0 / feat));
    std::normal_distribution<double> d2(0.0, std::sqrt(1.0 / hidden));
    for (double& w : h.fc1_w) w = d1(rng);
    for (double& w : h.fc2_w) w = d2(rng);
    return h;
}

Model make_model(int in_channels, int input_size, int kernel_size, int num_kernels,
                 int quant_bits, int hidden, uint64_t seed) {
    if (input_size > kernel_size)
        throw std::invalid_argument("make_model: input larger than the kernel grid");
    Model m;
    m.in_channels = in_channels;
    m.kernels =
        KernelBank::random_init(num_kernels, kernel_size, kernel_size, quant_bits, seed);
    m.head = NetHead::init(num_kernels, input_size, hidden, seed + 1);
    m.preset.kernel_size = kernel_size;
    m.preset.crop_size = input_size;
    if (kernel_size <= 64) {
        m.preset.expansion = 2;
        m.preset.subpixel = 2;
    } else {
        // Bench scale; subpixel 4 keeps large grids inside memory.
        m.preset.expansion = 4;
        m.preset.subpixel = 4;
    }
    return m;
}

namespace {

using detail::gemm_nn;
using detail::gemm_nt;
using detail::gemm_tn;

/// ifftshift index map: corner_mask[i] = center_mask[map[i]].
std::vector<size_t> corner_from_center_map(int rows, int cols) {
    std::vector<size_t> map(static_cast<size_t>(rows) * cols);
    const int hr = rows / 2, hc = cols / 2;
    for (int r = 0; r < rows; ++r) {
        const int rc = (r + hr) % rows;  // centre-layout row holding corner row r
        for (int c = 0; c < cols; ++c)
            map[static_cast<size_t>(r) * cols + c] = static_cast<size_t>(rc) * cols + (c + hc) % cols;
    }
    return map;
}

struct ConvWorkspace {
    std::vector<cplx> padded;    // kernel_size^2
    std::vector<cplx> spectrum;  // per channel
    std::vector<cplx> z;
    void ensure(size_t n) {
        if (padded.size() != n) {
            padded.assign(n, cplx{});
            spectrum.assign(n, cplx{});
            z.assign(n, cplx{});
        }
    }
};

/// Pad one dataset channel into the kernel grid and transform.
void channel_spectrum(const LabeledImages& set, size_t index, int channel, int N,
                      ConvWorkspace& ws, cplx* out) {
    ws.ensure(static_cast<size_t>(N) * N);
    std::fill(ws.padded.begin(), ws.padded.end(), cplx{});
    const float* src = set.sample(index) + static_cast<size_t>(channel) * set.rows * set.cols;
    const int r0 = (N - set.rows) / 2, c0 = (N - set.cols) / 2;
    for (int r = 0; r < set.rows; ++r)
        for (int c = 0; c < set.cols; ++c)
            ws.padded[static_cast<size_t>(r0 + r) * N + c0 + c] = cplx(src[r * set.cols + c], 0.0);
    detail::fft2_raw(N, N, detail::kForward, ws.padded.data(), out);
    const double scale = 1.0 / N;  // orthonormal 2-D scaling for an N x N grid
    for (size_t i = 0; i < static_cast<size_t>(N) * N; ++i) out[i] *= scale;
}

struct BatchBuffers {
    size_t B = 0;
    int C = 0, K = 0, N = 0, crop = 0;
    std::vector<cplx> spectra;   // [b][c][N^2]
    std::vector<cplx> z_crop;    // [b][c][k][crop^2]
    std::vector<double> maps;    // [b][k][crop^2]
    std::vector<double> xhat;    // [b][k][crop^2]
    std::vector<double> pooled;  // [b][feat]
    std::vector<int> arg_r, arg_c;
    std::vector<double> hidden_pre, hidden_act;  // [b][hidden]
    std::vector<double> logits;                  // [b][classes]

    void resize(size_t b, int c, int k, int n, int crop_sz, int feat, int hidden, int classes) {
        B = b;
        C = c;
        K = k;
        N = n;
        crop = crop_sz;
        const size_t n2 = static_cast<size_t>(n) * n;
        const size_t cr2 = static_cast<size_t>(crop_sz) * crop_sz;
        spectra.assign(b * c * n2, cplx{});
        z_crop.assign(b * c * k * cr2, cplx{});
        maps.assign(b * k * cr2, 0.0);
        xhat.assign(b * k * cr2, 0.0);
        pooled.assign(b * feat, 0.0);
        arg_r.assign(b * feat, 0);
        arg_c.assign(b * feat, 0);
        hidden_pre.assign(b * hidden, 0.0);
        hidden_act.assign(b * hidden, 0.0);
        logits.assign(b * classes, 0.0);
    }
};

double relu(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Public forward helpers
// ---------------------------------------------------------------------------

std::vector<RealImage> fourier_conv_forward(const std::vector<RealImage>& channels,
                                            const KernelBank& kernels) {
    if (channels.empty()) throw std::invalid_argument("fourier_conv_forward: no input channels");
    const int N = kernels.rows;
    if (kernels.cols != N) throw std::invalid_argument("fourier_conv_forward: kernels not square");
    for (const RealImage& ch : channels)
        if (ch.rows != N || ch.cols != N)
            throw std::invalid_argument(
                "fourier_conv_forward: input " + std::to_string(ch.rows) + "x" +
                std::to_string(ch.cols) + " does not match kernel grid " + std::to_string(N));

    const std::vector<size_t> map = corner_from_center_map(N, N);
    const size_t n2 = static_cast<size_t>(N) * N;
    std::vector<std::vector<double>> masks(kernels.num_kernels);
    for (int k = 0; k < kernels.num_kernels; ++k) {
        const RealImage m = kernels.mask(k);
        masks[k].resize(n2);
        for (size_t i = 0; i < n2; ++i) masks[k][i] = m.values[map[i]];
    }

    std::vector<RealImage> out(kernels.num_kernels, RealImage(N, N, 0.0));
    std::vector<cplx> spec(n2), z(n2);
    const double scale = 1.0 / N;
    for (const RealImage& ch : channels) {
        ComplexField f = to_field(ch);
        detail::fft2_raw(N, N, detail::kForward, f.values.data(), spec.data());
        for (size_t i = 0; i < n2; ++i) spec[i] *= scale;
        for (int k = 0; k < kernels.num_kernels; ++k) {
            for (size_t i = 0; i < n2; ++i) z[i] = spec[i] * masks[k][i];
            detail::fft2_raw(N, N, detail::kBackward, z.data(), z.data());
            for (size_t i = 0; i < n2; ++i) out[k].values[i] += std::norm(z[i] * scale);
        }
    }
    return out;
}

std::vector<double> head_features(const NetHead& head, const std::vector<RealImage>& maps) {
    if (static_cast<int>(maps.size()) != head.channels)
        throw std::invalid_argument("head: expected " + std::to_string(head.channels) +
                                    " feature maps");
    const int crop = head.map_size;
    const int P = head.pooled_size();
    std::vector<double> pooled(head.feature_dim());
    for (int k = 0; k < head.channels; ++k) {
        if (maps[k].rows < crop || maps[k].cols < crop)
            throw std::invalid_argument("head: map smaller than the crop window");
        RealImage m = center_crop(maps[k], crop, crop);
        const double inv_sigma = 1.0 / std::sqrt(head.bn_run_var[k] + 1e-5);
        for (int pr = 0; pr < P; ++pr)
            for (int pc = 0; pc < P; ++pc) {
                double best = -std::numeric_limits<double>::infinity();
                for (int dr = 0; dr < head.pool; ++dr)
                    for (int dc = 0; dc < head.pool; ++dc) {
                        const double raw = m.at(pr * head.pool + dr, pc * head.pool + dc);
                        const double v =
                            head.bn_gamma[k] * (raw - head.bn_run_mean[k]) * inv_sigma +
                            head.bn_beta[k];
                        best = std::max(best, v);
                    }
                pooled[(static_cast<size_t>(k) * P + pr) * P + pc] = best;
            }
    }
    return pooled;
}

std::vector<double> fc1_pre_relu(const NetHead& head, const std::vector<double>& features) {
    const int feat = head.feature_dim();
    if (static_cast<int>(features.size()) != feat)
        throw std::invalid_argument("fc1: feature length mismatch");
    std::vector<double> h(head.hidden);
    for (int i = 0; i < head.hidden; ++i) {
        const double* w = head.fc1_w.data() + static_cast<size_t>(i) * feat;
        double s = head.fc1_b[i];
        for (int j = 0; j < feat; ++j) s += w[j] * features[j];
        h[i] = s;
    }
    return h;
}

std::vector<double> head_forward(const NetHead& head, const std::vector<RealImage>& maps) {
    const std::vector<double> pooled = head_features(head, maps);
    std::vector<double> h = fc1_pre_relu(head, pooled);
    for (double& v : h) v = relu(v);
    std::vector<double> scores(head.classes);
    for (int i = 0; i < head.classes; ++i) {
        const double* w = head.fc2_w.data() + static_cast<size_t>(i) * head.hidden;
        double s = head.fc2_b[i];
        for (int j = 0; j < head.hidden; ++j) s += w[j] * h[j];
        scores[i] = s;
    }
    return scores;
}

// ---------------------------------------------------------------------------
// Training-mode pass
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (quant_bits != 1 && quant_bits != 2 && quant_bits != 8 && quant_bits != 32)
        throw std::invalid_argument("train: quant_bits must be 1, 2, 8 or 32");
    if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be > 0");
}

TrainConfig train_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("train config: invalid JSON: ") + e.what());
    }
    for (const auto& [key, _] : root.items()) {
        static const char* allowed[] = {"epochs",     "batch_size",  "seed",
                                        "learning_rate", "quant_bits", "forward_mode",
                                        "bn_momentum"};
        if (std::find_if(std::begin(allowed), std::end(allowed),
                         [&key](const char* a) { return key == a; }) == std::end(allowed))
            throw ValidationError("train config: unknown key '" + key + "'");
    }
    TrainConfig cfg;
    cfg.epochs = root.value("epochs", cfg.epochs);
    cfg.batch_size = root.value("batch_size", cfg.batch_size);
    cfg.seed = root.value("seed", cfg.seed);
    cfg.learning_rate = root.value("learning_rate", cfg.learning_rate);
    cfg.quant_bits = root.value("quant_bits", cfg.quant_bits);
    cfg.bn_momentum = root.value("bn_momentum", cfg.bn_momentum);
    if (root.contains("forward_mode")) {
        const std::string m = root["forward_mode"].get<std::string>();
        if (m == "ideal")
            cfg.forward_mode = TrainConfig::Mode::ideal;
        else if (m == "physical")
            cfg.forward_mode = TrainConfig::Mode::physical;
        else
            throw ValidationError("train config: forward_mode must be 'ideal' or 'physical'");
    }
    cfg.validate();
    return cfg;
}

namespace {

struct HeadScratch {
    std::vector<double> d_logits, d_hidden, d_feat, d_crop;
    std::vector<double> bn_mean, bn_var;
};

/// Head forward in training mode (batch statistics) from buf.maps;
/// returns the mean cross-entropy. Fills buf.* intermediates.
double head_train_forward(const Model& model, BatchBuffers& buf, const uint8_t* labels,
                          HeadScratch& hs) {
    const NetHead& head = model.head;
    const size_t B = buf.B;
    const int K = buf.K, crop = buf.crop;
    const size_t cr2 = static_cast<size_t>(crop) * crop;
    const size_t m = B * cr2;

    hs.bn_mean.assign(K, 0.0);
    hs.bn_var.assign(K, 0.0);
    for (int k = 0; k < K; ++k) {
        double mean = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double* p = buf.maps.data() + (b * K + k) * cr2;
            for (size_t i = 0; i < cr2; ++i) mean += p[i];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double* p = buf.maps.data() + (b * K + k) * cr2;
            for (size_t i = 0; i < cr2; ++i) {
                const double d = p[i] - mean;
                var += d * d;
            }
        }
        var /= static_cast<double>(m);
        hs.bn_mean[k] = mean;
        hs.bn_var[k] = var;
    }

    const int P = head.pooled_size();
    const int feat = head.feature_dim();
    parallel_for(0, B, [&](size_t b) {
        for (int k = 0; k < K; ++k) {
            const double inv_sigma = 1.0 / std::sqrt(hs.bn_var[k] + 1e-5);
            const double* src = buf.maps.data() + (b * K + k) * cr2;
            double* xh = buf.xhat.data() + (b * K + k) * cr2;
            for (size_t i = 0; i < cr2; ++i) xh[i] = (src[i] - hs.bn_mean[k]) * inv_sigma;
            for (int pr = 0; pr < P; ++pr)
                for (int pc = 0; pc < P; ++pc) {
                    double best = -std::numeric_limits<double>::infinity();
                    int br = 0, bc = 0;
                    for (int dr = 0; dr < head.pool; ++dr)
                        for (int dc = 0; dc < head.pool; ++dc) {
                            const int r = pr * head.pool + dr, c = pc * head.pool + dc;
                            const double v =
                                head.bn_gamma[k] * xh[static_cast<size_t>(r) * crop + c] +
                                head.bn_beta[k];
                            if (v > best) {
                                best = v;
                                br = r;
                                bc = c;
                            }
                        }
                    const size_t fi = (static_cast<size_t>(k) * P + pr) * P + pc;
                    buf.pooled[b * feat + fi] = best;
                    buf.arg_r[b * feat + fi] = br;
                    buf.arg_c[b * feat + fi] = bc;
                }
        }
    });

    std::fill(buf.hidden_pre.begin(), buf.hidden_pre.end(), 0.0);
    gemm_nt(buf.hidden_pre.data(), buf.pooled.data(), head.fc1_w.data(), B, head.hidden, feat);
    parallel_for(0, B, [&](size_t b) {
        for (int i = 0; i < head.hidden; ++i) {
            const double v = buf.hidden_pre[b * head.hidden + i] + head.fc1_b[i];
            buf.hidden_pre[b * head.hidden + i] = v;
            buf.hidden_act[b * head.hidden + i] = relu(v);
        }
    });
    std::fill(buf.logits.begin(), buf.logits.end(), 0.0);
    gemm_nt(buf.logits.data(), buf.hidden_act.data(), head.fc2_w.data(), B, head.classes,
            head.hidden);

    double loss = 0.0;
    for (size_t b = 0; b < B; ++b) {
        double* lg = buf.logits.data() + b * head.classes;
        for (int i = 0; i < head.classes; ++i) lg[i] += head.fc2_b[i];
        double mx = lg[0];
        for (int i = 1; i < head.classes; ++i) mx = std::max(mx, lg[i]);
        double z = 0.0;
        for (int i = 0; i < head.classes; ++i) z += std::exp(lg[i] - mx);
        loss += -(lg[labels[b]] - mx - std::log(z));
    }
    return loss / static_cast<double>(B);
}

/// Head backward from softmax cross-entropy down to d(maps); fills the
/// head gradients in `out` and hs.d_crop (layout as buf.maps).
void head_backward(const Model& model, BatchBuffers& buf, const uint8_t* labels, HeadScratch& hs,
                   Gradients& out) {
    const NetHead& head = model.head;
    const size_t B = buf.B;
    const int K = buf.K, crop = buf.crop;
    const size_t cr2 = static_cast<size_t>(crop) * crop;
    const int feat = head.feature_dim();

    hs.d_logits.assign(B * head.classes, 0.0);
    for (size_t b = 0; b < B; ++b) {
        const double* lg = buf.logits.data() + b * head.classes;
        double* dl = hs.d_logits.data() + b * head.classes;
        double mx = lg[0];
        for (int i = 1; i < head.classes; ++i) mx = std::max(mx, lg[i]);
        double z = 0.0;
        for (int i = 0; i < head.classes; ++i) z += std::exp(lg[i] - mx);
        for (int i = 0; i < head.classes; ++i)
            dl[i] = (std::exp(lg[i] - mx) / z - (labels[b] == i ? 1.0 : 0.0)) /
                    static_cast<double>(B);
    }

    out.fc2_w.assign(head.fc2_w.size(), 0.0);
    out.fc2_b.assign(head.classes, 0.0);
    gemm_tn(out.fc2_w.data(), hs.d_logits.data(), buf.hidden_act.data(), B, head.classes,
            head.hidden);
    for (size_t b = 0; b < B; ++b)
        for (int i = 0; i < head.classes; ++i) out.fc2_b[i] += hs.d_logits[b * head.classes + i];

    hs.d_hidden.assign(B * head.hidden, 0.0);
    gemm_nn(hs.d_hidden.data(), hs.d_logits.data(), head.fc2_w.data(), B, head.hidden,
            head.classes);
    for (size_t b = 0; b < B; ++b)
        for (int i = 0; i < head.hidden; ++i)
            if (buf.hidden_pre[b * head.hidden + i] <= 0.0) hs.d_hidden[b * head.hidden + i] = 0.0;

    out.fc1_w.assign(head.fc1_w.size(), 0.0);
    out.fc1_b.assign(head.hidden, 0.0);
    gemm_tn(out.fc1_w.data(), hs.d_hidden.data(), buf.pooled.data(), B, head.hidden, feat);
    for (size_t b = 0; b < B; ++b)
        for (int i = 0; i < head.hidden; ++i) out.fc1_b[i] += hs.d_hidden[b * head.hidden + i];

    hs.d_feat.assign(B * feat, 0.0);
    gemm_nn(hs.d_feat.data(), hs.d_hidden.data(), head.fc1_w.data(), B, feat, head.hidden);

    // unpool to d(bn output), then batch-norm backward to d(maps)
    std::vector<double> d_bn(B * K * cr2, 0.0);
    const int P = head.pooled_size();
    parallel_for(0, B, [&](size_t b) {
        for (int k = 0; k < K; ++k)
            for (int pr = 0; pr < P; ++pr)
                for (int pc = 0; pc < P; ++pc) {
                    const size_t fi = (static_cast<size_t>(k) * P + pr) * P + pc;
                    const double g = hs.d_feat[b * feat + fi];
                    if (g == 0.0) continue;
                    const int r = buf.arg_r[b * feat + fi], c = buf.arg_c[b * feat + fi];
                    d_bn[(b * K + k) * cr2 + static_cast<size_t>(r) * crop + c] += g;
                }
    });

    out.bn_gamma.assign(K, 0.0);
    out.bn_beta.assign(K, 0.0);
    hs.d_crop.assign(B * K * cr2, 0.0);
    const double m = static_cast<double>(B * cr2);
    for (int k = 0; k < K; ++k) {
        double sum_dy = 0.0, sum_dyx = 0.0;
        for (size_t b = 0; b < B; ++b) {
            const double* dy = d_bn.data() + (b * K + k) * cr2;
            const double* xh = buf.xhat.data() + (b * K + k) * cr2;
            for (size_t i = 0; i < cr2; ++i) {
                sum_dy += dy[i];
                sum_dyx += dy[i] * xh[i];
            }
        }
        out.bn_gamma[k] = sum_dyx;
        out.bn_beta[k] = sum_dy;
        const double inv_sigma = 1.0 / std::sqrt(hs.bn_var[k] + 1e-5);
        const double gs = model.head.bn_gamma[k] * inv_sigma;
        for (size_t b = 0; b < B; ++b) {
            const double* dy = d_bn.data() + (b * K + k) * cr2;
            const double* xh = buf.xhat.data() + (b * K + k) * cr2;
            double* dx = hs.d_crop.data() + (b * K + k) * cr2;
            for (size_t i = 0; i < cr2; ++i)
                dx[i] = gs * (dy[i] - sum_dy / m - xh[i] * sum_dyx / m);
        }
    }
}

}  // namespace

double forward_backward(Model& model, const LabeledImages& set,
                        const std::vector<size_t>& batch_indices, Gradients* out,
                        bool update_running, const std::vector<double>* mask_override) {
    const size_t B = batch_indices.size();
    if (B == 0) throw std::invalid_argument("forward_backward: empty batch");
    const int N = model.preset.kernel_size;
    const int crop = model.preset.crop_size;
    const int K = model.kernels.num_kernels;
    const int C = model.in_channels;
    const size_t n2 = static_cast<size_t>(N) * N;
    const size_t cr2 = static_cast<size_t>(crop) * crop;

    // Quantized masks in corner layout for the bin-wise product.
    const std::vector<size_t> map = corner_from_center_map(N, N);
    std::vector<double> masks_center;
    if (mask_override) {
        if (mask_override->size() != static_cast<size_t>(K) * n2)
            throw std::invalid_argument("forward_backward: mask override size mismatch");
        masks_center = *mask_override;
    } else {
        masks_center = quantize(model.kernels.weights, model.kernels.quant_bits);
    }
    std::vector<double> masks_corner(static_cast<size_t>(K) * n2);
    for (int k = 0; k < K; ++k)
        for (size_t i = 0; i < n2; ++i)
            masks_corner[k * n2 + i] = masks_center[k * n2 + map[i]];

    static thread_local BatchBuffers buf;
    buf.resize(B, C, K, N, crop, model.head.feature_dim(), model.head.hidden,
               model.head.classes);

    const int workers = num_threads();
    std::vector<ConvWorkspace> ws(workers);
    const int crop0 = (N - crop) / 2;
    const double scale = 1.0 / N;

    parallel_chunks(0, B, [&](size_t lo, size_t hi, int w) {
        ConvWorkspace& wk = ws[w];
        for (size_t b = lo; b < hi; ++b) {
            for (int c = 0; c < C; ++c) {
                cplx* X = buf.spectra.data() + (b * C + c) * n2;
                channel_spectrum(set, batch_indices[b], c, N, wk, X);
                for (int k = 0; k < K; ++k) {
                    const double* M = masks_corner.data() + k * n2;
                    for (size_t i = 0; i < n2; ++i) wk.z[i] = X[i] * M[i];
                    detail::fft2_raw(N, N, detail::kBackward, wk.z.data(), wk.z.data());
                    cplx* zc = buf.z_crop.data() + ((b * C + c) * K + k) * cr2;
                    double* y = buf.maps.data() + (b * K + k) * cr2;
                    for (int r = 0; r < crop; ++r)
                        for (int cc2 = 0; cc2 < crop; ++cc2) {
                            const cplx v =
                                wk.z[static_cast<size_t>(crop0 + r) * N + crop0 + cc2] * scale;
                            zc[static_cast<size_t>(r) * crop + cc2] = v;
                            y[static_cast<size_t>(r) * crop + cc2] += std::norm(v);
                        }
                }
            }
        }
    });

    std::vector<uint8_t> labels(B);
    for (size_t b = 0; b < B; ++b) labels[b] = set.labels[batch_indices[b]];

    static thread_local HeadScratch hs;
    const double loss = head_train_forward(model, buf, labels.data(), hs);

    if (update_running) {
        const double mom = 0.1;
        for (int k = 0; k < K; ++k) {
            model.head.bn_run_mean[k] = (1 - mom) * model.head.bn_run_mean[k] + mom * hs.bn_mean[k];
            model.head.bn_run_var[k] = (1 - mom) * model.head.bn_run_var[k] + mom * hs.bn_var[k];
        }
    }
    if (!out) return loss;

    head_backward(model, buf, labels.data(), hs, *out);

    // d(maps) -> mask gradients: g_z = 2 * g_y * z on the crop window,
    // g_M += Re(dft2(g_z) * conj(X)).
    out->kernel_masks.assign(static_cast<size_t>(K) * n2, 0.0);
    std::vector<std::vector<double>> partial(workers);
    parallel_chunks(0, B, [&](size_t lo, size_t hi, int w) {
        ConvWorkspace& wk = ws[w];
        wk.ensure(n2);
        std::vector<double>& acc = partial[w];
        acc.assign(static_cast<size_t>(K) * n2, 0.0);
        for (size_t b = lo; b < hi; ++b) {
            for (int c = 0; c < C; ++c) {
                const cplx* X = buf.spectra.data() + (b * C + c) * n2;
                for (int k = 0; k < K; ++k) {
                    const double* gy = hs.d_crop.data() + (b * K + k) * cr2;
                    const cplx* zc = buf.z_crop.data() + ((b * C + c) * K + k) * cr2;
                    std::fill(wk.z.begin(), wk.z.end(), cplx{});
                    for (int r = 0; r < crop; ++r)
                        for (int cc2 = 0; cc2 < crop; ++cc2)
                            wk.z[static_cast<size_t>(crop0 + r) * N + crop0 + cc2] =
                                2.0 * gy[static_cast<size_t>(r) * crop + cc2] *
                                zc[static_cast<size_t>(r) * crop + cc2];
                    detail::fft2_raw(N, N, detail::kForward, wk.z.data(), wk.z.data());
                    double* a = acc.data() + k * n2;
                    for (size_t i = 0; i < n2; ++i)
                        a[i] += (wk.z[i] * scale * std::conj(X[i])).real();
                }
            }
        }
    });
    for (int w = 0; w < workers; ++w) {
        if (partial[w].empty()) continue;
        for (size_t i = 0; i < out->kernel_masks.size(); ++i)
            out->kernel_masks[i] += partial[w][i];
    }

    // corner -> authored centre layout
    std::vector<double> centred(out->kernel_masks.size());
    for (int k = 0; k < K; ++k)
        for (size_t i = 0; i < n2; ++i)
            centred[k * n2 + map[i]] = out->kernel_masks[k * n2 + i];
    out->kernel_masks = std::move(centred);

    // Straight-through to the raw weights; the sigmoid factor applies
    // where quantize uses it.
    out->kernel_weights.assign(model.kernels.weights.size(), 0.0);
    if (model.kernels.quant_bits == 1) {
        out->kernel_weights = out->kernel_masks;
    } else {
        for (size_t i = 0; i < out->kernel_weights.size(); ++i) {
            const double s = sigmoid(model.kernels.weights[i]);
            out->kernel_weights[i] = out->kernel_masks[i] * s * (1.0 - s);
        }
    }
    out->loss = loss;
    return loss;
}

// ---------------------------------------------------------------------------
// Physical conv layer
// ---------------------------------------------------------------------------

PhysicalConv::PhysicalConv(const Model& model, const SystemConfig& config)
    : cfg_(config), preset_(model.preset), num_kernels_(model.kernels.num_kernels) {
    if (model.kernels.rows != model.kernels.cols)
        throw std::invalid_argument("physical conv: kernels must be square");
    cfg_.dmd1.subpixel_factor = preset_.subpixel;
    cfg_.dmd2.subpixel_factor = preset_.subpixel;
    pattern_size_ = model.kernels.rows * preset_.expansion;
    grid_ = pattern_size_ * preset_.subpixel;

    kernel_mults_.reserve(num_kernels_);
    for (int k = 0; k < num_kernels_; ++k) {
        const RealImage padded =
            zero_pad_center(model.kernels.mask(k), pattern_size_, pattern_size_);
        Propagator prop(cfg_, padded);
        if (k == 0) {
            const auto [fr, fc] = tilt_cycles_per_sample(cfg_.dmd1, cfg_.wavelength);
            roll_r_ = static_cast<int>(std::lround(fr * grid_));
            roll_c_ = static_cast<int>(std::lround(fc * grid_));
        }
        kernel_mults_.push_back(prop.fourier_multiplier());
    }

    // Lens-only transfer, needed to peel the mask factor off in the
    // mask-gradient chain.
    ComplexField ones(grid_, grid_, FieldLayout::dc_at_center);
    for (cplx& v : ones.values) v = 1.0;
    const double pitch = cfg_.dmd1.pixel_pitch / cfg_.dmd1.subpixel_factor;
    lens_mult_ = lens_transfer(lens_transfer(ones, cfg_.lens1, cfg_.wavelength, pitch), cfg_.lens2,
                               cfg_.wavelength, pitch);

    // Mask-independent propagator handling the input-side stages, so
    // the modulation, illumination, tilt and alignment stay identical
    // to propagate_4f.
    RealImage open(pattern_size_, pattern_size_, 1.0);
    input_probe_ = std::make_shared<Propagator>(cfg_, open);

    saturation_.assign(num_kernels_, cfg_.camera.saturation_level);
}

ComplexField PhysicalConv::input_spectrum(const RealImage& channel_pattern) const {
    return input_probe_->input_spectrum(channel_pattern);
}

RealImage PhysicalConv::detect_raw(const ComplexField& masked_spectrum) const {
    ComplexField spec = shift_layout(masked_spectrum);
    ComplexField image = idft2(spec);
    image = tilt_phase(image, cfg_.dmd2, cfg_.wavelength, -1.0);
    RealImage img = intensity(image);
    return superpixel_reduce(img, preset_.subpixel * preset_.expansion);
}

void PhysicalConv::calibrate(const LabeledImages& samples, size_t count) {
    count = std::min(count, samples.count());
    if (count == 0) throw std::invalid_argument("calibrate: no samples");
    std::vector<double> peak(num_kernels_, 0.0);
    const int C =
        std::min(samples.channels, 3);  // calibration uses the dataset's own channels
    for (size_t i = 0; i < count; ++i) {
        for (int c = 0; c < C; ++c) {
            RealImage pattern = expand_pixels(
                zero_pad_center(samples.image(i, c), pattern_size_ / preset_.expansion,
                                pattern_size_ / preset_.expansion),
                preset_.expansion);
            const ComplexField S = input_spectrum(pattern);
            for (int k = 0; k < num_kernels_; ++k) {
                ComplexField Z(grid_, grid_, FieldLayout::dc_at_center);
                const cplx* m = kernel_mults_[k].values.data();
                for (size_t p = 0; p < Z.values.size(); ++p) Z.values[p] = S.values[p] * m[p];
                const RealImage raw = detect_raw(Z);
                peak[k] = std::max(peak[k], raw.max_value());
            }
        }
    }
    for (int k = 0; k < num_kernels_; ++k)
        saturation_[k] = peak[k] > 0.0 ? peak[k] : cfg_.camera.saturation_level;
}

std::vector<RealImage> PhysicalConv::forward(const LabeledImages& set, size_t index,
                                             uint64_t frame_seed) const {
    const int base = pattern_size_ / preset_.expansion;
    std::vector<RealImage> features(num_kernels_, RealImage(base, base, 0.0));
    for (int c = 0; c < set.channels; ++c) {
        RealImage pattern =
            expand_pixels(zero_pad_center(set.image(index, c), base, base), preset_.expansion);
        const ComplexField S = input_spectrum(pattern);
        for (int k = 0; k < num_kernels_; ++k) {
            ComplexField Z(grid_, grid_, FieldLayout::dc_at_center);
            const cplx* m = kernel_mults_[k].values.data();
            for (size_t p = 0; p < Z.values.size(); ++p) Z.values[p] = S.values[p] * m[p];
            RealImage raw = detect_raw(Z);

            CameraSpec cam = cfg_.camera;
            cam.saturation_level = saturation_[k];
            const PerturbationSpec& pert = cfg_.perturbations;
            if (pert.camera_saturation_scale) cam.saturation_level *= *pert.camera_saturation_scale;
            if (pert.camera_noise_sigma) cam.noise_sigma = *pert.camera_noise_sigma;
            std::mt19937_64 rng(pert.noise_seed +
                                0x9E3779B97F4A7C15ull * (frame_seed * set.channels + c + 1) +
                                k * 0xD1B54A32D192ED03ull);
            RealImage counts = apply_camera(raw, cam, &rng);
            // back to intensity units so both paths share the head's scale
            const double full_scale = cam.saturation_level;
            for (size_t p = 0; p < counts.values.size(); ++p)
                features[k].values[p] += counts.values[p] * full_scale;
        }
    }
    return features;
}

void PhysicalConv::backward_masks(const LabeledImages& set, size_t index,
                                  const std::vector<RealImage>& feature_grads,
                                  uint64_t /*frame_seed*/, std::vector<double>& grad) const {
    const int base = pattern_size_ / preset_.expansion;
    const int kernel_size = base;
    const size_t kn2 = static_cast<size_t>(kernel_size) * kernel_size;
    if (grad.size() != static_cast<size_t>(num_kernels_) * kn2)
        throw std::invalid_argument("backward_masks: gradient buffer size mismatch");
    const int block = preset_.subpixel * preset_.expansion;
    const PerturbationSpec& pert = cfg_.perturbations;

    // Subpixel footprint of one lit DMD2 pixel (delta-pattern trick).
    DmdSpec probe_spec = cfg_.dmd2;
    const double off = std::isinf(probe_spec.contrast_ratio) ? 0.0 : 1.0 / probe_spec.contrast_ratio;
    RealImage delta(1, 1, 1.0);
    DmdSpec unit = probe_spec;
    unit.contrast_ratio = std::numeric_limits<double>::infinity();
    const ComplexField footprint = dmd_modulate(delta, unit);
    const int s = preset_.subpixel;

    for (int c = 0; c < set.channels; ++c) {
        RealImage pattern =
            expand_pixels(zero_pad_center(set.image(index, c), base, base), preset_.expansion);
        const ComplexField S = input_spectrum(pattern);
        for (int k = 0; k < num_kernels_; ++k) {
            // forward intermediates
            ComplexField Z(grid_, grid_, FieldLayout::dc_at_center);
            const cplx* m = kernel_mults_[k].values.data();
            for (size_t p = 0; p < Z.values.size(); ++p) Z.values[p] = S.values[p] * m[p];
            ComplexField w = shift_layout(Z);
            ComplexField z = idft2(w);
            ComplexField zt = tilt_phase(z, cfg_.dmd2, cfg_.wavelength, -1.0);
            RealImage I(grid_, grid_);
            for (size_t p = 0; p < zt.values.size(); ++p) I.values[p] = std::norm(zt.values[p]);
            RealImage I_red = superpixel_reduce(I, block);

            double sat_eff = saturation_[k];
            if (pert.camera_saturation_scale) sat_eff *= *pert.camera_saturation_scale;

            // camera: straight-through inside the unclipped range
            RealImage g_red(base, base, 0.0);
            for (size_t p = 0; p < g_red.values.size(); ++p)
                g_red.values[p] =
                    I_red.values[p] < sat_eff ? feature_grads[k].values[p] : 0.0;

            // mean-pool adjoint
            RealImage g_I(grid_, grid_, 0.0);
            const double inv_b2 = 1.0 / (static_cast<double>(block) * block);
            for (int r = 0; r < grid_; ++r)
                for (int cc = 0; cc < grid_; ++cc)
                    g_I.at(r, cc) = g_red.at(r / block, cc / block) * inv_b2;

            // |.|^2, opposite tilt, inverse transform, re-centre
            ComplexField g_z(grid_, grid_, FieldLayout::dc_at_corner);
            for (size_t p = 0; p < g_z.values.size(); ++p)
                g_z.values[p] = 2.0 * g_I.values[p] * zt.values[p];
            g_z = tilt_phase(g_z, cfg_.dmd2, cfg_.wavelength, 1.0);  // conj of the -1 phase
            ComplexField g_w = dft2(g_z);
            ComplexField g_Z = shift_layout(g_w);

            // peel the input and lens factors off: d/d(mask field)
            ComplexField g_A(grid_, grid_, FieldLayout::dc_at_center);
            for (size_t p = 0; p < g_A.values.size(); ++p)
                g_A.values[p] = g_Z.values[p] *
                                std::conj(S.values[p] * lens_mult_.values[p]);

            // undo the sub-pixel misalignment
            if (pert.mask_shift_x != 0.0 || pert.mask_shift_y != 0.0)
                g_A = shift_field_subpixel(g_A, -pert.mask_shift_y * s, -pert.mask_shift_x * s);

            // collapse the mirror footprint to pattern pixels
            RealImage g_pattern(pattern_size_, pattern_size_, 0.0);
            for (int pr = 0; pr < pattern_size_; ++pr)
                for (int pc = 0; pc < pattern_size_; ++pc) {
                    double acc = 0.0;
                    for (int i = 0; i < s; ++i)
                        for (int j = 0; j < s; ++j) {
                            if (footprint.at(i, j).real() == 0.0) continue;
                            acc += g_A.at(pr * s + i, pc * s + j).real();
                        }
                    g_pattern.at(pr, pc) = acc * (1.0 - off);
                }

            if (pert.rotation_error != 0.0)
                g_pattern = rotate_bilinear_adjoint(g_pattern, pert.rotation_error);

            RealImage g_mask = center_crop(g_pattern, kernel_size, kernel_size);
            double* gk = grad.data() + static_cast<size_t>(k) * kn2;
            for (size_t p = 0; p < kn2; ++p) gk[p] += g_mask.values[p];
        }
    }
}

// ---------------------------------------------------------------------------
// Adam + epoch loop
// ---------------------------------------------------------------------------

namespace {

struct AdamState {
    std::vector<double> m, v;
    void ensure(size_t n) {
        if (m.size() != n) {
            m.assign(n, 0.0);
            v.assign(n, 0.0);
        }
    }
};

void adam_step(std::vector<double>& w, const std::vector<double>& g, AdamState& st,
               const TrainConfig& cfg, long t) {
    st.ensure(w.size());
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < w.size(); ++i) {
        st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g[i];
        st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        w[i] -= cfg.learning_rate * (st.m[i] / bc1) / (std::sqrt(st.v[i] / bc2) + cfg.epsilon);
    }
}

/// Physical-mode training pass: conv features via the engine, head in
/// training mode, mask gradients through the physical adjoint chain.
double physical_forward_backward(Model& model, const LabeledImages& set,
                                 const std::vector<size_t>& batch, const PhysicalConv& conv,
                                 Gradients* out, bool update_running, uint64_t step_seed) {
    const size_t B = batch.size();
    const int K = model.kernels.num_kernels;
    const int N = model.preset.kernel_size;
    const int crop = model.preset.crop_size;
    const size_t cr2 = static_cast<size_t>(crop) * crop;
    const int crop0 = (N - crop) / 2;

    static thread_local BatchBuffers buf;
    buf.resize(B, 1, K, N, crop, model.head.feature_dim(), model.head.hidden,
               model.head.classes);
    std::vector<std::vector<RealImage>> full_maps(B);
    parallel_for(0, B, [&](size_t b) {
        full_maps[b] = conv.forward(set, batch[b], step_seed + batch[b]);
        for (int k = 0; k < K; ++k) {
            double* y = buf.maps.data() + (b * K + k) * cr2;
            for (int r = 0; r < crop; ++r)
                for (int c = 0; c < crop; ++c)
                    y[static_cast<size_t>(r) * crop + c] = full_maps[b][k].at(crop0 + r, crop0 + c);
        }
    });

    std::vector<uint8_t> labels(B);
    for (size_t b = 0; b < B; ++b) labels[b] = set.labels[batch[b]];
    static thread_local HeadScratch hs;
    const double loss = head_train_forward(model, buf, labels.data(), hs);
    if (update_running) {
        for (int k = 0; k < K; ++k) {
            model.head.bn_run_mean[k] = 0.9 * model.head.bn_run_mean[k] + 0.1 * hs.bn_mean[k];
            model.head.bn_run_var[k] = 0.9 * model.head.bn_run_var[k] + 0.1 * hs.bn_var[k];
        }
    }
    if (!out) return loss;
    head_backward(model, buf, labels.data(), hs, *out);

    const size_t kn2 = model.kernels.kernel_stride();
    out->kernel_masks.assign(static_cast<size_t>(K) * kn2, 0.0);
    const int workers = num_threads();
    std::vector<std::vector<double>> partial(workers);
    parallel_chunks(0, B, [&](size_t lo, size_t hi, int w) {
        partial[w].assign(static_cast<size_t>(K) * kn2, 0.0);
        for (size_t b = lo; b < hi; ++b) {
            std::vector<RealImage> g_maps(K, RealImage(N, N, 0.0));
            for (int k = 0; k < K; ++k) {
                const double* gy = hs.d_crop.data() + (b * K + k) * cr2;
                for (int r = 0; r < crop; ++r)
                    for (int c = 0; c < crop; ++c)
                        g_maps[k].at(crop0 + r, crop0 + c) = gy[static_cast<size_t>(r) * crop + c];
            }
            conv.backward_masks(set, batch[b], g_maps, step_seed + batch[b], partial[w]);
        }
    });
    for (int w = 0; w < workers; ++w) {
        if (partial[w].empty()) continue;
        for (size_t i = 0; i < out->kernel_masks.size(); ++i)
            out->kernel_masks[i] += partial[w][i];
    }

    out->kernel_weights.assign(model.kernels.weights.size(), 0.0);
    if (model.kernels.quant_bits == 1) {
        out->kernel_weights = out->kernel_masks;
    } else {
        for (size_t i = 0; i < out->kernel_weights.size(); ++i) {
            const double sg = sigmoid(model.kernels.weights[i]);
            out->kernel_weights[i] = out->kernel_masks[i] * sg * (1.0 - sg);
        }
    }
    out->loss = loss;
    return loss;
}

}  // namespace

TrainResult train(const LabeledImages& train_set, const LabeledImages& val_set, Model model,
                  const TrainConfig& cfg, const SystemConfig* physical_config) {
    cfg.validate();
    if (train_set.count() == 0) throw std::invalid_argument("train: empty dataset");
    model.kernels.quant_bits = cfg.quant_bits;
    const bool physical = cfg.forward_mode == TrainConfig::Mode::physical;
    if (physical && physical_config == nullptr)
        throw std::invalid_argument("train: physical mode needs a system config");

    TrainResult result;
    result.model = model;

    AdamState st_kernels, st_bng, st_bnb, st_f1w, st_f1b, st_f2w, st_f2b;
    long t = 0;
    Gradients g;

    std::vector<size_t> order(train_set.count());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull * static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        long batches = 0;
        for (size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            std::vector<size_t> batch(order.begin() + b0, order.begin() + b1);
            double loss;
            if (physical) {
                // masks change every step, so the Fourier-plane state
                // is rebuilt per batch (small instances only)
                PhysicalConv conv(model, *physical_config);
                loss = physical_forward_backward(model, train_set, batch, conv, &g, true,
                                                 cfg.seed + t);
            } else {
                loss = forward_backward(model, train_set, batch, &g, true);
            }
            loss_sum += loss;
            ++batches;
            ++t;
            adam_step(model.kernels.weights, g.kernel_weights, st_kernels, cfg, t);
            adam_step(model.head.bn_gamma, g.bn_gamma, st_bng, cfg, t);
            adam_step(model.head.bn_beta, g.bn_beta, st_bnb, cfg, t);
            adam_step(model.head.fc1_w, g.fc1_w, st_f1w, cfg, t);
            adam_step(model.head.fc1_b, g.fc1_b, st_f1b, cfg, t);
            adam_step(model.head.fc2_w, g.fc2_w, st_f2w, cfg, t);
            adam_step(model.head.fc2_b, g.fc2_b, st_f2b, cfg, t);
        }

        EpochStats stats;
        stats.train_loss = loss_sum / std::max(1L, batches);
        if (val_set.count() > 0) {
            if (physical) {
                PhysicalConv vconv(model, *physical_config);
                stats.val_accuracy = evaluate_physical(model, val_set, vconv).accuracy;
            } else {
                stats.val_accuracy = evaluate(model, val_set).accuracy;
            }
        }
        result.history.push_back(stats);
        if (stats.val_accuracy >= result.best_val_accuracy) {
            result.best_val_accuracy = stats.val_accuracy;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    if (val_set.count() == 0) result.model = model;
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

EvalResult evaluate(const Model& model, const LabeledImages& set) {
    const int N = model.preset.kernel_size;
    const int K = model.kernels.num_kernels;
    const size_t n2 = static_cast<size_t>(N) * N;
    const std::vector<size_t> map = corner_from_center_map(N, N);
    std::vector<double> masks_center = quantize(model.kernels.weights, model.kernels.quant_bits);
    std::vector<double> masks_corner(masks_center.size());
    for (int k = 0; k < K; ++k)
        for (size_t i = 0; i < n2; ++i)
            masks_corner[k * n2 + i] = masks_center[k * n2 + map[i]];

    EvalResult res;
    res.predictions.assign(set.count(), -1);
    const int workers = num_threads();
    std::vector<ConvWorkspace> ws(workers);
    const double scale = 1.0 / N;
    parallel_chunks(0, set.count(), [&](size_t lo, size_t hi, int w) {
        ConvWorkspace& wk = ws[w];
        std::vector<cplx> X(n2);
        std::vector<RealImage> maps_k(K, RealImage(N, N, 0.0));
        for (size_t i = lo; i < hi; ++i) {
            for (int k = 0; k < K; ++k) std::fill(maps_k[k].values.begin(), maps_k[k].values.end(), 0.0);
            for (int c = 0; c < set.channels; ++c) {
                channel_spectrum(set, i, c, N, wk, X.data());
                for (int k = 0; k < K; ++k) {
                    const double* M = masks_corner.data() + k * n2;
                    for (size_t p = 0; p < n2; ++p) wk.z[p] = X[p] * M[p];
                    detail::fft2_raw(N, N, detail::kBackward, wk.z.data(), wk.z.data());
                    for (size_t p = 0; p < n2; ++p)
                        maps_k[k].values[p] += std::norm(wk.z[p] * scale);
                }
            }
            res.predictions[i] = argmax(head_forward(model.head, maps_k));
        }
    });
    res.accuracy = accuracy(res.predictions, set.labels);
    res.confusion_matrix = confusion(res.predictions, set.labels);
    return res;
}

EvalResult evaluate_physical(const Model& model, const LabeledImages& set,
                             const PhysicalConv& conv, uint64_t seed_base) {
    EvalResult res;
    res.predictions.assign(set.count(), -1);
    parallel_for(0, set.count(), [&](size_t i) {
        const std::vector<RealImage> maps = conv.forward(set, i, seed_base + i);
        res.predictions[i] = argmax(head_forward(model.head, maps));
    });
    res.accuracy = accuracy(res.predictions, set.labels);
    res.confusion_matrix = confusion(res.predictions, set.labels);
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

RasterFile tensor_raster(const std::vector<double>& v, uint32_t rows, uint32_t cols,
                         uint32_t channels = 1) {
    RasterFile r;
    r.rows = rows;
    r.cols = cols;
    r.channels = channels;
    r.payload.assign(v.begin(), v.end());
    return r;
}

std::vector<double> raster_tensor(const RasterFile& r, size_t expect) {
    if (r.payload.size() != expect)
        throw ParseError("checkpoint: tensor size mismatch (" + std::to_string(r.payload.size()) +
                         " vs " + std::to_string(expect) + ")");
    return std::vector<double>(r.payload.begin(), r.payload.end());
}

}  // namespace

void save_checkpoint(const std::string& dir, const Model& model, const CheckpointMeta& meta) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const NetHead& h = model.head;
    write_raster(dir + "/kernels.aoff",
                 tensor_raster(model.kernels.weights, model.kernels.rows, model.kernels.cols,
                               model.kernels.num_kernels));
    std::vector<double> bn;
    bn.insert(bn.end(), h.bn_gamma.begin(), h.bn_gamma.end());
    bn.insert(bn.end(), h.bn_beta.begin(), h.bn_beta.end());
    bn.insert(bn.end(), h.bn_run_mean.begin(), h.bn_run_mean.end());
    bn.insert(bn.end(), h.bn_run_var.begin(), h.bn_run_var.end());
    write_raster(dir + "/bn.aoff", tensor_raster(bn, 4, h.channels));
    write_raster(dir + "/fc1_w.aoff", tensor_raster(h.fc1_w, h.hidden, h.feature_dim()));
    write_raster(dir + "/fc1_b.aoff", tensor_raster(h.fc1_b, 1, h.hidden));
    write_raster(dir + "/fc2_w.aoff", tensor_raster(h.fc2_w, h.classes, h.hidden));
    write_raster(dir + "/fc2_b.aoff", tensor_raster(h.fc2_b, 1, h.classes));

    json manifest{{"version", 1},
                  {"quant_bits", model.kernels.quant_bits},
                  {"num_kernels", model.kernels.num_kernels},
                  {"kernel_rows", model.kernels.rows},
                  {"kernel_cols", model.kernels.cols},
                  {"crop_size", model.preset.crop_size},
                  {"expansion", model.preset.expansion},
                  {"subpixel", model.preset.subpixel},
                  {"in_channels", model.in_channels},
                  {"hidden", h.hidden},
                  {"classes", h.classes},
                  {"seed", meta.seed},
                  {"epoch", meta.epoch},
                  {"val_accuracy", meta.val_accuracy},
                  {"dataset", meta.dataset}};
    write_text_file(dir + "/checkpoint.json", manifest.dump(2));
}

Model load_checkpoint(const std::string& dir, CheckpointMeta* meta) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir + "/checkpoint.json"));
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: invalid manifest: ") + e.what());
    }
    Model m;
    m.kernels.quant_bits = manifest.at("quant_bits").get<int>();
    m.kernels.num_kernels = manifest.at("num_kernels").get<int>();
    m.kernels.rows = manifest.at("kernel_rows").get<int>();
    m.kernels.cols = manifest.at("kernel_cols").get<int>();
    m.preset.kernel_size = m.kernels.rows;
    m.preset.crop_size = manifest.at("crop_size").get<int>();
    m.preset.expansion = manifest.at("expansion").get<int>();
    m.preset.subpixel = manifest.at("subpixel").get<int>();
    m.in_channels = manifest.at("in_channels").get<int>();

    NetHead h;
    h.channels = m.kernels.num_kernels;
    h.map_size = m.preset.crop_size;
    h.hidden = manifest.at("hidden").get<int>();
    h.classes = manifest.at("classes").get<int>();

    m.kernels.weights = raster_tensor(read_raster(dir + "/kernels.aoff"),
                                      m.kernels.kernel_stride() * m.kernels.num_kernels);
    const std::vector<double> bn =
        raster_tensor(read_raster(dir + "/bn.aoff"), static_cast<size_t>(4) * h.channels);
    h.bn_gamma.assign(bn.begin(), bn.begin() + h.channels);
    h.bn_beta.assign(bn.begin() + h.channels, bn.begin() + 2 * h.channels);
    h.bn_run_mean.assign(bn.begin() + 2 * h.channels, bn.begin() + 3 * h.channels);
    h.bn_run_var.assign(bn.begin() + 3 * h.channels, bn.end());
    h.fc1_w = raster_tensor(read_raster(dir + "/fc1_w.aoff"),
                            static_cast<size_t>(h.hidden) * h.feature_dim());
    h.fc1_b = raster_tensor(read_raster(dir + "/fc1_b.aoff"), h.hidden);
    h.fc2_w = raster_tensor(read_raster(dir + "/fc2_w.aoff"),
                            static_cast<size_t>(h.classes) * h.hidden);
    h.fc2_b = raster_tensor(read_raster(dir + "/fc2_b.aoff"), h.classes);
    m.head = std::move(h);

    if (meta) {
        meta->seed = manifest.value("seed", 0ull);
        meta->epoch = manifest.value("epoch", -1);
        meta->val_accuracy = manifest.value("val_accuracy", 0.0);
        meta->dataset = manifest.value("dataset", std::string());
    }
    return m;
}

}  // namespace aoff
