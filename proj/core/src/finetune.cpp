#include "aoff/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "aoff/field_ops.hpp"
#include "aoff/parallel.hpp"
#include "gemm.hpp"

namespace aoff {

namespace {

std::vector<RealImage> conv_maps(const Model& model, const LabeledImages& set, size_t index,
                                 const ForwardSpec& spec, uint64_t frame_seed) {
    if (spec.mode == ForwardSpec::Mode::physical) {
        if (!spec.conv)
            throw std::invalid_argument("collect_pairs: physical spec needs a PhysicalConv");
        return spec.conv->forward(set, index, frame_seed);
    }
    const int N = model.preset.kernel_size;
    std::vector<RealImage> channels;
    channels.reserve(set.channels);
    for (int c = 0; c < set.channels; ++c)
        channels.push_back(zero_pad_center(set.image(index, c), N, N));
    return fourier_conv_forward(channels, model.kernels);
}

}  // namespace

FeaturePairSet collect_pairs(const Model& model, const LabeledImages& train_split, size_t n,
                             const ForwardSpec& hardware, const ForwardSpec& simulation,
                             uint64_t seed) {
    if (n > train_split.count())
        throw std::invalid_argument("collect_pairs: " + std::to_string(n) +
                                    " samples requested from a split of " +
                                    std::to_string(train_split.count()));
    std::vector<size_t> idx(train_split.count());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);

    FeaturePairSet pairs;
    pairs.feature_dim = model.head.feature_dim();
    pairs.hidden_dim = model.head.hidden;
    pairs.hw_features.assign(n * static_cast<size_t>(pairs.feature_dim), 0.0);
    pairs.sim_targets.assign(n * static_cast<size_t>(pairs.hidden_dim), 0.0);
    pairs.labels.assign(n, 0);

    parallel_for(0, n, [&](size_t i) {
        const size_t s = idx[i];
        const std::vector<RealImage> hw_maps = conv_maps(model, train_split, s, hardware, seed + s);
        const std::vector<double> hw_feat = head_features(model.head, hw_maps);
        std::copy(hw_feat.begin(), hw_feat.end(),
                  pairs.hw_features.begin() + i * pairs.feature_dim);

        const std::vector<RealImage> sim_maps =
            conv_maps(model, train_split, s, simulation, seed + s);
        const std::vector<double> sim_feat = head_features(model.head, sim_maps);
        const std::vector<double> target = fc1_pre_relu(model.head, sim_feat);
        std::copy(target.begin(), target.end(), pairs.sim_targets.begin() + i * pairs.hidden_dim);
        pairs.labels[i] = train_split.labels[s];
    });
    return pairs;
}

double pair_loss(const Model& model, const FeaturePairSet& pairs) {
    if (pairs.count() == 0) throw std::invalid_argument("pair_loss: empty pair set");
    const int F = pairs.feature_dim, H = pairs.hidden_dim;
    double total = 0.0;
    for (size_t i = 0; i < pairs.count(); ++i) {
        const double* h = pairs.hw_features.data() + i * F;
        const double* z = pairs.sim_targets.data() + i * H;
        for (int j = 0; j < H; ++j) {
            const double* w = model.head.fc1_w.data() + static_cast<size_t>(j) * F;
            double s = model.head.fc1_b[j];
            for (int f = 0; f < F; ++f) s += w[f] * h[f];
            const double d = s - z[j];
            total += d * d;
        }
    }
    return total / (static_cast<double>(pairs.count()) * H);
}

double finetune_fc1(Model& model, const FeaturePairSet& pairs, const FineTuneConfig& cfg) {
    if (pairs.count() == 0) throw std::invalid_argument("finetune_fc1: empty pair set");
    if (pairs.feature_dim != model.head.feature_dim() || pairs.hidden_dim != model.head.hidden)
        throw std::invalid_argument("finetune_fc1: pair dimensions do not match the head");
    const size_t n = pairs.count();
    const int F = pairs.feature_dim, H = pairs.hidden_dim;

    std::vector<double> mw(model.head.fc1_w.size(), 0.0), vw(model.head.fc1_w.size(), 0.0);
    std::vector<double> mb(H, 0.0), vb(H, 0.0);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    std::vector<double> pred, diff, gw, gb, hbuf;
    long t = 0;
    double last_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(cfg.seed + 0x9E3779B97F4A7C15ull * static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        long count = 0;
        for (size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
            const size_t B = std::min<size_t>(cfg.batch_size, n - b0);
            hbuf.assign(B * F, 0.0);
            for (size_t b = 0; b < B; ++b)
                std::copy_n(pairs.hw_features.data() + order[b0 + b] * F, F, hbuf.data() + b * F);
            pred.assign(B * H, 0.0);
            detail::gemm_nt(pred.data(), hbuf.data(), model.head.fc1_w.data(), B, H, F);
            diff.assign(B * H, 0.0);
            double loss = 0.0;
            for (size_t b = 0; b < B; ++b) {
                const double* z = pairs.sim_targets.data() + order[b0 + b] * H;
                for (int j = 0; j < H; ++j) {
                    const double d = pred[b * H + j] + model.head.fc1_b[j] - z[j];
                    diff[b * H + j] = 2.0 * d / static_cast<double>(B * H);
                    loss += d * d;
                }
            }
            loss /= static_cast<double>(B * H);
            loss_sum += loss;
            ++count;

            gw.assign(model.head.fc1_w.size(), 0.0);
            detail::gemm_tn(gw.data(), diff.data(), hbuf.data(), B, H, F);
            gb.assign(H, 0.0);
            for (size_t b = 0; b < B; ++b)
                for (int j = 0; j < H; ++j) gb[j] += diff[b * H + j];

            ++t;
            const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
            const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
            for (size_t i = 0; i < model.head.fc1_w.size(); ++i) {
                mw[i] = 0.9 * mw[i] + 0.1 * gw[i];
                vw[i] = 0.999 * vw[i] + 0.001 * gw[i] * gw[i];
                model.head.fc1_w[i] -=
                    cfg.learning_rate * (mw[i] / bc1) / (std::sqrt(vw[i] / bc2) + 1e-8);
            }
            for (int j = 0; j < H; ++j) {
                mb[j] = 0.9 * mb[j] + 0.1 * gb[j];
                vb[j] = 0.999 * vb[j] + 0.001 * gb[j] * gb[j];
                model.head.fc1_b[j] -=
                    cfg.learning_rate * (mb[j] / bc1) / (std::sqrt(vb[j] / bc2) + 1e-8);
            }
        }
        last_loss = loss_sum / std::max(1L, count);
    }
    return last_loss;
}

std::vector<SweepPoint> accuracy_vs_samples(const Model& model, const LabeledImages& train_split,
                                            const LabeledImages& eval_set,
                                            const std::vector<size_t>& sample_grid,
                                            const ForwardSpec& hardware,
                                            const ForwardSpec& simulation,
                                            const FineTuneConfig& cfg, uint64_t seed) {
    size_t max_n = 0;
    for (size_t n : sample_grid) max_n = std::max(max_n, n);
    FeaturePairSet all;
    if (max_n > 0) all = collect_pairs(model, train_split, max_n, hardware, simulation, seed);

    std::vector<SweepPoint> curve;
    for (size_t n : sample_grid) {
        Model tuned = model;
        if (n > 0) {
            FeaturePairSet slice;
            slice.feature_dim = all.feature_dim;
            slice.hidden_dim = all.hidden_dim;
            slice.hw_features.assign(all.hw_features.begin(),
                                     all.hw_features.begin() + n * all.feature_dim);
            slice.sim_targets.assign(all.sim_targets.begin(),
                                     all.sim_targets.begin() + n * all.hidden_dim);
            slice.labels.assign(all.labels.begin(), all.labels.begin() + n);
            finetune_fc1(tuned, slice, cfg);
        }
        double acc;
        if (hardware.mode == ForwardSpec::Mode::physical) {
            acc = evaluate_physical(tuned, eval_set, *hardware.conv).accuracy;
        } else {
            acc = evaluate(tuned, eval_set).accuracy;
        }
        curve.push_back({n, acc});
    }
    return curve;
}

}  // namespace aoff
