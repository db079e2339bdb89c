#include "aoff/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace aoff {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * L)^2, L = 1
constexpr double kC2 = 0.03 * 0.03;

const std::vector<double>& gaussian_window() {
    static const std::vector<double> w = [] {
        std::vector<double> g(kWindow * kWindow);
        const int h = kWindow / 2;
        double sum = 0.0;
        for (int r = 0; r < kWindow; ++r)
            for (int c = 0; c < kWindow; ++c) {
                const double d2 = (r - h) * (r - h) + (c - h) * (c - h);
                g[r * kWindow + c] = std::exp(-d2 / (2.0 * kSigma * kSigma));
                sum += g[r * kWindow + c];
            }
        for (double& v : g) v /= sum;
        return g;
    }();
    return w;
}

}  // namespace

double ssim(const RealImage& a, const RealImage& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("ssim: dimension mismatch");
    if (a.rows < kWindow || a.cols < kWindow)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const std::vector<double>& w = gaussian_window();
    double total = 0.0;
    long count = 0;
    for (int r = 0; r + kWindow <= a.rows; ++r) {
        for (int c = 0; c + kWindow <= a.cols; ++c) {
            double mu_a = 0.0, mu_b = 0.0;
            for (int i = 0; i < kWindow; ++i)
                for (int j = 0; j < kWindow; ++j) {
                    const double wi = w[i * kWindow + j];
                    mu_a += wi * a.at(r + i, c + j);
                    mu_b += wi * b.at(r + i, c + j);
                }
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (int i = 0; i < kWindow; ++i)
                for (int j = 0; j < kWindow; ++j) {
                    const double wi = w[i * kWindow + j];
                    const double da = a.at(r + i, c + j) - mu_a;
                    const double db = b.at(r + i, c + j) - mu_b;
                    var_a += wi * da * da;
                    var_b += wi * db * db;
                    cov += wi * da * db;
                }
            const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
            const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
            total += num / den;
            ++count;
        }
    }
    return total / count;
}

double rmse(const RealImage& a, const RealImage& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("rmse: dimension mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s / a.values.size());
}

double accuracy(const std::vector<int>& predictions, const std::vector<uint8_t>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("accuracy: length mismatch");
    if (predictions.empty()) throw std::invalid_argument("accuracy: empty inputs");
    long correct = 0;
    for (size_t i = 0; i < predictions.size(); ++i)
        if (predictions[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / predictions.size();
}

std::vector<std::vector<int>> confusion(const std::vector<int>& predictions,
                                        const std::vector<uint8_t>& labels, int num_classes) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("confusion: length mismatch");
    std::vector<std::vector<int>> m(num_classes, std::vector<int>(num_classes, 0));
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (labels[i] >= num_classes || predictions[i] < 0 || predictions[i] >= num_classes)
            throw std::invalid_argument("confusion: class index out of range");
        m[labels[i]][predictions[i]] += 1;
    }
    return m;
}

AgreementReport agreement(const RealImage& test, const RealImage& reference) {
    return {ssim(test, reference), rmse(test, reference)};
}

RealImage normalize_to_unit(const RealImage& img) {
    const double m = img.max_value();
    if (m <= 0.0) return img;
    RealImage out = img;
    for (double& v : out.values) v /= m;
    return out;
}

}  // namespace aoff
