#include "aoff/field_ops.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

#include "fft_backend.hpp"

namespace aoff {

namespace detail {
namespace {

std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

fftw_plan plan_for(int rows, int cols, int direction) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_tuple(rows, cols, direction);
    auto it = g_plans.find(key);
    if (it != g_plans.end()) return it->second;
    fftw_complex* scratch = fftw_alloc_complex(static_cast<size_t>(rows) * cols);
    fftw_plan p = fftw_plan_dft_2d(rows, cols, scratch, scratch, direction,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    g_plans.emplace(key, p);
    return p;
}

}  // namespace

void fft2_raw(int rows, int cols, int direction, const std::complex<double>* in,
              std::complex<double>* out) {
    fftw_plan p = plan_for(rows, cols, direction);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace detail

namespace {

ComplexField transform(const ComplexField& field, int direction, const char* name) {
    if (field.layout != FieldLayout::dc_at_corner)
        throw std::invalid_argument(std::string(name) + ": field must carry dc_at_corner layout");
    if (!field.finite())
        throw std::invalid_argument(std::string(name) + ": non-finite input");
    ComplexField out(field.rows, field.cols, FieldLayout::dc_at_corner);
    detail::fft2_raw(field.rows, field.cols, direction, field.values.data(), out.values.data());
    const double scale = 1.0 / std::sqrt(static_cast<double>(field.rows) * field.cols);
    for (cplx& v : out.values) v *= scale;
    return out;
}

}  // namespace

ComplexField dft2(const ComplexField& field) { return transform(field, detail::kForward, "dft2"); }

ComplexField idft2(const ComplexField& field) {
    return transform(field, detail::kBackward, "idft2");
}

ComplexField shift_layout(const ComplexField& field) {
    const int R = field.rows, C = field.cols;
    const int hr = R / 2, hc = C / 2;
    ComplexField out(R, C,
                     field.layout == FieldLayout::dc_at_corner ? FieldLayout::dc_at_center
                                                               : FieldLayout::dc_at_corner);
    if (field.layout == FieldLayout::dc_at_corner) {
        // fftshift: sample (0,0) lands on (hr, hc)
        for (int r = 0; r < R; ++r) {
            const int rr = (r + hr) % R;
            for (int c = 0; c < C; ++c) out.at(rr, (c + hc) % C) = field.at(r, c);
        }
    } else {
        // inverse: sample (hr, hc) returns to (0,0)
        for (int r = 0; r < R; ++r) {
            const int rr = (r + hr) % R;
            for (int c = 0; c < C; ++c) out.at(r, c) = field.at(rr, (c + hc) % C);
        }
    }
    return out;
}

RealImage zero_pad_center(const RealImage& img, int target_rows, int target_cols) {
    if (target_rows < img.rows || target_cols < img.cols)
        throw std::invalid_argument("zero_pad_center: target smaller than source");
    RealImage out(target_rows, target_cols, 0.0);
    const int r0 = (target_rows - img.rows) / 2;
    const int c0 = (target_cols - img.cols) / 2;
    for (int r = 0; r < img.rows; ++r)
        for (int c = 0; c < img.cols; ++c) out.at(r0 + r, c0 + c) = img.at(r, c);
    return out;
}

RealImage center_crop(const RealImage& img, int out_rows, int out_cols) {
    if (out_rows > img.rows || out_cols > img.cols)
        throw std::invalid_argument("center_crop: crop larger than source");
    RealImage out(out_rows, out_cols);
    const int r0 = (img.rows - out_rows) / 2;
    const int c0 = (img.cols - out_cols) / 2;
    for (int r = 0; r < out_rows; ++r)
        for (int c = 0; c < out_cols; ++c) out.at(r, c) = img.at(r0 + r, c0 + c);
    return out;
}

RealImage expand_pixels(const RealImage& img, int factor) {
    if (factor < 1) throw std::invalid_argument("expand_pixels: factor must be >= 1");
    if (factor == 1) return img;
    RealImage out(img.rows * factor, img.cols * factor);
    for (int r = 0; r < img.rows; ++r) {
        for (int c = 0; c < img.cols; ++c) {
            const double v = img.at(r, c);
            for (int dr = 0; dr < factor; ++dr) {
                double* row = &out.at(r * factor + dr, c * factor);
                for (int dc = 0; dc < factor; ++dc) row[dc] = v;
            }
        }
    }
    return out;
}

RealImage superpixel_reduce(const RealImage& img, int block) {
    if (block < 1) throw std::invalid_argument("superpixel_reduce: block must be >= 1");
    if (img.rows % block != 0 || img.cols % block != 0)
        throw std::invalid_argument("superpixel_reduce: dims not divisible by block");
    if (block == 1) return img;
    RealImage out(img.rows / block, img.cols / block);
    const double inv = 1.0 / (static_cast<double>(block) * block);
    for (int r = 0; r < out.rows; ++r) {
        for (int c = 0; c < out.cols; ++c) {
            double s = 0.0;
            for (int dr = 0; dr < block; ++dr) {
                const double* row =
                    img.values.data() + static_cast<size_t>(r * block + dr) * img.cols + c * block;
                for (int dc = 0; dc < block; ++dc) s += row[dc];
            }
            out.at(r, c) = s * inv;
        }
    }
    return out;
}

RealImage intensity(const ComplexField& field) {
    RealImage out(field.rows, field.cols);
    for (size_t i = 0; i < field.values.size(); ++i) out.values[i] = std::norm(field.values[i]);
    return out;
}

int tile_capacity(int canvas_rows, int canvas_cols, int tile_rows, int tile_cols) {
    return (canvas_rows / tile_rows) * (canvas_cols / tile_cols);
}

std::pair<RealImage, std::vector<TilePlacement>> tile_images(
    const std::vector<RealImage>& images, int canvas_rows, int canvas_cols) {
    if (images.empty()) throw std::invalid_argument("tile_images: no images");
    const int tr = images[0].rows, tc = images[0].cols;
    for (const RealImage& im : images)
        if (im.rows != tr || im.cols != tc)
            throw std::invalid_argument("tile_images: tiles must share dimensions");
    if (tr > canvas_rows || tc > canvas_cols)
        throw std::invalid_argument("tile_images: tile larger than canvas");
    const int per_row = canvas_cols / tc;
    const int capacity = tile_capacity(canvas_rows, canvas_cols, tr, tc);
    if (static_cast<int>(images.size()) > capacity)
        throw std::invalid_argument("tile_images: " + std::to_string(images.size()) +
                                    " tiles exceed grid capacity " + std::to_string(capacity) +
                                    " (" + std::to_string(canvas_rows / tr) + "x" +
                                    std::to_string(canvas_cols / tc) + " tiles of " +
                                    std::to_string(tr) + "x" + std::to_string(tc) + ")");
    RealImage canvas(canvas_rows, canvas_cols, 0.0);
    std::vector<TilePlacement> placements;
    placements.reserve(images.size());
    for (size_t i = 0; i < images.size(); ++i) {
        const int cell_r = static_cast<int>(i) / per_row;
        const int cell_c = static_cast<int>(i) % per_row;
        TilePlacement p{cell_r * tr, cell_c * tc, tr, tc};
        for (int r = 0; r < tr; ++r)
            for (int c = 0; c < tc; ++c) canvas.at(p.row + r, p.col + c) = images[i].at(r, c);
        placements.push_back(p);
    }
    return {std::move(canvas), std::move(placements)};
}

std::vector<RealImage> untile_images(const RealImage& canvas,
                                     const std::vector<TilePlacement>& placements) {
    std::vector<RealImage> out;
    out.reserve(placements.size());
    for (const TilePlacement& p : placements) {
        if (p.row + p.rows > canvas.rows || p.col + p.cols > canvas.cols)
            throw std::invalid_argument("untile_images: placement outside canvas");
        RealImage im(p.rows, p.cols);
        for (int r = 0; r < p.rows; ++r)
            for (int c = 0; c < p.cols; ++c) im.at(r, c) = canvas.at(p.row + r, p.col + c);
        out.push_back(std::move(im));
    }
    return out;
}

}  // namespace aoff
