#include "aoff/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

using nlohmann::json;

namespace aoff {

RealImage LabeledImages::image(size_t i, int channel) const {
    RealImage out(rows, cols);
    const float* base = sample(i) + static_cast<size_t>(channel) * rows * cols;
    for (size_t p = 0; p < out.values.size(); ++p) out.values[p] = base[p];
    return out;
}

namespace {

std::vector<uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                                std::istreambuf_iterator<char>());
}

uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

uint32_t le32(const uint8_t* p) {
    return uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) | (uint32_t(p[3]) << 24);
}

void put_le32(std::string& out, uint32_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char((v >> 8) & 0xff));
    out.push_back(char((v >> 16) & 0xff));
    out.push_back(char((v >> 24) & 0xff));
}

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

LabeledImages load_mnist(const std::string& dir, bool train) {
    const std::string img_path =
        dir + (train ? "/train-images-idx3-ubyte" : "/t10k-images-idx3-ubyte");
    const std::string lbl_path =
        dir + (train ? "/train-labels-idx1-ubyte" : "/t10k-labels-idx1-ubyte");

    const std::vector<uint8_t> img = read_bytes(img_path);
    if (img.size() < 16) throw ParseError("idx images: truncated header in " + img_path);
    if (be32(img.data()) != kIdxImagesMagic)
        throw ParseError("idx images: bad magic in " + img_path);
    const uint32_t n = be32(img.data() + 4);
    const uint32_t rows = be32(img.data() + 8);
    const uint32_t cols = be32(img.data() + 12);
    if (rows == 0 || cols == 0) throw ParseError("idx images: zero dimension in " + img_path);
    const size_t expect = 16 + static_cast<size_t>(n) * rows * cols;
    if (img.size() != expect)
        throw ParseError("idx images: truncated payload (" + std::to_string(img.size()) +
                         " bytes, expected " + std::to_string(expect) + ") in " + img_path);

    const std::vector<uint8_t> lbl = read_bytes(lbl_path);
    if (lbl.size() < 8) throw ParseError("idx labels: truncated header in " + lbl_path);
    if (be32(lbl.data()) != kIdxLabelsMagic)
        throw ParseError("idx labels: bad magic in " + lbl_path);
    const uint32_t nl = be32(lbl.data() + 4);
    if (lbl.size() != 8 + static_cast<size_t>(nl))
        throw ParseError("idx labels: truncated payload in " + lbl_path);
    if (nl != n)
        throw ParseError("idx: image count " + std::to_string(n) + " does not match label count " +
                         std::to_string(nl));

    LabeledImages set;
    set.rows = static_cast<int>(rows);
    set.cols = static_cast<int>(cols);
    set.channels = 1;
    set.pixels.resize(static_cast<size_t>(n) * rows * cols);
    set.labels.assign(lbl.begin() + 8, lbl.end());
    for (size_t i = 0; i < set.pixels.size(); ++i)
        set.pixels[i] = static_cast<float>(img[16 + i]) / 255.0f;
    return set;
}

LabeledImages load_cifar10(const std::string& dir, bool train) {
    constexpr size_t kRecord = 3073;  // 1 label byte + 3 x 1024 channel planes
    std::vector<std::string> files;
    if (train) {
        for (int b = 1; b <= 5; ++b) files.push_back(dir + "/data_batch_" + std::to_string(b) + ".bin");
    } else {
        files.push_back(dir + "/test_batch.bin");
    }
    LabeledImages set;
    set.rows = 32;
    set.cols = 32;
    set.channels = 3;
    for (const std::string& path : files) {
        const std::vector<uint8_t> raw = read_bytes(path);
        if (raw.empty() || raw.size() % kRecord != 0)
            throw ParseError("cifar10: file length " + std::to_string(raw.size()) +
                             " is not a multiple of 3073 in " + path);
        const size_t n = raw.size() / kRecord;
        for (size_t i = 0; i < n; ++i) {
            const uint8_t* rec = raw.data() + i * kRecord;
            if (rec[0] > 9)
                throw ParseError("cifar10: label " + std::to_string(int(rec[0])) +
                                 " out of range in " + path);
            set.labels.push_back(rec[0]);
            for (size_t p = 0; p < kRecord - 1; ++p)
                set.pixels.push_back(static_cast<float>(rec[1 + p]) / 255.0f);
        }
    }
    return set;
}

namespace {

LabeledImages gather(const LabeledImages& set, const std::vector<size_t>& idx) {
    LabeledImages out;
    out.rows = set.rows;
    out.cols = set.cols;
    out.channels = set.channels;
    const size_t stride = set.sample_stride();
    out.pixels.resize(idx.size() * stride);
    out.labels.resize(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        std::memcpy(out.pixels.data() + i * stride, set.sample(idx[i]), stride * sizeof(float));
        out.labels[i] = set.labels[idx[i]];
    }
    return out;
}

std::vector<size_t> seeded_permutation(size_t n, uint64_t seed) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

}  // namespace

std::pair<LabeledImages, LabeledImages> split_train_val(const LabeledImages& set,
                                                        size_t val_count, uint64_t seed) {
    if (val_count > set.count())
        throw std::invalid_argument("split_train_val: validation count exceeds set size");
    std::vector<size_t> idx = seeded_permutation(set.count(), seed);
    std::vector<size_t> tr(idx.begin(), idx.end() - val_count);
    std::vector<size_t> va(idx.end() - val_count, idx.end());
    return {gather(set, tr), gather(set, va)};
}

LabeledImages take_subset(const LabeledImages& set, size_t count, uint64_t seed) {
    if (count > set.count())
        throw std::invalid_argument("take_subset: requested more samples than available");
    std::vector<size_t> idx = seeded_permutation(set.count(), seed);
    idx.resize(count);
    return gather(set, idx);
}

// ---------------------------------------------------------------------------
// Raster container
// ---------------------------------------------------------------------------

namespace {
constexpr char kRasterMagic[4] = {'A', 'O', 'F', 'F'};
constexpr uint32_t kRasterVersion = 1;
}  // namespace

void write_raster(const std::string& path, const RasterFile& raster) {
    if (raster.payload.size() !=
        static_cast<size_t>(raster.rows) * raster.cols * raster.channels)
        throw std::invalid_argument("write_raster: payload length mismatch");
    std::string out;
    out.reserve(20 + raster.payload.size() * 4);
    out.append(kRasterMagic, 4);
    put_le32(out, kRasterVersion);
    put_le32(out, raster.rows);
    put_le32(out, raster.cols);
    put_le32(out, raster.channels);
    for (float f : raster.payload) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_le32(out, bits);
    }
    write_text_file(path, out);
}

RasterFile read_raster(const std::string& path) {
    const std::vector<uint8_t> raw = read_bytes(path);
    if (raw.size() < 20) throw ParseError("raster: truncated header in " + path);
    if (std::memcmp(raw.data(), kRasterMagic, 4) != 0)
        throw ParseError("raster: bad magic in " + path);
    const uint32_t version = le32(raw.data() + 4);
    if (version != kRasterVersion)
        throw ParseError("raster: unsupported version " + std::to_string(version) + " in " + path);
    RasterFile r;
    r.rows = le32(raw.data() + 8);
    r.cols = le32(raw.data() + 12);
    r.channels = le32(raw.data() + 16);
    const size_t n = static_cast<size_t>(r.rows) * r.cols * r.channels;
    if (raw.size() != 20 + n * 4)
        throw ParseError("raster: payload length mismatch (" + std::to_string(raw.size() - 20) +
                         " bytes for " + std::to_string(n) + " floats) in " + path);
    r.payload.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const uint32_t bits = le32(raw.data() + 20 + i * 4);
        std::memcpy(&r.payload[i], &bits, 4);
    }
    return r;
}

RasterFile to_raster(const RealImage& img) {
    RasterFile r;
    r.rows = static_cast<uint32_t>(img.rows);
    r.cols = static_cast<uint32_t>(img.cols);
    r.channels = 1;
    r.payload.assign(img.values.begin(), img.values.end());
    return r;
}

RealImage raster_channel(const RasterFile& raster, int channel) {
    if (channel < 0 || static_cast<uint32_t>(channel) >= raster.channels)
        throw std::invalid_argument("raster_channel: channel out of range");
    RealImage img(static_cast<int>(raster.rows), static_cast<int>(raster.cols));
    const size_t plane = static_cast<size_t>(raster.rows) * raster.cols;
    for (size_t i = 0; i < plane; ++i) img.values[i] = raster.payload[channel * plane + i];
    return img;
}

void write_pgm(const std::string& path, const RealImage& img) {
    std::string out = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    out.reserve(out.size() + img.values.size());
    for (double v : img.values) {
        const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        out.push_back(static_cast<char>(q));
    }
    write_text_file(path, out);
}

RealImage read_pgm(const std::string& path) {
    const std::vector<uint8_t> raw = read_bytes(path);
    std::string header(raw.begin(), raw.begin() + std::min<size_t>(raw.size(), 64));
    std::istringstream hs(header);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    hs >> magic >> w >> h >> maxval;
    if (magic != "P5" || w < 1 || h < 1) throw ParseError("pgm: bad header in " + path);
    if (maxval != 255) throw ParseError("pgm: unsupported maxval in " + path);
    const size_t offset = static_cast<size_t>(hs.tellg()) + 1;  // one whitespace after maxval
    if (raw.size() < offset + static_cast<size_t>(w) * h)
        throw ParseError("pgm: truncated payload in " + path);
    RealImage img(h, w);
    for (size_t i = 0; i < img.values.size(); ++i) img.values[i] = raw[offset + i] / 255.0;
    return img;
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, _] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* a) { return key == a; }) == allowed.end())
            throw ValidationError("config: unknown key '" + (path.empty() ? key : path + "." + key) +
                                  "'");
    }
}

double num(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ValidationError(std::string("config: ") + key + " must be a number");
    return obj[key].get<double>();
}

int integer(const json& obj, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    return obj[key].get<int>();
}

void parse_dmd(const json& obj, const std::string& path, DmdSpec& d) {
    check_keys(obj, path,
               {"rows", "cols", "pixel_pitch", "mirror_size", "hole_diameter", "tilt_angle",
                "inplane_rotation", "bit_depth", "contrast_ratio", "refresh_rate",
                "subpixel_factor"});
    d.rows = integer(obj, "rows", d.rows);
    d.cols = integer(obj, "cols", d.cols);
    d.pixel_pitch = num(obj, "pixel_pitch", d.pixel_pitch);
    d.mirror_size = num(obj, "mirror_size", d.mirror_size);
    d.hole_diameter = num(obj, "hole_diameter", d.hole_diameter);
    d.tilt_angle = num(obj, "tilt_angle", d.tilt_angle);
    d.inplane_rotation = num(obj, "inplane_rotation", d.inplane_rotation);
    d.bit_depth = integer(obj, "bit_depth", d.bit_depth);
    d.contrast_ratio = num(obj, "contrast_ratio", d.contrast_ratio);
    d.refresh_rate = num(obj, "refresh_rate", d.refresh_rate);
    d.subpixel_factor = integer(obj, "subpixel_factor", d.subpixel_factor);
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }
}

void parse_lens(const json& obj, const std::string& path, LensSpec& l) {
    check_keys(obj, path, {"focal_length", "pupil_radius", "seidel"});
    l.focal_length = num(obj, "focal_length", l.focal_length);
    l.pupil_radius = num(obj, "pupil_radius", l.pupil_radius);
    if (obj.contains("seidel")) {
        const json& s = obj["seidel"];
        check_keys(s, path + ".seidel",
                   {"defocus", "spherical", "coma", "astigmatism", "field_curvature", "distortion"});
        l.seidel.defocus = num(s, "defocus", l.seidel.defocus);
        l.seidel.spherical = num(s, "spherical", l.seidel.spherical);
        l.seidel.coma = num(s, "coma", l.seidel.coma);
        l.seidel.astigmatism = num(s, "astigmatism", l.seidel.astigmatism);
        l.seidel.field_curvature = num(s, "field_curvature", l.seidel.field_curvature);
        l.seidel.distortion = num(s, "distortion", l.seidel.distortion);
    }
    try {
        l.validate();
    } catch (const std::invalid_argument& e) {
        throw ValidationError("config: " + path + ": " + e.what());
    }
}

}  // namespace

SystemConfig system_config_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: invalid JSON: ") + e.what());
    }
    SystemConfig cfg;  // bench defaults
    check_keys(root, "", {"wavelength", "dmd1", "dmd2", "lens1", "lens2", "camera", "perturbations"});
    cfg.wavelength = num(root, "wavelength", cfg.wavelength);
    if (cfg.wavelength <= 0.0) throw ValidationError("config: wavelength must be > 0");
    if (root.contains("dmd1")) parse_dmd(root["dmd1"], "dmd1", cfg.dmd1);
    if (root.contains("dmd2")) parse_dmd(root["dmd2"], "dmd2", cfg.dmd2);
    if (root.contains("lens1")) parse_lens(root["lens1"], "lens1", cfg.lens1);
    if (root.contains("lens2")) parse_lens(root["lens2"], "lens2", cfg.lens2);
    if (root.contains("camera")) {
        const json& c = root["camera"];
        check_keys(c, "camera",
                   {"rows", "cols", "bit_depth", "frame_rate", "saturation_level", "noise_sigma"});
        cfg.camera.rows = integer(c, "rows", cfg.camera.rows);
        cfg.camera.cols = integer(c, "cols", cfg.camera.cols);
        cfg.camera.bit_depth = integer(c, "bit_depth", cfg.camera.bit_depth);
        cfg.camera.frame_rate = num(c, "frame_rate", cfg.camera.frame_rate);
        cfg.camera.saturation_level = num(c, "saturation_level", cfg.camera.saturation_level);
        cfg.camera.noise_sigma = num(c, "noise_sigma", cfg.camera.noise_sigma);
        try {
            cfg.camera.validate();
        } catch (const std::invalid_argument& e) {
            throw ValidationError(std::string("config: camera: ") + e.what());
        }
    }
    if (root.contains("perturbations")) {
        const json& p = root["perturbations"];
        check_keys(p, "perturbations",
                   {"mask_shift_x", "mask_shift_y", "rotation_error", "illumination_amplitude",
                    "illumination_freq_x", "illumination_freq_y", "illumination_phase",
                    "camera_noise_sigma", "camera_saturation_scale", "noise_seed"});
        PerturbationSpec& q = cfg.perturbations;
        q.mask_shift_x = num(p, "mask_shift_x", q.mask_shift_x);
        q.mask_shift_y = num(p, "mask_shift_y", q.mask_shift_y);
        q.rotation_error = num(p, "rotation_error", q.rotation_error);
        q.illumination_amplitude = num(p, "illumination_amplitude", q.illumination_amplitude);
        q.illumination_freq_x = num(p, "illumination_freq_x", q.illumination_freq_x);
        q.illumination_freq_y = num(p, "illumination_freq_y", q.illumination_freq_y);
        q.illumination_phase = num(p, "illumination_phase", q.illumination_phase);
        if (p.contains("camera_noise_sigma") && !p["camera_noise_sigma"].is_null())
            q.camera_noise_sigma = p["camera_noise_sigma"].get<double>();
        if (p.contains("camera_saturation_scale") && !p["camera_saturation_scale"].is_null())
            q.camera_saturation_scale = p["camera_saturation_scale"].get<double>();
        if (p.contains("noise_seed")) q.noise_seed = p["noise_seed"].get<uint64_t>();
    }
    return cfg;
}

SystemConfig load_system_config(const std::string& path) {
    return system_config_from_json(read_text_file(path));
}

std::string system_config_to_json(const SystemConfig& cfg) {
    auto dmd = [](const DmdSpec& d) {
        return json{{"rows", d.rows},
                    {"cols", d.cols},
                    {"pixel_pitch", d.pixel_pitch},
                    {"mirror_size", d.mirror_size},
                    {"hole_diameter", d.hole_diameter},
                    {"tilt_angle", d.tilt_angle},
                    {"inplane_rotation", d.inplane_rotation},
                    {"bit_depth", d.bit_depth},
                    {"contrast_ratio",
                     std::isinf(d.contrast_ratio) ? 1e18 : d.contrast_ratio},
                    {"refresh_rate", d.refresh_rate},
                    {"subpixel_factor", d.subpixel_factor}};
    };
    auto lens = [](const LensSpec& l) {
        return json{{"focal_length", l.focal_length},
                    {"pupil_radius", l.pupil_radius},
                    {"seidel",
                     {{"defocus", l.seidel.defocus},
                      {"spherical", l.seidel.spherical},
                      {"coma", l.seidel.coma},
                      {"astigmatism", l.seidel.astigmatism},
                      {"field_curvature", l.seidel.field_curvature},
                      {"distortion", l.seidel.distortion}}}};
    };
    json root{{"wavelength", cfg.wavelength},
              {"dmd1", dmd(cfg.dmd1)},
              {"dmd2", dmd(cfg.dmd2)},
              {"lens1", lens(cfg.lens1)},
              {"lens2", lens(cfg.lens2)},
              {"camera",
               {{"rows", cfg.camera.rows},
                {"cols", cfg.camera.cols},
                {"bit_depth", cfg.camera.bit_depth},
                {"frame_rate", cfg.camera.frame_rate},
                {"saturation_level", cfg.camera.saturation_level},
                {"noise_sigma", cfg.camera.noise_sigma}}}};
    json pert{{"mask_shift_x", cfg.perturbations.mask_shift_x},
              {"mask_shift_y", cfg.perturbations.mask_shift_y},
              {"rotation_error", cfg.perturbations.rotation_error},
              {"illumination_amplitude", cfg.perturbations.illumination_amplitude},
              {"illumination_freq_x", cfg.perturbations.illumination_freq_x},
              {"illumination_freq_y", cfg.perturbations.illumination_freq_y},
              {"illumination_phase", cfg.perturbations.illumination_phase},
              {"noise_seed", cfg.perturbations.noise_seed}};
    if (cfg.perturbations.camera_noise_sigma)
        pert["camera_noise_sigma"] = *cfg.perturbations.camera_noise_sigma;
    if (cfg.perturbations.camera_saturation_scale)
        pert["camera_saturation_scale"] = *cfg.perturbations.camera_saturation_scale;
    root["perturbations"] = pert;
    return root.dump(2);
}

std::vector<TechnologyEntry> technology_table_from_json(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("devices: invalid JSON: ") + e.what());
    }
    if (!root.is_array()) throw ValidationError("devices: top level must be an array");
    std::vector<TechnologyEntry> out;
    for (const json& e : root) {
        check_keys(e, "devices[]", {"name", "pixel_count", "update_rate", "class", "placeholder"});
        TechnologyEntry t;
        t.name = e.at("name").get<std::string>();
        t.pixel_count = e.at("pixel_count").get<double>();
        t.update_rate = e.at("update_rate").get<double>();
        t.tech_class = e.value("class", std::string("unknown"));
        t.placeholder = e.value("placeholder", false);
        if (t.pixel_count <= 0 || t.update_rate <= 0)
            throw ValidationError("devices: " + t.name + ": positive values required");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<TechnologyEntry> load_technology_table(const std::string& path) {
    return technology_table_from_json(read_text_file(path));
}

std::vector<TechnologyEntry> default_technology_table() {
    // COTS MOEMS entries carry datasheet numbers; the emerging-device
    // rows are order-of-magnitude survey placeholders and flagged so.
    return {
        {"DLP9000 (1-bit)", 2073600, 20000, "MOEMS", false},
        {"DLP9000 (8-bit)", 2073600, 1031, "MOEMS", false},
        {"DLP660TE 4K (1-bit)", 8294400, 20000, "MOEMS", false},
        {"LCOS-SLM Gaea-2", 10059776, 60, "LCOS", false},
        {"Analog MOEMS array", 1.0e7, 1.0e7, "MOEMS", true},
        {"Graphene modulator array", 1.0e4, 1.0e9, "carrier-doping", true},
        {"TCO metasurface", 1.0e4, 1.0e8, "carrier-doping", true},
        {"PCM metasurface", 1.0e5, 1.0e6, "phase-change", true},
        {"Plasmonic phase array", 1.0e3, 1.0e9, "electro-mechanical", true},
    };
}

uint64_t fnv1a(const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t hash_file(const std::string& path) {
    const std::vector<uint8_t> raw = read_bytes(path);
    return fnv1a(raw.data(), raw.size());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace aoff
