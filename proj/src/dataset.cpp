#include "radseq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include "binio.hpp"
#include "radseq/util.hpp"

namespace radseq {

namespace {

constexpr char kArchiveMagic[8] = {'R', 'S', 'E', 'Q', 'A', 'R', 'C', '1'};
constexpr std::uint32_t kArchiveVersion = 1;

void validate_archive(const PatchArchive& archive) {
    if (archive.patches.empty()) {
        throw ArgumentError("archive is empty");
    }
    if (archive.patch_size == 0) {
        throw ArgumentError("archive patch_size is 0");
    }
    const std::size_t expect = static_cast<std::size_t>(archive.patch_size) * archive.patch_size;
    std::set<std::tuple<std::string, std::string, std::uint16_t, std::uint8_t>> keys;
    for (std::size_t i = 0; i < archive.patches.size(); ++i) {
        const LesionPatch& p = archive.patches[i];
        if (p.pixels.size() != expect) {
            throw ArgumentError("patch " + std::to_string(i) + " has " +
                                std::to_string(p.pixels.size()) + " pixels, expected " +
                                std::to_string(expect));
        }
        for (double v : p.pixels) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ArgumentError("patch " + std::to_string(i) +
                                    " has pixel outside [0,1]");
            }
        }
        if (!keys.emplace(p.patient_id, p.lesion_id, p.rotation_deg, p.annotator_id).second) {
            throw ArgumentError("duplicate patch key (" + p.patient_id + "," + p.lesion_id +
                                "," + std::to_string(p.rotation_deg) + "," +
                                std::to_string(p.annotator_id) + ")");
        }
    }
}

}  // namespace

std::string serialize_archive(const PatchArchive& archive) {
    validate_archive(archive);
    binio::Writer wr;
    wr.bytes(kArchiveMagic, sizeof(kArchiveMagic));
    wr.u32(kArchiveVersion);
    wr.u32(archive.patch_size);
    wr.u64(archive.patches.size());
    for (const LesionPatch& p : archive.patches) {
        wr.u16(static_cast<std::uint16_t>(p.patient_id.size()));
        wr.bytes(p.patient_id.data(), p.patient_id.size());
        wr.u16(static_cast<std::uint16_t>(p.lesion_id.size()));
        wr.bytes(p.lesion_id.data(), p.lesion_id.size());
        wr.u16(p.rotation_deg);
        wr.u8(p.annotator_id);
        wr.u8(static_cast<std::uint8_t>(p.label));
        for (double v : p.pixels) {
            wr.f64(v);
        }
    }
    wr.u64(archive.patches.size());
    return wr.take();
}

std::string manifest_csv(const PatchArchive& archive) {
    std::string out = "patient_id,lesion_id,rotation_deg,annotator_id,label\n";
    for (const LesionPatch& p : archive.patches) {
        out += p.patient_id;
        out += ',';
        out += p.lesion_id;
        out += ',';
        out += std::to_string(p.rotation_deg);
        out += ',';
        out += std::to_string(p.annotator_id);
        out += ',';
        out += std::to_string(static_cast<int>(p.label));
        out += '\n';
    }
    return out;
}

void save_archive(const PatchArchive& archive, const std::filesystem::path& path) {
    binio::atomic_write(path, serialize_archive(archive));
    std::filesystem::path manifest = path;
    manifest += ".manifest.csv";
    binio::atomic_write(manifest, manifest_csv(archive));
}

PatchArchive load_archive(const std::filesystem::path& path) {
    const std::string blob = binio::read_file(path);
    binio::Reader rd(blob, "archive " + path.string());

    if (blob.size() < sizeof(kArchiveMagic) ||
        std::memcmp(blob.data(), kArchiveMagic, sizeof(kArchiveMagic)) != 0) {
        rd.fail_at("bad magic", 0);
    }
    rd.str(sizeof(kArchiveMagic));
    const std::uint64_t version_at = rd.offset();
    const std::uint32_t version = rd.u32();
    if (version != kArchiveVersion) {
        rd.fail_at("unsupported version " + std::to_string(version), version_at);
    }

    PatchArchive archive;
    archive.patch_size = rd.u32();
    if (archive.patch_size == 0) {
        rd.fail_at("patch_size is 0", rd.offset() - 4);
    }
    const std::uint64_t count_at = rd.offset();
    const std::uint64_t count = rd.u64();
    if (count == 0) {
        rd.fail_at("archive is empty", count_at);
    }

    const std::size_t n_pixels =
        static_cast<std::size_t>(archive.patch_size) * archive.patch_size;
    std::set<std::tuple<std::string, std::string, std::uint16_t, std::uint8_t>> keys;
    archive.patches.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t patch_at = rd.offset();
        LesionPatch p;
        p.patient_id = rd.str(rd.u16());
        p.lesion_id = rd.str(rd.u16());
        p.rotation_deg = rd.u16();
        p.annotator_id = rd.u8();
        const std::uint8_t label = rd.u8();
        if (label > 1) {
            rd.fail_at("patch " + std::to_string(i) + " has label " + std::to_string(label),
                       rd.offset() - 1);
        }
        p.label = static_cast<Label>(label);
        p.pixels.resize(n_pixels);
        for (std::size_t k = 0; k < n_pixels; ++k) {
            const std::uint64_t pixel_at = rd.offset();
            p.pixels[k] = rd.f64();
            if (!(p.pixels[k] >= 0.0 && p.pixels[k] <= 1.0)) {
                rd.fail_at("patch " + std::to_string(i) + " pixel outside [0,1]", pixel_at);
            }
        }
        if (!keys.emplace(p.patient_id, p.lesion_id, p.rotation_deg, p.annotator_id).second) {
            rd.fail_at("duplicate patch key (" + p.patient_id + "," + p.lesion_id + "," +
                           std::to_string(p.rotation_deg) + "," +
                           std::to_string(p.annotator_id) + ")",
                       patch_at);
        }
        archive.patches.push_back(std::move(p));
    }

    const std::uint64_t sentinel_at = rd.offset();
    const std::uint64_t sentinel = rd.u64();
    if (sentinel != count) {
        rd.fail_at("trailing count " + std::to_string(sentinel) + " does not match header " +
                       std::to_string(count),
                   sentinel_at);
    }
    rd.require_end();
    return archive;
}

namespace {

// Calibrated against the logistic-on-raw-pixels baseline: the spiculation is
// angular structure a linear pixel model cannot lock onto once angles are
// random, while the spatially local spikes stay visible to a convolutional
// learner. The blob amplitude is solved from a shared target mass, so class
// mean intensities match by construction, and texture noise is multiplicative
// (zero where the blob fades), which keeps corners near zero and clamping
// class-symmetric.
struct GenKnobs {
    double center_jitter = 1.4;
    double sigma_min = 1.9, sigma_max = 2.6;
    double ecc_max = 1.6;               // benign ellipse axis ratio
    int spikes_min = 4, spikes_max = 7;
    double spike_width_min = 0.10, spike_width_max = 0.20;  // radians
    double spike_strength_min = 0.5, spike_strength_max = 0.95;
    double benign_texture = 0.05;     // smooth multiplicative field
    double malignant_texture = 0.14;  // heavier, pixel-level
    double global_noise = 0.004;
    double noise_clip_sigmas = 2.5;
    double target_blob_mean = 0.10;
    double mean_jitter = 0.04;
    // class-neutral parenchyma plateau; the quartic falloff keeps the patch
    // corners near zero so rotation fill stays consistent
    double background = 0.30;
    double background_radius_frac = 0.44;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Low-frequency field: a coarse 5x5 grid of clipped Gaussians, bilinearly
// upsampled. Smooth enough to survive rotation resampling.
std::vector<double> smooth_field(std::mt19937_64& rng, std::size_t p, double sd,
                                 double cap) {
    const std::size_t g = 5;
    std::vector<double> grid(g * g);
    std::normal_distribution<double> gauss(0.0, sd);
    for (double& v : grid) {
        v = std::clamp(gauss(rng), -cap, cap);
    }
    std::vector<double> field(p * p);
    const double step = static_cast<double>(g - 1) / static_cast<double>(p - 1);
    for (std::size_t y = 0; y < p; ++y) {
        const double gy = static_cast<double>(y) * step;
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), g - 2);
        const double ay = gy - static_cast<double>(y0);
        for (std::size_t x = 0; x < p; ++x) {
            const double gx = static_cast<double>(x) * step;
            const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), g - 2);
            const double ax = gx - static_cast<double>(x0);
            const double top = (1 - ax) * grid[y0 * g + x0] + ax * grid[y0 * g + x0 + 1];
            const double bot =
                (1 - ax) * grid[(y0 + 1) * g + x0] + ax * grid[(y0 + 1) * g + x0 + 1];
            field[y * p + x] = (1 - ay) * top + ay * bot;
        }
    }
    return field;
}

std::vector<double> render_lesion(std::mt19937_64& rng, std::size_t patch_size,
                                  Label label, double patient_sigma,
                                  const GenKnobs& k) {
    const double c = (static_cast<double>(patch_size) - 1.0) / 2.0;
    const double cx = c + uniform(rng, -k.center_jitter, k.center_jitter);
    const double cy = c + uniform(rng, -k.center_jitter, k.center_jitter);
    const double sigma = std::clamp(patient_sigma * uniform(rng, 0.9, 1.1), 1.8, 2.8);

    // Spike geometry is drawn for both classes. Malignant lesions render the
    // spikes; benign lesions only absorb the same area factor into a smooth
    // ellipse, so the classes share one radial mass distribution and differ
    // in angular structure alone.
    const int n_spikes =
        k.spikes_min + static_cast<int>(rng() % static_cast<std::uint64_t>(
                                                    k.spikes_max - k.spikes_min + 1));
    std::vector<double> spike_angle(static_cast<std::size_t>(n_spikes));
    std::vector<double> spike_width(static_cast<std::size_t>(n_spikes));
    std::vector<double> spike_strength(static_cast<std::size_t>(n_spikes));
    for (int s = 0; s < n_spikes; ++s) {
        spike_angle[static_cast<std::size_t>(s)] = uniform(rng, 0.0, 2.0 * M_PI);
        spike_width[static_cast<std::size_t>(s)] =
            uniform(rng, k.spike_width_min, k.spike_width_max);
        spike_strength[static_cast<std::size_t>(s)] =
            uniform(rng, k.spike_strength_min, k.spike_strength_max);
    }

    const auto spike_boost = [&](double theta) {
        double boost = 0.0;
        for (int s = 0; s < n_spikes; ++s) {
            double d = theta - spike_angle[static_cast<std::size_t>(s)];
            while (d > M_PI) d -= 2.0 * M_PI;
            while (d < -M_PI) d += 2.0 * M_PI;
            const double w = spike_width[static_cast<std::size_t>(s)];
            boost += spike_strength[static_cast<std::size_t>(s)] *
                     std::exp(-d * d / (2.0 * w * w));
        }
        return boost;
    };

    // area factor of the spiked profile relative to the circular base
    double area_factor = 0.0;
    for (int a = 0; a < 360; ++a) {
        const double b = 1.0 + spike_boost(static_cast<double>(a) * M_PI / 180.0);
        area_factor += b * b;
    }
    area_factor /= 360.0;

    const double ecc = uniform(rng, 1.0, k.ecc_max);
    const double phi = uniform(rng, 0.0, 2.0 * M_PI);
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    const double sigma_eff = sigma * std::sqrt(area_factor);
    const double sa = sigma_eff * std::sqrt(ecc);
    const double sb = sigma_eff / std::sqrt(ecc);

    const std::size_t n_px = patch_size * patch_size;
    std::vector<double> profile(n_px);
    double mass = 0.0;
    for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            double f;
            if (label == Label::benign) {
                const double u = dx * cphi + dy * sphi;
                const double v = -dx * sphi + dy * cphi;
                f = std::exp(-(u * u / (2.0 * sa * sa) + v * v / (2.0 * sb * sb)));
            } else {
                const double r2 = dx * dx + dy * dy;
                const double st = sigma * (1.0 + spike_boost(std::atan2(dy, dx)));
                f = std::exp(-r2 / (2.0 * st * st));
            }
            profile[y * patch_size + x] = f;
            mass += f;
        }
    }
    mass /= static_cast<double>(n_px);

    // Amplitude solved from a shared target mass; brightness carries no class
    // signal.
    const double target =
        k.target_blob_mean * (1.0 + uniform(rng, -k.mean_jitter, k.mean_jitter));
    const double amp = std::min(target / mass, 0.92);

    const double tex_sd = label == Label::malignant ? k.malignant_texture : k.benign_texture;
    const double tex_cap = k.noise_clip_sigmas * tex_sd;
    std::vector<double> texture;
    if (label == Label::benign) {
        texture = smooth_field(rng, patch_size, tex_sd, tex_cap);
    } else {
        texture.resize(n_px);
        std::normal_distribution<double> gauss(0.0, tex_sd);
        for (double& v : texture) {
            v = std::clamp(gauss(rng), -tex_cap, tex_cap);
        }
    }

    const double bg_level = k.background * (1.0 + uniform(rng, -0.05, 0.05));
    const double bg_radius = k.background_radius_frac * static_cast<double>(patch_size);
    const double global_cap = k.noise_clip_sigmas * k.global_noise;
    std::normal_distribution<double> global_gauss(0.0, k.global_noise);
    std::vector<double> pixels(n_px);
    for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
            const std::size_t i = y * patch_size + x;
            const double dx = (static_cast<double>(x) - c) / bg_radius;
            const double dy = (static_cast<double>(y) - c) / bg_radius;
            const double r4 = (dx * dx + dy * dy) * (dx * dx + dy * dy);
            const double bg = bg_level * std::exp(-r4);
            const double eps = std::clamp(global_gauss(rng), -global_cap, global_cap);
            pixels[i] = std::clamp(
                bg + (1.0 - bg) * amp * profile[i] * (1.0 + texture[i]) + eps, 0.0, 1.0);
        }
    }
    return pixels;
}

std::string padded_id(char prefix, std::size_t index) {
    std::string num = std::to_string(index + 1);
    while (num.size() < 4) {
        num.insert(num.begin(), '0');
    }
    return std::string(1, prefix) + num;
}

}  // namespace

PatchArchive synthesize_cohort(std::uint64_t seed,
                               std::size_t n_benign_patients,
                               std::size_t n_malignant_patients,
                               std::size_t lesions_per_patient,
                               std::size_t patch_size) {
    if (n_benign_patients < 1 || n_malignant_patients < 1 || lesions_per_patient < 1) {
        throw ArgumentError("synthesize_cohort: all counts must be >= 1");
    }
    if (patch_size < 10) {
        throw ArgumentError("synthesize_cohort: patch_size must be >= 10");
    }

    const GenKnobs knobs;
    PatchArchive archive;
    archive.patch_size = static_cast<std::uint32_t>(patch_size);
    archive.provenance = "synthetic cohort seed=" + std::to_string(seed) + " benign=" +
                         std::to_string(n_benign_patients) + " malignant=" +
                         std::to_string(n_malignant_patients) + " lesions=" +
                         std::to_string(lesions_per_patient);

    const auto emit_patient = [&](Label label, char prefix, std::uint64_t class_tag,
                                  std::size_t patient_index) {
        std::mt19937_64 patient_rng(derive_seed(seed, class_tag, patient_index));
        const double patient_sigma = uniform(patient_rng, knobs.sigma_min, knobs.sigma_max);
        const std::string pid = padded_id(prefix, patient_index);
        for (std::size_t l = 0; l < lesions_per_patient; ++l) {
            std::mt19937_64 lesion_rng(
                derive_seed(seed, class_tag + 2, patient_index * 65536 + l));
            LesionPatch p;
            p.patient_id = pid;
            p.lesion_id = "L" + std::to_string(l + 1);
            p.label = label;
            p.pixels = render_lesion(lesion_rng, patch_size, label, patient_sigma, knobs);
            archive.patches.push_back(std::move(p));
        }
    };

    for (std::size_t i = 0; i < n_benign_patients; ++i) {
        emit_patient(Label::benign, 'B', 0, i);
    }
    for (std::size_t i = 0; i < n_malignant_patients; ++i) {
        emit_patient(Label::malignant, 'M', 1, i);
    }
    return archive;
}

namespace {

// Patients of one class, in order of first appearance in the archive.
std::vector<std::string> class_patients(const PatchArchive& archive, Label wanted) {
    std::map<std::string, bool> has_malignant;
    std::vector<std::string> order;
    for (const LesionPatch& p : archive.patches) {
        auto [it, inserted] = has_malignant.emplace(p.patient_id, false);
        if (inserted) {
            order.push_back(p.patient_id);
        }
        if (p.label == Label::malignant) {
            it->second = true;
        }
    }
    std::vector<std::string> out;
    for (const std::string& pid : order) {
        const Label lab = has_malignant[pid] ? Label::malignant : Label::benign;
        if (lab == wanted) {
            out.push_back(pid);
        }
    }
    return out;
}

// Largest-remainder apportionment of `m` patients over the fractions; only
// partitions with a positive fraction receive remainder units.
std::vector<std::size_t> apportion(std::size_t m, const std::vector<double>& fractions) {
    const std::size_t p = fractions.size();
    std::vector<std::size_t> counts(p, 0);
    std::vector<double> remainder(p, 0.0);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < p; ++i) {
        const double exact = static_cast<double>(m) * fractions[i];
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = exact - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < p; ++i) {
        if (fractions[i] > 0.0) {
            order.push_back(i);
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainder[a] > remainder[b];
    });
    for (std::size_t j = 0; assigned < m; ++j) {
        counts[order[j % order.size()]] += 1;
        ++assigned;
    }
    return counts;
}

}  // namespace

std::vector<std::string> patient_ids(const PatchArchive& archive) {
    std::set<std::string> seen;
    std::vector<std::string> order;
    for (const LesionPatch& p : archive.patches) {
        if (seen.insert(p.patient_id).second) {
            order.push_back(p.patient_id);
        }
    }
    return order;
}

Label patient_label(const PatchArchive& archive, const std::string& patient_id) {
    bool found = false;
    for (const LesionPatch& p : archive.patches) {
        if (p.patient_id == patient_id) {
            found = true;
            if (p.label == Label::malignant) {
                return Label::malignant;
            }
        }
    }
    if (!found) {
        throw ArgumentError("unknown patient_id " + patient_id);
    }
    return Label::benign;
}

SplitSpec stratified_patient_split(const PatchArchive& archive,
                                   SplitFractions fractions,
                                   std::uint64_t seed) {
    const std::vector<double> fr = {fractions.train, fractions.val, fractions.test};
    double sum = 0.0;
    std::size_t positive = 0;
    for (double f : fr) {
        if (f < 0.0) {
            throw ArgumentError("split fractions must be non-negative");
        }
        if (f > 0.0) {
            ++positive;
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9 || positive == 0) {
        throw ArgumentError("split fractions must sum to 1");
    }

    SplitSpec spec;
    spec.partition_names = {"train", "val", "test"};
    spec.seed = seed;

    std::mt19937_64 rng(seed);
    for (Label cls : {Label::benign, Label::malignant}) {
        std::vector<std::string> patients = class_patients(archive, cls);
        if (patients.empty()) {
            continue;
        }
        if (patients.size() < positive) {
            throw SplitError("class " +
                             std::string(cls == Label::benign ? "benign" : "malignant") +
                             " has " + std::to_string(patients.size()) +
                             " patients but the split needs " + std::to_string(positive) +
                             " non-empty partitions");
        }
        seeded_shuffle(patients, rng);
        const std::vector<std::size_t> counts = apportion(patients.size(), fr);
        std::size_t at = 0;
        for (std::size_t part = 0; part < counts.size(); ++part) {
            for (std::size_t j = 0; j < counts[part]; ++j) {
                spec.assignment[patients[at++]] = static_cast<int>(part);
            }
        }
    }
    return spec;
}

SplitSpec kfold_patient_partition(const PatchArchive& archive, std::size_t k,
                                  std::uint64_t seed) {
    if (k < 2) {
        throw ArgumentError("kfold: k must be >= 2");
    }

    SplitSpec spec;
    spec.seed = seed;
    for (std::size_t f = 0; f < k; ++f) {
        spec.partition_names.push_back("fold" + std::to_string(f));
    }

    std::mt19937_64 rng(seed);
    for (Label cls : {Label::benign, Label::malignant}) {
        std::vector<std::string> patients = class_patients(archive, cls);
        if (patients.empty()) {
            continue;
        }
        if (patients.size() < k) {
            throw SplitError("class " +
                             std::string(cls == Label::benign ? "benign" : "malignant") +
                             " has " + std::to_string(patients.size()) +
                             " patients, fewer than k=" + std::to_string(k));
        }
        seeded_shuffle(patients, rng);
        for (std::size_t i = 0; i < patients.size(); ++i) {
            spec.assignment[patients[i]] = static_cast<int>(i % k);
        }
    }
    return spec;
}

PatchArchive select_partition(const PatchArchive& archive, const SplitSpec& split,
                              int partition) {
    PatchArchive out;
    out.patch_size = archive.patch_size;
    out.provenance = archive.provenance;
    for (const LesionPatch& p : archive.patches) {
        auto it = split.assignment.find(p.patient_id);
        if (it == split.assignment.end()) {
            throw ArgumentError("patient " + p.patient_id + " missing from split assignment");
        }
        if (it->second == partition) {
            out.patches.push_back(p);
        }
    }
    return out;
}

}  // namespace radseq
