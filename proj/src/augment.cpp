#include "radseq/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace radseq {

std::vector<double> rotate_patch(std::span<const double> pixels, std::size_t patch_size,
                                 int degrees, double fill_value) {
    const std::size_t p = patch_size;
    if (pixels.size() != p * p) {
        throw DimensionError("rotate_patch: pixel count " + std::to_string(pixels.size()) +
                             " does not match patch_size^2 = " + std::to_string(p * p));
    }
    degrees = ((degrees % 360) + 360) % 360;

    std::vector<double> out(p * p);
    const auto in = [&](std::size_t y, std::size_t x) { return pixels[y * p + x]; };

    // Right angles are exact index permutations, no interpolation.
    if (degrees == 0) {
        out.assign(pixels.begin(), pixels.end());
        return out;
    }
    if (degrees == 90) {
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                out[y * p + x] = in(x, p - 1 - y);
            }
        }
        return out;
    }
    if (degrees == 180) {
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                out[y * p + x] = in(p - 1 - y, p - 1 - x);
            }
        }
        return out;
    }
    if (degrees == 270) {
        for (std::size_t y = 0; y < p; ++y) {
            for (std::size_t x = 0; x < p; ++x) {
                out[y * p + x] = in(p - 1 - x, y);
            }
        }
        return out;
    }

    const double c = (static_cast<double>(p) - 1.0) / 2.0;
    const double theta = static_cast<double>(degrees) * M_PI / 180.0;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double limit = static_cast<double>(p) - 1.0;

    const auto sample = [&](long yi, long xi) {
        if (yi < 0 || xi < 0 || yi >= static_cast<long>(p) || xi >= static_cast<long>(p)) {
            return fill_value;
        }
        return in(static_cast<std::size_t>(yi), static_cast<std::size_t>(xi));
    };

    for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
            const double dx = static_cast<double>(x) - c;
            const double dy = static_cast<double>(y) - c;
            const double sx = c + dx * ct - dy * st;
            const double sy = c + dx * st + dy * ct;

            double v;
            if (sx < -1.0 || sy < -1.0 || sx > limit + 1.0 || sy > limit + 1.0) {
                v = fill_value;
            } else {
                const double fx0 = std::floor(sx);
                const double fy0 = std::floor(sy);
                const long x0 = static_cast<long>(fx0);
                const long y0 = static_cast<long>(fy0);
                const double ax = sx - fx0;
                const double ay = sy - fy0;
                const double top = (1.0 - ax) * sample(y0, x0) + ax * sample(y0, x0 + 1);
                const double bot = (1.0 - ax) * sample(y0 + 1, x0) + ax * sample(y0 + 1, x0 + 1);
                v = (1.0 - ay) * top + ay * bot;
            }
            out[y * p + x] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

PatchArchive augment_archive(const PatchArchive& archive, const AugmentPolicy& policy) {
    if (policy.malignant_step_deg <= 0 || policy.benign_step_deg <= 0 ||
        360 % policy.malignant_step_deg != 0 || 360 % policy.benign_step_deg != 0) {
        throw ArgumentError("augment policy steps must be positive divisors of 360");
    }
    if (!(policy.fill_value >= 0.0 && policy.fill_value <= 1.0)) {
        throw ArgumentError("augment fill_value must be in [0,1]");
    }
    for (const LesionPatch& p : archive.patches) {
        if (p.rotation_deg != 0) {
            throw ArgumentError("archive is already augmented: patch (" + p.patient_id +
                                "," + p.lesion_id + ") has rotation_deg=" +
                                std::to_string(p.rotation_deg));
        }
    }

    PatchArchive out;
    out.patch_size = archive.patch_size;
    out.provenance = archive.provenance;
    for (const LesionPatch& p : archive.patches) {
        const int step = p.label == Label::malignant ? policy.malignant_step_deg
                                                     : policy.benign_step_deg;
        for (int deg = 0; deg < 360; deg += step) {
            LesionPatch variant = p;
            variant.rotation_deg = static_cast<std::uint16_t>(deg);
            if (deg != 0) {
                variant.pixels =
                    rotate_patch(p.pixels, archive.patch_size, deg, policy.fill_value);
            }
            out.patches.push_back(std::move(variant));
        }
    }
    return out;
}

}  // namespace radseq
