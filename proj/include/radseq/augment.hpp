#pragma once

#include <span>
#include <vector>

#include "radseq/dataset.hpp"

namespace radseq {

enum class Interpolation { bilinear };

/// Class-balanced rotation enrichment: 360/45 = 8 variants per malignant
/// patch, 360/10 = 36 per benign, the 0-degree original counted as one of them.
struct AugmentPolicy {
    int malignant_step_deg = 45;
    int benign_step_deg = 10;
    Interpolation interpolation = Interpolation::bilinear;
    double fill_value = 0.0;
};

/// Rotation about the patch center ((P-1)/2, (P-1)/2), bilinear interpolation,
/// source samples outside the patch replaced by fill_value, output clamped to
/// [0,1]. Multiples of 90 degrees are exact index permutations.
std::vector<double> rotate_patch(std::span<const double> pixels, std::size_t patch_size,
                                 int degrees, double fill_value = 0.0);

/// Emits each patch's rotation variants per the policy, in ascending angle,
/// preserving archive order. Input must contain only rotation_deg=0 patches.
PatchArchive augment_archive(const PatchArchive& archive, const AugmentPolicy& policy);

}  // namespace radseq
