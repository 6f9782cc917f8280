#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "radseq/augment.hpp"

using namespace radseq;

namespace {

std::vector<double> random_patch(std::mt19937_64& rng, std::size_t p) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> px(p * p);
    for (double& v : px) {
        v = dist(rng);
    }
    return px;
}

PatchArchive one_of_each(std::size_t patch_size = 12) {
    PatchArchive a;
    a.patch_size = static_cast<std::uint32_t>(patch_size);
    std::mt19937_64 rng(4);
    LesionPatch b;
    b.patient_id = "B0";
    b.lesion_id = "L0";
    b.label = Label::benign;
    b.pixels = random_patch(rng, patch_size);
    LesionPatch m;
    m.patient_id = "M0";
    m.lesion_id = "L0";
    m.label = Label::malignant;
    m.pixels = random_patch(rng, patch_size);
    a.patches = {b, m};
    return a;
}

}  // namespace

TEST_CASE("rotate_patch by 0 degrees is bit-identical") {
    std::mt19937_64 rng(1);
    const std::vector<double> px = random_patch(rng, 9);
    CHECK(rotate_patch(px, 9, 0) == px);
}

TEST_CASE("rotate_patch right angles are exact index permutations") {
    std::mt19937_64 rng(2);
    const std::size_t p = 7;
    const std::vector<double> px = random_patch(rng, p);

    const std::vector<double> r90 = rotate_patch(px, p, 90);
    const std::vector<double> r180 = rotate_patch(px, p, 180);
    const std::vector<double> r270 = rotate_patch(px, p, 270);
    for (std::size_t y = 0; y < p; ++y) {
        for (std::size_t x = 0; x < p; ++x) {
            CHECK(r90[y * p + x] == px[x * p + (p - 1 - y)]);
            CHECK(r180[y * p + x] == px[(p - 1 - y) * p + (p - 1 - x)]);
            CHECK(r270[y * p + x] == px[(p - 1 - x) * p + y]);
        }
    }

    // permutations: the multiset of values is unchanged
    std::vector<double> sorted_in = px, sorted_out = r90;
    std::sort(sorted_in.begin(), sorted_in.end());
    std::sort(sorted_out.begin(), sorted_out.end());
    CHECK(sorted_in == sorted_out);
}

TEST_CASE("four 90-degree rotations compose to the identity exactly") {
    std::mt19937_64 rng(3);
    const std::vector<double> px = random_patch(rng, 10);
    std::vector<double> cur = px;
    for (int i = 0; i < 4; ++i) {
        cur = rotate_patch(cur, 10, 90);
    }
    CHECK(cur == px);
}

TEST_CASE("45+45+270 composition returns near the original on smooth blobs") {
    const PatchArchive cohort = synthesize_cohort(6, 4, 1, 3, 18);
    std::size_t checked = 0;
    for (const LesionPatch& patch : cohort.patches) {
        if (patch.label != Label::benign) {
            continue;
        }
        std::vector<double> cur = rotate_patch(patch.pixels, 18, 45);
        cur = rotate_patch(cur, 18, 45);
        cur = rotate_patch(cur, 18, 270);
        double max_err = 0.0;
        for (std::size_t i = 0; i < cur.size(); ++i) {
            max_err = std::max(max_err, std::fabs(cur[i] - patch.pixels[i]));
        }
        CHECK(max_err < 0.08);
        ++checked;
    }
    CHECK(checked == 12);
}

TEST_CASE("rotate_patch keeps every output within [0,1]") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const std::vector<double> px = random_patch(rng, 11);
        const int deg = static_cast<int>(rng() % 360);
        for (double v : rotate_patch(px, 11, deg, 0.7)) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("rotate_patch fills uncovered corners with fill_value") {
    std::vector<double> px(9 * 9, 1.0);
    const std::vector<double> out = rotate_patch(px, 9, 45, 0.0);
    // corners rotate out of the source square, so they interpolate toward 0
    CHECK(out[0] < 1.0);
    const std::vector<double> filled = rotate_patch(px, 9, 45, 1.0);
    CHECK(filled[0] == 1.0);
}

TEST_CASE("augment_archive: one benign + one malignant gives 36 + 8 patches") {
    const PatchArchive a = one_of_each();
    const PatchArchive out = augment_archive(a, AugmentPolicy{});
    CHECK(out.patches.size() == 44);

    std::size_t benign = 0, malignant = 0;
    for (const LesionPatch& p : out.patches) {
        (p.label == Label::benign ? benign : malignant) += 1;
    }
    CHECK(benign == 36);
    CHECK(malignant == 8);
}

TEST_CASE("augment_archive: zero-degree variants equal their source exactly") {
    const PatchArchive a = one_of_each();
    const PatchArchive out = augment_archive(a, AugmentPolicy{});
    // order: source order, each followed by ascending angles
    CHECK(out.patches[0].rotation_deg == 0);
    CHECK(out.patches[0].pixels == a.patches[0].pixels);
    CHECK(out.patches[36].rotation_deg == 0);
    CHECK(out.patches[36].pixels == a.patches[1].pixels);

    int prev = -10;
    for (std::size_t i = 0; i < 36; ++i) {
        CHECK(static_cast<int>(out.patches[i].rotation_deg) == prev + 10);
        prev = out.patches[i].rotation_deg;
    }
}

TEST_CASE("augment_archive preserves lineage fields") {
    const PatchArchive a = one_of_each();
    const PatchArchive out = augment_archive(a, AugmentPolicy{});
    for (std::size_t i = 0; i < 36; ++i) {
        CHECK(out.patches[i].patient_id == "B0");
        CHECK(out.patches[i].lesion_id == "L0");
        CHECK(out.patches[i].annotator_id == 0);
        CHECK(out.patches[i].label == Label::benign);
    }
}

TEST_CASE("augment_archive size follows sum of 360/step per patch") {
    PatchArchive a = one_of_each();
    AugmentPolicy policy;
    policy.malignant_step_deg = 90;
    policy.benign_step_deg = 120;
    const PatchArchive out = augment_archive(a, policy);
    CHECK(out.patches.size() == 360 / 120 + 360 / 90);
}

TEST_CASE("augment_archive rejects pre-augmented input and bad policies") {
    PatchArchive a = one_of_each();
    const PatchArchive out = augment_archive(a, AugmentPolicy{});
    CHECK_THROWS_AS(augment_archive(out, AugmentPolicy{}), ArgumentError);

    AugmentPolicy bad;
    bad.benign_step_deg = 7;  // does not divide 360
    CHECK_THROWS_AS(augment_archive(a, bad), ArgumentError);
    bad = AugmentPolicy{};
    bad.malignant_step_deg = 0;
    CHECK_THROWS_AS(augment_archive(a, bad), ArgumentError);
    bad = AugmentPolicy{};
    bad.fill_value = 1.5;
    CHECK_THROWS_AS(augment_archive(a, bad), ArgumentError);
}

TEST_CASE("augmented outputs stay within [0,1]") {
    const PatchArchive cohort = synthesize_cohort(2, 2, 2, 2, 14);
    const PatchArchive out = augment_archive(cohort, AugmentPolicy{});
    for (const LesionPatch& p : out.patches) {
        for (double v : p.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}
