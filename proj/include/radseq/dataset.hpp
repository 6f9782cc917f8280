#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "radseq/errors.hpp"

namespace radseq {

enum class Label : std::uint8_t { benign = 0, malignant = 1 };

/// One labeled grayscale lesion patch with its patient/lesion lineage.
/// Pixels are patch_size x patch_size row-major intensities in [0,1].
struct LesionPatch {
    std::string patient_id;
    std::string lesion_id;
    std::uint16_t rotation_deg = 0;  // 0 for originals
    std::uint8_t annotator_id = 0;   // 0 when unknown
    Label label = Label::benign;
    std::vector<double> pixels;

    bool operator==(const LesionPatch&) const = default;
};

/// The on-disk dataset: an ordered list of patches sharing one patch size.
/// `provenance` is an in-memory note only; it is not part of the binary format.
struct PatchArchive {
    std::uint32_t patch_size = 0;
    std::vector<LesionPatch> patches;
    std::string provenance;
};

/// Patient-granular partition assignment. `assignment` maps every patient in
/// the source archive to an index into `partition_names`.
struct SplitSpec {
    std::vector<std::string> partition_names;
    std::map<std::string, int> assignment;
    std::uint64_t seed = 0;
};

struct SplitFractions {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

/// Binary archive format (little-endian):
///   magic "RSEQARC1", u32 version=1, u32 patch_size, u64 count,
///   per patch: u16 patient_id len + bytes, u16 lesion_id len + bytes,
///              u16 rotation_deg, u8 annotator_id, u8 label,
///              patch_size^2 float64 pixels row-major,
///   trailing u64 = count repeated (truncation sentinel).
/// A sidecar manifest CSV (`<path>.manifest.csv`) is emitted alongside.
void save_archive(const PatchArchive& archive, const std::filesystem::path& path);
PatchArchive load_archive(const std::filesystem::path& path);

/// The archive serialized to its binary format (the exact bytes save_archive
/// writes).
std::string serialize_archive(const PatchArchive& archive);

std::string manifest_csv(const PatchArchive& archive);

/// Deterministic synthetic cohort. Benign patches are smooth Gaussian-profile
/// blobs with mild noise; malignant patches carry angular spiculation and
/// heavier texture noise. Per-patch mean intensity is normalized so the
/// classes cannot be told apart by brightness alone.
PatchArchive synthesize_cohort(std::uint64_t seed,
                               std::size_t n_benign_patients,
                               std::size_t n_malignant_patients,
                               std::size_t lesions_per_patient,
                               std::size_t patch_size);

/// Patient-granular train/val/test split; per-class patient counts match the
/// fractions within one patient. A class with fewer patients than non-empty
/// partitions makes the split infeasible.
SplitSpec stratified_patient_split(const PatchArchive& archive,
                                   SplitFractions fractions,
                                   std::uint64_t seed);

/// Patient-granular k folds; per-class fold sizes differ by at most one.
SplitSpec kfold_patient_partition(const PatchArchive& archive, std::size_t k,
                                  std::uint64_t seed);

/// Patches whose patient is assigned to `partition`, in archive order.
PatchArchive select_partition(const PatchArchive& archive, const SplitSpec& split,
                              int partition);

/// Unique patient ids in order of first appearance.
std::vector<std::string> patient_ids(const PatchArchive& archive);

/// A patient counts as malignant if any of its lesions is malignant.
Label patient_label(const PatchArchive& archive, const std::string& patient_id);

}  // namespace radseq
