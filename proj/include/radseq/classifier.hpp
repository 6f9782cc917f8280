#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "radseq/sequencer.hpp"

namespace radseq {

struct TreeParams {
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 5;
    double min_impurity_decrease = 0.0;
};

struct TreeNode {
    bool is_leaf = true;
    // split node: left branch takes feature <= threshold
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    // leaf node
    Label prediction = Label::benign;
    std::size_t count_benign = 0;
    std::size_t count_malignant = 0;

    bool operator==(const TreeNode&) const = default;
};

/// Binary CART tree over radiomic sequences; nodes[0] is the root.
struct DecisionTree {
    std::size_t n_features = 0;
    std::vector<TreeNode> nodes;

    bool operator==(const DecisionTree&) const = default;
};

struct TreePrediction {
    Label label = Label::benign;
    double malignant_score = 0.0;  // malignant fraction of the reached leaf
};

/// Greedy CART fit minimizing weighted Gini impurity. Candidate thresholds are
/// midpoints of consecutive distinct sorted values per feature; ties between
/// equal-gain splits go to the lowest feature index, then lowest threshold.
/// Leaf-majority ties predict malignant.
DecisionTree fit_tree(const std::vector<RadiomicSequence>& sequences,
                      const TreeParams& params);

TreePrediction predict_tree(const DecisionTree& tree, std::span<const double> features);

/// Gini impurity of a (benign, malignant) count pair and the impurity decrease
/// of a split; exposed so independent split searches score identically.
double gini_impurity(std::size_t count_benign, std::size_t count_malignant);
double split_gain(std::size_t parent_benign, std::size_t parent_malignant,
                  std::size_t left_benign, std::size_t left_malignant);

/// Textual node-list format, one node per line:
///   header  "RSEQTREE1 <n_nodes> <n_features>"
///   split   "<id> split <feature> <threshold> <left_id> <right_id>"
///   leaf    "<id> leaf <label> <count_benign> <count_malignant>"
std::string serialize_tree(const DecisionTree& tree);
void save_tree(const DecisionTree& tree, const std::filesystem::path& path);
DecisionTree load_tree(const std::filesystem::path& path);

}  // namespace radseq
