#include "radseq/classifier.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "binio.hpp"

namespace radseq {

double gini_impurity(std::size_t count_benign, std::size_t count_malignant) {
    const std::size_t n = count_benign + count_malignant;
    if (n == 0) {
        return 0.0;
    }
    const double nb = static_cast<double>(count_benign);
    const double nm = static_cast<double>(count_malignant);
    const double total = static_cast<double>(n);
    return 1.0 - (nb * nb + nm * nm) / (total * total);
}

double split_gain(std::size_t parent_benign, std::size_t parent_malignant,
                  std::size_t left_benign, std::size_t left_malignant) {
    const std::size_t n = parent_benign + parent_malignant;
    const std::size_t nl = left_benign + left_malignant;
    const std::size_t nr = n - nl;
    const std::size_t right_benign = parent_benign - left_benign;
    const std::size_t right_malignant = parent_malignant - left_malignant;
    const double wl = static_cast<double>(nl) / static_cast<double>(n);
    const double wr = static_cast<double>(nr) / static_cast<double>(n);
    return gini_impurity(parent_benign, parent_malignant) -
           (wl * gini_impurity(left_benign, left_malignant) +
            wr * gini_impurity(right_benign, right_malignant));
}

namespace {

struct BestSplit {
    bool found = false;
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
};

struct Builder {
    const std::vector<RadiomicSequence>& data;
    const TreeParams& params;
    std::vector<TreeNode> nodes;
    // scratch, reused across nodes
    std::vector<std::pair<double, Label>> column;

    BestSplit scan(const std::vector<std::size_t>& idx, std::size_t n_benign,
                   std::size_t n_malignant) {
        const std::size_t n = idx.size();
        const std::size_t d = data[idx[0]].features.size();
        BestSplit best;
        for (std::size_t f = 0; f < d; ++f) {
            column.clear();
            for (std::size_t i : idx) {
                column.emplace_back(data[i].features[f], data[i].label);
            }
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            std::size_t left_b = 0, left_m = 0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                (column[i].second == Label::benign ? left_b : left_m) += 1;
                if (column[i].first == column[i + 1].first) {
                    continue;
                }
                const std::size_t nl = i + 1;
                if (nl < params.min_samples_leaf || n - nl < params.min_samples_leaf) {
                    continue;
                }
                const double gain = split_gain(n_benign, n_malignant, left_b, left_m);
                if (!best.found || gain > best.gain) {
                    best.found = true;
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
                }
            }
        }
        return best;
    }

    std::int32_t build(std::vector<std::size_t> idx, std::size_t depth) {
        std::size_t n_benign = 0, n_malignant = 0;
        for (std::size_t i : idx) {
            (data[i].label == Label::benign ? n_benign : n_malignant) += 1;
        }

        const auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.is_leaf = true;
            leaf.count_benign = n_benign;
            leaf.count_malignant = n_malignant;
            // majority label; ties predict malignant
            leaf.prediction = n_malignant >= n_benign ? Label::malignant : Label::benign;
            const std::int32_t id = static_cast<std::int32_t>(nodes.size());
            nodes.push_back(leaf);
            return id;
        };

        if (n_benign == 0 || n_malignant == 0 || depth >= params.max_depth ||
            idx.size() < 2 * params.min_samples_leaf) {
            return make_leaf();
        }
        const BestSplit best = scan(idx, n_benign, n_malignant);
        if (!best.found || !(best.gain > params.min_impurity_decrease)) {
            return make_leaf();
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            (data[i].features[best.feature] <= best.threshold ? left_idx : right_idx)
                .push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        const std::int32_t id = static_cast<std::int32_t>(nodes.size());
        TreeNode node;
        node.is_leaf = false;
        node.feature = best.feature;
        node.threshold = best.threshold;
        nodes.push_back(node);
        const std::int32_t left = build(std::move(left_idx), depth + 1);
        const std::int32_t right = build(std::move(right_idx), depth + 1);
        nodes[static_cast<std::size_t>(id)].left = left;
        nodes[static_cast<std::size_t>(id)].right = right;
        return id;
    }
};

}  // namespace

DecisionTree fit_tree(const std::vector<RadiomicSequence>& sequences,
                      const TreeParams& params) {
    if (sequences.empty()) {
        throw ArgumentError("fit_tree: no training sequences");
    }
    if (params.max_depth < 1 || params.min_samples_leaf < 1) {
        throw ArgumentError("fit_tree: max_depth and min_samples_leaf must be >= 1");
    }
    const std::size_t d = sequences[0].features.size();
    if (d == 0) {
        throw ArgumentError("fit_tree: sequences have no features");
    }
    for (std::size_t i = 1; i < sequences.size(); ++i) {
        if (sequences[i].features.size() != d) {
            throw DimensionError("fit_tree: sequence " + std::to_string(i) + " has " +
                                 std::to_string(sequences[i].features.size()) +
                                 " features, expected " + std::to_string(d));
        }
    }

    DecisionTree tree;
    tree.n_features = d;
    Builder builder{sequences, params, {}, {}};
    std::vector<std::size_t> idx(sequences.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
    }
    builder.build(std::move(idx), 0);
    tree.nodes = std::move(builder.nodes);
    return tree;
}

TreePrediction predict_tree(const DecisionTree& tree, std::span<const double> features) {
    if (features.size() != tree.n_features) {
        throw DimensionError("predict_tree: sequence length " +
                             std::to_string(features.size()) +
                             " does not match training width " +
                             std::to_string(tree.n_features));
    }
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf) {
        node = features[node->feature] <= node->threshold
                   ? &tree.nodes[static_cast<std::size_t>(node->left)]
                   : &tree.nodes[static_cast<std::size_t>(node->right)];
    }
    TreePrediction p;
    p.label = node->prediction;
    const std::size_t total = node->count_benign + node->count_malignant;
    p.malignant_score =
        total == 0 ? 0.0 : static_cast<double>(node->count_malignant) / static_cast<double>(total);
    return p;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string serialize_tree(const DecisionTree& tree) {
    std::string out = "RSEQTREE1 " + std::to_string(tree.nodes.size()) + " " +
                      std::to_string(tree.n_features) + "\n";
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
        const TreeNode& n = tree.nodes[id];
        out += std::to_string(id);
        if (n.is_leaf) {
            out += " leaf " + std::to_string(static_cast<int>(n.prediction)) + " " +
                   std::to_string(n.count_benign) + " " + std::to_string(n.count_malignant);
        } else {
            out += " split " + std::to_string(n.feature) + " " + fmt_double(n.threshold) +
                   " " + std::to_string(n.left) + " " + std::to_string(n.right);
        }
        out += '\n';
    }
    return out;
}

void save_tree(const DecisionTree& tree, const std::filesystem::path& path) {
    binio::atomic_write(path, serialize_tree(tree));
}

DecisionTree load_tree(const std::filesystem::path& path) {
    const std::string blob = binio::read_file(path);
    std::istringstream in(blob);
    std::string line;
    std::uint64_t line_no = 0;

    const auto fail = [&](const std::string& msg) -> void {
        throw ParseError("tree " + path.string() + ": " + msg + " at line " +
                             std::to_string(line_no),
                         line_no);
    };

    ++line_no;
    if (!std::getline(in, line)) {
        fail("empty file");
    }
    std::istringstream header(line);
    std::string magic;
    std::size_t n_nodes = 0;
    DecisionTree tree;
    if (!(header >> magic >> n_nodes >> tree.n_features) || magic != "RSEQTREE1") {
        fail("bad header");
    }
    if (n_nodes == 0) {
        fail("tree has no nodes");
    }

    tree.nodes.resize(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
        ++line_no;
        if (!std::getline(in, line)) {
            fail("truncated: expected " + std::to_string(n_nodes) + " nodes");
        }
        std::istringstream ls(line);
        std::size_t id = 0;
        std::string kind;
        if (!(ls >> id >> kind) || id != i) {
            fail("malformed node line");
        }
        TreeNode& n = tree.nodes[i];
        if (kind == "leaf") {
            int label = 0;
            if (!(ls >> label >> n.count_benign >> n.count_malignant) ||
                (label != 0 && label != 1)) {
                fail("malformed leaf line");
            }
            n.is_leaf = true;
            n.prediction = static_cast<Label>(label);
        } else if (kind == "split") {
            if (!(ls >> n.feature >> n.threshold >> n.left >> n.right)) {
                fail("malformed split line");
            }
            n.is_leaf = false;
            if (n.feature >= tree.n_features) {
                fail("feature index " + std::to_string(n.feature) + " out of range");
            }
            // Children always follow their parent (preorder emit), which also
            // guarantees prediction walks terminate.
            if (n.left <= static_cast<std::int32_t>(i) ||
                n.right <= static_cast<std::int32_t>(i) ||
                static_cast<std::size_t>(n.left) >= n_nodes ||
                static_cast<std::size_t>(n.right) >= n_nodes) {
                fail("child id out of range");
            }
        } else {
            fail("unknown node kind '" + kind + "'");
        }
        std::string extra;
        if (ls >> extra) {
            fail("trailing tokens");
        }
    }
    ++line_no;
    if (std::getline(in, line) && !line.empty()) {
        fail("trailing content after node list");
    }
    return tree;
}

}  // namespace radseq
