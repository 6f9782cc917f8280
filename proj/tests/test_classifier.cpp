#include <algorithm>
#include <fstream>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "radseq/classifier.hpp"

using namespace radseq;
using testutil::TempDir;

namespace {

RadiomicSequence seq(std::vector<double> features, Label label) {
    RadiomicSequence s;
    s.features = std::move(features);
    s.label = label;
    return s;
}

std::vector<RadiomicSequence> random_dataset(std::mt19937_64& rng, std::size_t n,
                                             std::size_t d) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<RadiomicSequence> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> f(d);
        for (double& v : f) {
            v = dist(rng);
        }
        out.push_back(seq(std::move(f), static_cast<Label>(rng() % 2)));
    }
    return out;
}

// Exhaustive best-split search, independent of fit_tree: every feature, every
// midpoint of consecutive distinct sorted values, scored by Gini decrease with
// the same tie-break (lowest feature, then lowest threshold).
struct OracleSplit {
    bool found = false;
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
};

double oracle_gini(std::size_t nb, std::size_t nm) {
    const std::size_t n = nb + nm;
    if (n == 0) {
        return 0.0;
    }
    const double b = static_cast<double>(nb), m = static_cast<double>(nm),
                 t = static_cast<double>(n);
    return 1.0 - (b * b + m * m) / (t * t);
}

OracleSplit oracle_best_split(const std::vector<RadiomicSequence>& data,
                              std::size_t min_samples_leaf) {
    const std::size_t n = data.size();
    const std::size_t d = data[0].features.size();
    std::size_t nb = 0, nm = 0;
    for (const auto& s : data) {
        (s.label == Label::benign ? nb : nm) += 1;
    }
    const double parent = oracle_gini(nb, nm);

    OracleSplit best;
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> values;
        values.reserve(n);
        for (const auto& s : data) {
            values.push_back(s.features[f]);
        }
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double threshold = values[i] + (values[i + 1] - values[i]) / 2.0;
            std::size_t lb = 0, lm = 0;
            for (const auto& s : data) {
                if (s.features[f] <= threshold) {
                    (s.label == Label::benign ? lb : lm) += 1;
                }
            }
            const std::size_t nl = lb + lm;
            if (nl < min_samples_leaf || n - nl < min_samples_leaf) {
                continue;
            }
            const double wl = static_cast<double>(nl) / static_cast<double>(n);
            const double wr = static_cast<double>(n - nl) / static_cast<double>(n);
            const double gain =
                parent - (wl * oracle_gini(lb, lm) + wr * oracle_gini(nb - lb, nm - lm));
            if (!best.found || gain > best.gain) {
                best = OracleSplit{true, gain, f, threshold};
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("pure input yields a single leaf predicting that class") {
    std::vector<RadiomicSequence> data = {seq({1.0, 2.0}, Label::benign),
                                          seq({3.0, 1.0}, Label::benign)};
    const DecisionTree t = fit_tree(data, TreeParams{});
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].is_leaf);
    CHECK(t.nodes[0].prediction == Label::benign);
    CHECK(t.nodes[0].count_benign == 2);
    CHECK(t.nodes[0].count_malignant == 0);
    CHECK(predict_tree(t, std::vector<double>{9.0, 9.0}).label == Label::benign);
    CHECK(predict_tree(t, std::vector<double>{9.0, 9.0}).malignant_score == 0.0);
}

TEST_CASE("hand-computed 1-D case splits at 2.5 with Gini decrease 0.5") {
    std::vector<RadiomicSequence> data = {
        seq({1.0}, Label::benign), seq({2.0}, Label::benign),
        seq({3.0}, Label::malignant), seq({4.0}, Label::malignant)};
    TreeParams params;
    params.min_samples_leaf = 1;
    const DecisionTree t = fit_tree(data, params);
    REQUIRE(!t.nodes[0].is_leaf);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == 2.5);
    // hand check over all 3 candidate thresholds: 1.5 -> 1/6, 2.5 -> 1/2, 3.5 -> 1/6
    CHECK(split_gain(2, 2, 2, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(split_gain(2, 2, 1, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    const TreeNode& left = t.nodes[static_cast<std::size_t>(t.nodes[0].left)];
    const TreeNode& right = t.nodes[static_cast<std::size_t>(t.nodes[0].right)];
    CHECK(left.prediction == Label::benign);
    CHECK(right.prediction == Label::malignant);
}

TEST_CASE("depth-1 fit equals the exhaustive best-split oracle on random data") {
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        std::mt19937_64 rng(600 + trial);
        const auto data = random_dataset(rng, 50, 500);
        TreeParams params;
        params.max_depth = 1;
        params.min_samples_leaf = 1;
        const DecisionTree t = fit_tree(data, params);
        const OracleSplit want = oracle_best_split(data, params.min_samples_leaf);
        REQUIRE(want.found);
        REQUIRE(!t.nodes[0].is_leaf);
        CHECK(t.nodes[0].feature == want.feature);
        CHECK(t.nodes[0].threshold == want.threshold);
    }
}

TEST_CASE("unlimited depth with distinct points memorizes the training set") {
    std::mt19937_64 rng(61);
    auto data = random_dataset(rng, 40, 8);
    TreeParams params;
    params.max_depth = 64;
    params.min_samples_leaf = 1;
    const DecisionTree t = fit_tree(data, params);
    for (const auto& s : data) {
        CHECK(predict_tree(t, s.features).label == s.label);
    }
}

TEST_CASE("fit respects max_depth and min_samples_leaf") {
    std::mt19937_64 rng(62);
    const auto data = random_dataset(rng, 200, 6);
    TreeParams params;
    params.max_depth = 3;
    params.min_samples_leaf = 10;
    const DecisionTree t = fit_tree(data, params);

    // walk depths and leaf sizes
    struct Item {
        std::int32_t id;
        std::size_t depth;
    };
    std::vector<Item> stack = {{0, 0}};
    while (!stack.empty()) {
        const Item it = stack.back();
        stack.pop_back();
        const TreeNode& n = t.nodes[static_cast<std::size_t>(it.id)];
        CHECK(it.depth <= params.max_depth);
        if (n.is_leaf) {
            CHECK(n.count_benign + n.count_malignant >= params.min_samples_leaf);
        } else {
            stack.push_back({n.left, it.depth + 1});
            stack.push_back({n.right, it.depth + 1});
        }
    }
}

TEST_CASE("every split strictly decreases weighted Gini impurity") {
    std::mt19937_64 rng(63);
    const auto data = random_dataset(rng, 120, 10);
    TreeParams params;
    params.min_impurity_decrease = 0.01;
    const DecisionTree t = fit_tree(data, params);

    // roll leaf counts up to the internal nodes (children follow parents)
    std::vector<std::pair<std::size_t, std::size_t>> counts(t.nodes.size());
    for (std::size_t id = t.nodes.size(); id-- > 0;) {
        const TreeNode& n = t.nodes[id];
        if (n.is_leaf) {
            counts[id] = {n.count_benign, n.count_malignant};
        } else {
            const auto& l = counts[static_cast<std::size_t>(n.left)];
            const auto& r = counts[static_cast<std::size_t>(n.right)];
            counts[id] = {l.first + r.first, l.second + r.second};
        }
    }
    for (const TreeNode& n : t.nodes) {
        if (n.is_leaf) {
            continue;
        }
        const auto [lb, lm] = counts[static_cast<std::size_t>(n.left)];
        const auto [rb, rm] = counts[static_cast<std::size_t>(n.right)];
        const double total = static_cast<double>(lb + lm + rb + rm);
        const double gain =
            oracle_gini(lb + rb, lm + rm) -
            (static_cast<double>(lb + lm) / total * oracle_gini(lb, lm) +
             static_cast<double>(rb + rm) / total * oracle_gini(rb, rm));
        CHECK(gain > params.min_impurity_decrease);
    }
}

TEST_CASE("fit_tree is invariant to input ordering") {
    std::mt19937_64 rng(64);
    auto data = random_dataset(rng, 80, 12);
    const DecisionTree a = fit_tree(data, TreeParams{});
    std::shuffle(data.begin(), data.end(), rng);
    const DecisionTree b = fit_tree(data, TreeParams{});
    CHECK(a == b);
}

TEST_CASE("leaf-majority ties predict malignant") {
    std::vector<RadiomicSequence> data = {seq({1.0}, Label::benign),
                                          seq({1.0}, Label::malignant)};
    const DecisionTree t = fit_tree(data, TreeParams{});
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.nodes[0].prediction == Label::malignant);
    CHECK(predict_tree(t, std::vector<double>{1.0}).malignant_score == 0.5);
}

TEST_CASE("fit_tree rejects empty or ragged input") {
    CHECK_THROWS_AS(fit_tree({}, TreeParams{}), ArgumentError);
    std::vector<RadiomicSequence> ragged = {seq({1.0, 2.0}, Label::benign),
                                            seq({1.0}, Label::malignant)};
    CHECK_THROWS_AS(fit_tree(ragged, TreeParams{}), DimensionError);
}

TEST_CASE("predict_tree rejects width mismatches") {
    std::vector<RadiomicSequence> data = {seq({1.0, 2.0}, Label::benign),
                                          seq({2.0, 1.0}, Label::malignant)};
    const DecisionTree t = fit_tree(data, TreeParams{});
    CHECK_THROWS_AS(predict_tree(t, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("tree save/load round-trips and predicts identically") {
    TempDir dir("tree");
    std::mt19937_64 rng(65);
    auto data = random_dataset(rng, 150, 20);
    TreeParams params;
    params.min_samples_leaf = 2;
    const DecisionTree t = fit_tree(data, params);
    save_tree(t, dir.file("t.tree"));
    const DecisionTree loaded = load_tree(dir.file("t.tree"));
    CHECK(loaded == t);

    std::uniform_real_distribution<double> dist(-0.5, 1.5);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> probe(20);
        for (double& v : probe) {
            v = dist(rng);
        }
        const TreePrediction a = predict_tree(t, probe);
        const TreePrediction b = predict_tree(loaded, probe);
        CHECK(a.label == b.label);
        CHECK(a.malignant_score == b.malignant_score);
    }
}

TEST_CASE("tree load reports malformed lines with their line number") {
    TempDir dir("treebad");
    std::vector<RadiomicSequence> data = {
        seq({1.0}, Label::benign), seq({2.0}, Label::benign),
        seq({3.0}, Label::malignant), seq({4.0}, Label::malignant)};
    TreeParams params;
    params.min_samples_leaf = 1;
    save_tree(fit_tree(data, params), dir.file("t.tree"));

    std::string text;
    {
        std::ifstream in(dir.file("t.tree"));
        text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }

    SUBCASE("bad header") {
        std::ofstream(dir.file("h.tree")) << "WHAT 3 1\n" << text.substr(text.find('\n') + 1);
        try {
            load_tree(dir.file("h.tree"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset == 1);
        }
    }
    SUBCASE("corrupted node line") {
        std::string bad = text;
        const std::size_t second_line = bad.find('\n') + 1;
        const std::size_t third_line = bad.find('\n', second_line) + 1;
        bad.replace(third_line, bad.find('\n', third_line) - third_line, "1 junk");
        std::ofstream(dir.file("c.tree")) << bad;
        try {
            load_tree(dir.file("c.tree"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.offset == 3);
        }
    }
    SUBCASE("truncated node list") {
        const std::size_t last = text.rfind('\n', text.size() - 2);
        std::ofstream(dir.file("s.tree")) << text.substr(0, last + 1);
        CHECK_THROWS_AS(load_tree(dir.file("s.tree")), ParseError);
    }
}
