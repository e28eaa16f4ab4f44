#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoaug/operator_kind.hpp"
#include "evoaug/random.hpp"
#include "evoaug/raster.hpp"

namespace evoaug {

class OperatorRegistry;

inline constexpr int kDefaultMaxDepth = 2;

/// One operator node. A leaf has no children; an internal node has exactly
/// two, entered with probabilities p_left and p_right.
struct TreeNode {
    OperatorKind op;
    double p_left = 0.0;
    double p_right = 0.0;
    std::vector<TreeNode> children;

    static TreeNode leaf(OperatorKind op) { return TreeNode{std::move(op), 0.0, 0.0, {}}; }
    static TreeNode branch(OperatorKind op, double p_left, TreeNode left, double p_right, TreeNode right);

    bool is_leaf() const { return children.empty(); }
    const TreeNode& left() const { return children.at(0); }
    const TreeNode& right() const { return children.at(1); }
    TreeNode& left() { return children.at(0); }
    TreeNode& right() { return children.at(1); }
};

/// The genome: a full binary tree whose leaves all sit at the same depth.
/// Applying it follows one root-to-leaf path chosen by the edge
/// probabilities and composes the operators root-first.
struct AugmentationTree {
    TreeNode root;

    /// Operators on the longest root-to-leaf path.
    int depth() const;
    std::size_t node_count() const;
};

/// Structural equality; probabilities compared to within `tolerance`.
bool same_structure(const AugmentationTree& a, const AugmentationTree& b, double tolerance = 1e-9);

struct TreeLimits {
    int max_depth = kDefaultMaxDepth;
};

/// Throws InvalidTree for a probability-sum violation, ragged shape, depth
/// overflow or (when a registry is given) an unregistered operator.
void validate_tree(const AugmentationTree& t, const TreeLimits& limits = {},
                   const OperatorRegistry* registry = nullptr);

/// Probabilities are kept on a 1e-6 grid so that the six-decimal text form
/// reproduces them.
double quantize_probability(double p);

/// Operators on one root-to-leaf path; at each internal node the left child
/// is taken with probability p_left.
std::vector<OperatorKind> sample_path(const AugmentationTree& t, RandomStream& rng);

/// Heap indices (root 0, children 2i+1 / 2i+2) of a sampled path.
std::vector<std::size_t> sample_path_nodes(const AugmentationTree& t, RandomStream& rng);

/// Stream used to draw the branch decisions of apply_tree.
RandomStream path_stream(const RandomStream& rng);
/// Stream handed to the operator at heap index `node` by apply_tree.
RandomStream node_stream(const RandomStream& rng, std::size_t node);

/// Samples a path from path_stream(rng) and applies its operators in order,
/// each with its node_stream. `rng` itself is not advanced.
RasterImage apply_tree(const AugmentationTree& t, const RasterImage& img, const OperatorRegistry& registry,
                       const RandomStream& rng);

/// Grammar: Tree := OpName | "(" OpName "," Prob "," Tree "," Prob "," Tree ")".
/// Throws ParseError or InvalidTree.
AugmentationTree parse_tree(std::string_view text, const TreeLimits& limits = {});

enum class TreeFormat { text, json };

/// Text form prints probabilities with six decimals and NoOp as "None";
/// JSON form is {"op", "p_left", "p_right", "left", "right"} (leaves: {"op"}).
std::string serialize_tree(const AugmentationTree& t, TreeFormat format = TreeFormat::text);
nlohmann::json tree_to_json(const AugmentationTree& t);
AugmentationTree tree_from_json(const nlohmann::json& j, const TreeLimits& limits = {});

/// Parses either format, choosing by the first non-space character.
AugmentationTree parse_tree_any(std::string_view text, const TreeLimits& limits = {});

/// Canonical text form; the identity of a tree for caching and tracing.
inline std::string canonical_text(const AugmentationTree& t) { return serialize_tree(t, TreeFormat::text); }

/// Full tree of the given depth with every node `op` and 0.5/0.5 edges.
AugmentationTree uniform_tree(const OperatorKind& op, int depth);

/// Node at heap index `index`; throws std::out_of_range if absent.
const TreeNode& node_at(const AugmentationTree& t, std::size_t index);
TreeNode& node_at(AugmentationTree& t, std::size_t index);

/// Probability of reaching each leaf, with the operator sequence of its path.
struct PathProbability {
    std::vector<OperatorKind> ops;
    double probability = 0.0;
};
std::vector<PathProbability> enumerate_paths(const AugmentationTree& t);

}  // namespace evoaug
