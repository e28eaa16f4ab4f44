#include "evoaug/augtree.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

#include "evoaug/errors.hpp"
#include "evoaug/operators.hpp"

namespace evoaug {

namespace {

constexpr double kProbabilitySumTolerance = 1e-9;
constexpr std::uint64_t kPathStreamKey = 0x7061746800000000ULL;  // "path"
constexpr std::uint64_t kNodeStreamKey = 0x6E6F646500000000ULL;  // "node"

int subtree_depth(const TreeNode& n) {
    if (n.is_leaf()) return 1;
    int d = 0;
    for (const auto& c : n.children) d = std::max(d, subtree_depth(c));
    return d + 1;
}

std::size_t subtree_count(const TreeNode& n) {
    std::size_t k = 1;
    for (const auto& c : n.children) k += subtree_count(c);
    return k;
}

bool same_node(const TreeNode& a, const TreeNode& b, double tol) {
    if (a.op != b.op || a.children.size() != b.children.size()) return false;
    if (a.is_leaf()) return true;
    if (std::abs(a.p_left - b.p_left) > tol || std::abs(a.p_right - b.p_right) > tol) return false;
    return same_node(a.left(), b.left(), tol) && same_node(a.right(), b.right(), tol);
}

void validate_node(const TreeNode& n, int level, int& leaf_level, const OperatorRegistry* registry) {
    if (registry != nullptr && !registry->contains(n.op))
        throw InvalidTree("unknown operator '" + n.op.tag() + "'");
    if (n.is_leaf()) {
        if (leaf_level < 0) leaf_level = level;
        else if (leaf_level != level) throw InvalidTree("ragged shape: leaves at different depths");
        return;
    }
    if (n.children.size() != 2) throw InvalidTree("internal node must have exactly two children");
    for (double p : {n.p_left, n.p_right})
        if (!(std::isfinite(p) && p >= 0.0 && p <= 1.0)) throw InvalidTree("edge probability outside [0, 1]");
    if (std::abs(n.p_left + n.p_right - 1.0) > kProbabilitySumTolerance)
        throw InvalidTree("edge probabilities at '" + n.op.tag() + "' sum to " +
                          std::to_string(n.p_left + n.p_right) + ", not 1");
    validate_node(n.left(), level + 1, leaf_level, registry);
    validate_node(n.right(), level + 1, leaf_level, registry);
}

std::string format_probability(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", p);
    return buf;
}

void write_text(const TreeNode& n, std::string& out) {
    if (n.is_leaf()) {
        out += n.op.text_name();
        return;
    }
    out += '(';
    out += n.op.text_name();
    out += ", ";
    out += format_probability(n.p_left);
    out += ", ";
    write_text(n.left(), out);
    out += ", ";
    out += format_probability(n.p_right);
    out += ", ";
    write_text(n.right(), out);
    out += ')';
}

nlohmann::json node_to_json(const TreeNode& n) {
    nlohmann::json j = {{"op", n.op.tag()}};
    if (!n.is_leaf()) {
        j["p_left"] = n.p_left;
        j["p_right"] = n.p_right;
        j["left"] = node_to_json(n.left());
        j["right"] = node_to_json(n.right());
    }
    return j;
}

TreeNode node_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
        throw FormatError("tree JSON node needs a string field 'op'");
    OperatorKind op(j["op"].get<std::string>());
    const bool has_left = j.contains("left");
    const bool has_right = j.contains("right");
    if (!has_left && !has_right) return TreeNode::leaf(op);
    if (has_left != has_right) throw InvalidTree("internal node must have exactly two children");
    auto prob = [&j](const char* key) {
        if (!j.contains(key) || !j[key].is_number()) throw FormatError(std::string("tree JSON node needs number '") + key + "'");
        return j[key].get<double>();
    };
    return TreeNode::branch(op, prob("p_left"), node_from_json(j["left"]), prob("p_right"),
                            node_from_json(j["right"]));
}

class TreeParser {
public:
    explicit TreeParser(std::string_view text) : text_(text) {}

    AugmentationTree parse() {
        AugmentationTree t{tree()};
        skip_ws();
        if (pos_ != text_.size()) throw ParseError(pos_, "end of input");
        return t;
    }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) throw ParseError(pos_, std::string("'") + c + "'");
        ++pos_;
    }

    OperatorKind name() {
        skip_ws();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '-'))
            ++pos_;
        const auto tok = text_.substr(start, pos_ - start);
        if (!is_valid_operator_name(tok)) throw ParseError(start, "operator name");
        return OperatorKind(tok);
    }

    double probability() {
        skip_ws();
        const std::size_t start = pos_;
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
        if (ec != std::errc() || ptr == text_.data() + pos_) throw ParseError(start, "probability");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return v;
    }

    TreeNode tree() {
        if (!peek('(')) return TreeNode::leaf(name());
        ++pos_;
        auto head = name();
        expect(',');
        const double pl = probability();
        expect(',');
        auto left = tree();
        expect(',');
        const double pr = probability();
        expect(',');
        auto right = tree();
        expect(')');
        return TreeNode::branch(std::move(head), pl, std::move(left), pr, std::move(right));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void collect_paths(const TreeNode& n, std::vector<OperatorKind>& prefix, double prob,
                   std::vector<PathProbability>& out) {
    prefix.push_back(n.op);
    if (n.is_leaf()) {
        out.push_back({prefix, prob});
    } else {
        collect_paths(n.left(), prefix, prob * n.p_left, out);
        collect_paths(n.right(), prefix, prob * n.p_right, out);
    }
    prefix.pop_back();
}

TreeNode uniform_node(const OperatorKind& op, int depth) {
    if (depth <= 1) return TreeNode::leaf(op);
    return TreeNode::branch(op, 0.5, uniform_node(op, depth - 1), 0.5, uniform_node(op, depth - 1));
}

}  // namespace

TreeNode TreeNode::branch(OperatorKind op, double p_left, TreeNode left, double p_right, TreeNode right) {
    TreeNode n{std::move(op), p_left, p_right, {}};
    n.children.reserve(2);
    n.children.push_back(std::move(left));
    n.children.push_back(std::move(right));
    return n;
}

int AugmentationTree::depth() const { return subtree_depth(root); }

std::size_t AugmentationTree::node_count() const { return subtree_count(root); }

bool same_structure(const AugmentationTree& a, const AugmentationTree& b, double tolerance) {
    return same_node(a.root, b.root, tolerance);
}

void validate_tree(const AugmentationTree& t, const TreeLimits& limits, const OperatorRegistry* registry) {
    int leaf_level = -1;
    validate_node(t.root, 1, leaf_level, registry);
    if (t.depth() > limits.max_depth)
        throw InvalidTree("depth " + std::to_string(t.depth()) + " exceeds maximum " +
                          std::to_string(limits.max_depth));
}

double quantize_probability(double p) { return std::clamp(std::round(p * 1e6) / 1e6, 0.0, 1.0); }

std::vector<std::size_t> sample_path_nodes(const AugmentationTree& t, RandomStream& rng) {
    std::vector<std::size_t> nodes;
    const TreeNode* n = &t.root;
    std::size_t index = 0;
    for (;;) {
        nodes.push_back(index);
        if (n->is_leaf()) break;
        const bool go_left = rng.uniform() < n->p_left;
        n = go_left ? &n->left() : &n->right();
        index = 2 * index + (go_left ? 1 : 2);
    }
    return nodes;
}

std::vector<OperatorKind> sample_path(const AugmentationTree& t, RandomStream& rng) {
    std::vector<OperatorKind> ops;
    for (std::size_t index : sample_path_nodes(t, rng)) ops.push_back(node_at(t, index).op);
    return ops;
}

RandomStream path_stream(const RandomStream& rng) { return rng.derive(kPathStreamKey); }

RandomStream node_stream(const RandomStream& rng, std::size_t node) { return rng.derive(kNodeStreamKey + node); }

RasterImage apply_tree(const AugmentationTree& t, const RasterImage& img, const OperatorRegistry& registry,
                       const RandomStream& rng) {
    auto paths = path_stream(rng);
    RasterImage current = img;
    for (std::size_t index : sample_path_nodes(t, paths)) {
        const auto& op = node_at(t, index).op;
        if (op.is_noop()) continue;
        auto stream = node_stream(rng, index);
        current = apply_operator(registry, op, current, stream);
    }
    return current;
}

AugmentationTree parse_tree(std::string_view text, const TreeLimits& limits) {
    auto t = TreeParser(text).parse();
    validate_tree(t, limits);
    return t;
}

std::string serialize_tree(const AugmentationTree& t, TreeFormat format) {
    if (format == TreeFormat::json) return tree_to_json(t).dump();
    std::string out;
    write_text(t.root, out);
    return out;
}

nlohmann::json tree_to_json(const AugmentationTree& t) { return node_to_json(t.root); }

AugmentationTree tree_from_json(const nlohmann::json& j, const TreeLimits& limits) {
    AugmentationTree t{node_from_json(j)};
    validate_tree(t, limits);
    return t;
}

AugmentationTree parse_tree_any(std::string_view text, const TreeLimits& limits) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && text[first] == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(e.byte, "valid tree JSON");
        }
        return tree_from_json(j, limits);
    }
    return parse_tree(text, limits);
}

AugmentationTree uniform_tree(const OperatorKind& op, int depth) { return AugmentationTree{uniform_node(op, depth)}; }

TreeNode& node_at(AugmentationTree& t, std::size_t index) {
    if (index == 0) return t.root;
    TreeNode& parent = node_at(t, (index - 1) / 2);
    if (parent.is_leaf()) throw std::out_of_range("tree node index " + std::to_string(index));
    return index % 2 == 1 ? parent.left() : parent.right();
}

const TreeNode& node_at(const AugmentationTree& t, std::size_t index) {
    return node_at(const_cast<AugmentationTree&>(t), index);
}

std::vector<PathProbability> enumerate_paths(const AugmentationTree& t) {
    std::vector<PathProbability> out;
    std::vector<OperatorKind> prefix;
    collect_paths(t.root, prefix, 1.0, out);
    return out;
}

}  // namespace evoaug
