#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace evoaug {

namespace op_names {
inline constexpr std::string_view kCanny = "Canny";
inline constexpr std::string_view kSegment = "Segment";
inline constexpr std::string_view kDepth = "Depth";
inline constexpr std::string_view kColor = "Color";
inline constexpr std::string_view kNeRF = "NeRF";
inline constexpr std::string_view kClassical = "Classical";
inline constexpr std::string_view kNoOp = "NoOp";
}  // namespace op_names

/// Tag of an augmentation operator. Built-in names are canonicalized
/// case-insensitively ("None" -> NoOp, "Segmentation" -> Segment); any
/// other identifier is an extension name and kept verbatim.
class OperatorKind {
public:
    OperatorKind() : tag_(op_names::kNoOp) {}
    explicit OperatorKind(std::string_view name);

    const std::string& tag() const { return tag_; }
    /// Name used by the parenthesized text format: NoOp prints as "None".
    std::string text_name() const;

    bool is_noop() const { return tag_ == op_names::kNoOp; }
    bool is_builtin() const;
    /// Canny, Segment, Depth, Color and NeRF; served by a worker.
    bool is_generative() const;

    auto operator<=>(const OperatorKind&) const = default;

private:
    std::string tag_;
};

/// The seven operators, in the order they are listed for population seeding.
const std::vector<OperatorKind>& builtin_operators();
/// Lower-case wire name for generative operators ("canny", "nerf", ...).
std::string wire_name(const OperatorKind& kind);
/// True when `name` is a syntactically valid operator identifier.
bool is_valid_operator_name(std::string_view name);

}  // namespace evoaug
