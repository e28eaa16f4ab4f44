#include "evoaug/operator_kind.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <utility>

#include "evoaug/errors.hpp"

namespace evoaug {
namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

constexpr std::array<std::pair<std::string_view, std::string_view>, 9> kAliases{{
    {"canny", op_names::kCanny},
    {"segment", op_names::kSegment},
    {"segmentation", op_names::kSegment},
    {"depth", op_names::kDepth},
    {"color", op_names::kColor},
    {"nerf", op_names::kNeRF},
    {"classical", op_names::kClassical},
    {"noop", op_names::kNoOp},
    {"none", op_names::kNoOp},
}};

}  // namespace

bool is_valid_operator_name(std::string_view name) {
    if (name.empty()) return false;
    if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-';
    });
}

OperatorKind::OperatorKind(std::string_view name) {
    if (!is_valid_operator_name(name)) throw ConfigError("invalid operator name: '" + std::string(name) + "'");
    const auto key = lower(name);
    for (const auto& [alias, canonical] : kAliases) {
        if (alias == key) {
            tag_ = canonical;
            return;
        }
    }
    tag_ = std::string(name);
}

std::string OperatorKind::text_name() const { return is_noop() ? "None" : tag_; }

bool OperatorKind::is_builtin() const {
    const auto& all = builtin_operators();
    return std::find(all.begin(), all.end(), *this) != all.end();
}

bool OperatorKind::is_generative() const {
    return tag_ == op_names::kCanny || tag_ == op_names::kSegment || tag_ == op_names::kDepth ||
           tag_ == op_names::kColor || tag_ == op_names::kNeRF;
}

const std::vector<OperatorKind>& builtin_operators() {
    static const std::vector<OperatorKind> ops{
        OperatorKind(op_names::kCanny),     OperatorKind(op_names::kSegment), OperatorKind(op_names::kDepth),
        OperatorKind(op_names::kColor),     OperatorKind(op_names::kNeRF),    OperatorKind(op_names::kClassical),
        OperatorKind(op_names::kNoOp),
    };
    return ops;
}

std::string wire_name(const OperatorKind& kind) { return lower(kind.tag()); }

}  // namespace evoaug
