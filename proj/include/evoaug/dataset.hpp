#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "evoaug/random.hpp"
#include "evoaug/raster.hpp"

namespace evoaug {

struct LabeledItem {
    std::string id;
    RasterImage image;
    int label = 0;
};

/// Class-labeled images. Ids are unique, labels lie in [0, num_classes) and
/// every class has at least one item; the constructor enforces all three.
class LabeledDataset {
public:
    LabeledDataset() = default;
    LabeledDataset(std::vector<LabeledItem> items, std::vector<std::string> class_names);

    const std::vector<LabeledItem>& items() const { return items_; }
    const LabeledItem& item(std::size_t i) const { return items_.at(i); }
    std::size_t size() const { return items_.size(); }
    int num_classes() const { return static_cast<int>(class_names_.size()); }
    const std::vector<std::string>& class_names() const { return class_names_; }
    std::vector<int> labels() const;
    /// Item indices of class `label`, in dataset order.
    std::vector<std::size_t> indices_of_class(int label) const;
    std::size_t min_class_count() const;

    /// Subset by item index; labels and class names are kept as is.
    LabeledDataset subset(const std::vector<std::size_t>& indices) const;

private:
    std::vector<LabeledItem> items_;
    std::vector<std::string> class_names_;
};

/// Loads either a JSON-lines manifest ({"id","path","label"} per line, label
/// an index or a class name, paths relative to the manifest) or a directory
/// laid out as root/<class>/<image>.png|.ppm with classes labeled in sorted
/// name order and ids "<class>/<file stem>".
LabeledDataset load_dataset(const std::filesystem::path& source);

/// Assignment of every item to one of k folds.
struct FoldPlan {
    int k = 0;
    /// fold index per dataset item, aligned with LabeledDataset::items().
    std::vector<int> fold_of_item;
    std::map<std::string, int> assignment;

    std::vector<std::size_t> fold(int i) const;
    std::vector<std::size_t> complement(int i) const;
};

/// Stratified split: each class is shuffled and dealt round-robin, with the
/// starting fold carried across classes, so per-class counts in any two
/// folds differ by at most one. Needs 2 <= k <= smallest class size.
FoldPlan stratified_folds(const LabeledDataset& d, int k, RandomStream& rng);

struct FewShotSelection {
    LabeledDataset subset;               // relabeled 0..n_way-1
    std::vector<int> source_classes;     // original label per new label
    std::vector<std::size_t> source_items;  // original index per subset item
};

/// n_way random classes (relabeled in ascending original label order), then
/// k_shot random items from each.
FewShotSelection select_fewshot(const LabeledDataset& d, int n_way, int k_shot, RandomStream& rng);
LabeledDataset sample_fewshot(const LabeledDataset& d, int n_way, int k_shot, RandomStream& rng);

/// Scores a baseline classifier trained on `train` by accuracy on `heldout`.
using BaselineAccuracy = std::function<double(const LabeledDataset& train, const LabeledDataset& heldout)>;

/// Draws `trials` few-shot subsets and returns the one on which the baseline
/// reaches the lowest held-out accuracy (first occurrence wins ties). The
/// held-out set of a subset is every unselected item of its classes.
LabeledDataset hardest_subset(const LabeledDataset& d, int n_way, int k_shot, int trials,
                              const BaselineAccuracy& baseline, RandomStream& rng);

}  // namespace evoaug
