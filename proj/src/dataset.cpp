#include "evoaug/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "evoaug/errors.hpp"

namespace evoaug {

namespace fs = std::filesystem;

LabeledDataset::LabeledDataset(std::vector<LabeledItem> items, std::vector<std::string> class_names)
    : items_(std::move(items)), class_names_(std::move(class_names)) {
    std::set<std::string> ids;
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (const auto& it : items_) {
        if (!ids.insert(it.id).second) throw ConfigError("duplicate item id: " + it.id);
        if (it.label < 0 || it.label >= num_classes())
            throw ConfigError("label " + std::to_string(it.label) + " of item " + it.id + " out of range");
        ++counts[static_cast<std::size_t>(it.label)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0) throw EmptyClass(class_names_[c]);
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> out;
    out.reserve(items_.size());
    for (const auto& it : items_) out.push_back(it.label);
    return out;
}

std::vector<std::size_t> LabeledDataset::indices_of_class(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < items_.size(); ++i)
        if (items_[i].label == label) out.push_back(i);
    return out;
}

std::size_t LabeledDataset::min_class_count() const {
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (const auto& it : items_) ++counts[static_cast<std::size_t>(it.label)];
    return counts.empty() ? 0 : *std::min_element(counts.begin(), counts.end());
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    std::vector<LabeledItem> items;
    items.reserve(indices.size());
    for (auto i : indices) items.push_back(items_.at(i));
    return LabeledDataset(std::move(items), class_names_);
}

// ---------------------------------------------------------------------------
// Loading

namespace {

bool is_image_file(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm";
}

LabeledDataset load_directory(const fs::path& root) {
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) class_dirs.push_back(e.path());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw IoError("no class directories under " + root.string());

    std::vector<std::string> names;
    std::vector<LabeledItem> items;
    for (std::size_t c = 0; c < class_dirs.size(); ++c) {
        const auto name = class_dirs[c].filename().string();
        names.push_back(name);
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(class_dirs[c]))
            if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw EmptyClass(name);
        for (const auto& f : files)
            items.push_back({name + "/" + f.stem().string(), load_image(f), static_cast<int>(c)});
    }
    return LabeledDataset(std::move(items), std::move(names));
}

LabeledDataset load_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open manifest: " + manifest.string());
    const auto base = manifest.parent_path();

    struct Row {
        std::string id;
        fs::path path;
        nlohmann::json label;
        std::size_t line;
    };
    std::vector<Row> rows;
    std::set<std::string> ids;
    std::string text;
    std::size_t line_no = 0;
    bool string_labels = false;
    bool int_labels = false;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            throw ManifestError(line_no, "not valid JSON");
        }
        if (!j.is_object()) throw ManifestError(line_no, "expected a JSON object");
        if (!j.contains("id") || !j["id"].is_string()) throw ManifestError(line_no, "missing string 'id'");
        if (!j.contains("path") || !j["path"].is_string()) throw ManifestError(line_no, "missing string 'path'");
        if (!j.contains("label")) throw ManifestError(line_no, "missing 'label'");
        const auto& label = j["label"];
        if (label.is_number_integer()) {
            if (label.get<long long>() < 0) throw ManifestError(line_no, "negative label");
            int_labels = true;
        } else if (label.is_string()) {
            string_labels = true;
        } else {
            throw ManifestError(line_no, "label must be an integer or a class name");
        }
        if (int_labels && string_labels) throw ManifestError(line_no, "mixes integer and named labels");
        auto id = j["id"].get<std::string>();
        if (!ids.insert(id).second) throw ManifestError(line_no, "duplicate id '" + id + "'");
        fs::path p = j["path"].get<std::string>();
        if (p.is_relative()) p = base / p;
        rows.push_back({std::move(id), std::move(p), label, line_no});
    }
    if (rows.empty()) throw ManifestError(line_no, "manifest has no entries");

    std::vector<std::string> names;
    std::map<std::string, int> name_to_label;
    if (string_labels) {
        std::set<std::string> uniq;
        for (const auto& r : rows) uniq.insert(r.label.get<std::string>());
        names.assign(uniq.begin(), uniq.end());
        for (std::size_t i = 0; i < names.size(); ++i) name_to_label[names[i]] = static_cast<int>(i);
    } else {
        long long max_label = 0;
        for (const auto& r : rows) max_label = std::max(max_label, r.label.get<long long>());
        for (long long i = 0; i <= max_label; ++i) names.push_back(std::to_string(i));
    }

    std::vector<LabeledItem> items;
    for (auto& r : rows) {
        const int label = string_labels ? name_to_label.at(r.label.get<std::string>()) : r.label.get<int>();
        RasterImage img;
        try {
            img = load_image(r.path);
        } catch (const IoError& e) {
            throw ManifestError(r.line, e.what());
        }
        items.push_back({std::move(r.id), std::move(img), label});
    }
    return LabeledDataset(std::move(items), std::move(names));
}

}  // namespace

LabeledDataset load_dataset(const fs::path& source) {
    std::error_code ec;
    if (fs::is_directory(source, ec)) return load_directory(source);
    if (fs::is_regular_file(source, ec)) return load_manifest(source);
    throw IoError("dataset source not found: " + source.string());
}

// ---------------------------------------------------------------------------
// Folds and sampling

std::vector<std::size_t> FoldPlan::fold(int i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < fold_of_item.size(); ++j)
        if (fold_of_item[j] == i) out.push_back(j);
    return out;
}

std::vector<std::size_t> FoldPlan::complement(int i) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < fold_of_item.size(); ++j)
        if (fold_of_item[j] != i) out.push_back(j);
    return out;
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, RandomStream& rng) {
    // Fisher-Yates with our own index draw so results do not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

FoldPlan stratified_folds(const LabeledDataset& d, int k, RandomStream& rng) {
    if (k < 2) throw ConfigError("fold count k must be at least 2 (a single fold would validate on the training set)");
    FoldPlan plan;
    plan.k = k;
    plan.fold_of_item.assign(d.size(), -1);
    std::size_t offset = 0;
    for (int c = 0; c < d.num_classes(); ++c) {
        auto idx = d.indices_of_class(c);
        if (idx.size() < static_cast<std::size_t>(k))
            throw TooFewItems(d.class_names()[c], std::to_string(idx.size()) + " items for " + std::to_string(k) + " folds");
        shuffle(idx, rng);
        for (std::size_t j = 0; j < idx.size(); ++j)
            plan.fold_of_item[idx[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(k));
        offset = (offset + idx.size()) % static_cast<std::size_t>(k);
    }
    for (std::size_t i = 0; i < d.size(); ++i) plan.assignment[d.item(i).id] = plan.fold_of_item[i];
    return plan;
}

FewShotSelection select_fewshot(const LabeledDataset& d, int n_way, int k_shot, RandomStream& rng) {
    if (n_way < 1 || k_shot < 1) throw ConfigError("n_way and k_shot must be positive");
    if (n_way > d.num_classes())
        throw TooFewClasses("need " + std::to_string(n_way) + " classes, dataset has " +
                            std::to_string(d.num_classes()));
    std::vector<int> classes(static_cast<std::size_t>(d.num_classes()));
    std::iota(classes.begin(), classes.end(), 0);
    shuffle(classes, rng);
    classes.resize(static_cast<std::size_t>(n_way));
    std::sort(classes.begin(), classes.end());

    FewShotSelection sel;
    sel.source_classes = classes;
    std::vector<LabeledItem> items;
    std::vector<std::string> names;
    for (int new_label = 0; new_label < n_way; ++new_label) {
        const int c = classes[new_label];
        names.push_back(d.class_names()[c]);
        auto idx = d.indices_of_class(c);
        if (idx.size() < static_cast<std::size_t>(k_shot))
            throw TooFewItems(d.class_names()[c], std::to_string(idx.size()) + " items for " +
                                                      std::to_string(k_shot) + " shots");
        shuffle(idx, rng);
        for (int s = 0; s < k_shot; ++s) {
            const auto& src = d.item(idx[s]);
            items.push_back({src.id, src.image, new_label});
            sel.source_items.push_back(idx[s]);
        }
    }
    sel.subset = LabeledDataset(std::move(items), std::move(names));
    return sel;
}

LabeledDataset sample_fewshot(const LabeledDataset& d, int n_way, int k_shot, RandomStream& rng) {
    return select_fewshot(d, n_way, k_shot, rng).subset;
}

LabeledDataset hardest_subset(const LabeledDataset& d, int n_way, int k_shot, int trials,
                              const BaselineAccuracy& baseline, RandomStream& rng) {
    if (trials < 1) throw ConfigError("hardest-subset trials must be at least 1");
    std::optional<LabeledDataset> best;
    double best_accuracy = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto sel = select_fewshot(d, n_way, k_shot, rng);
        if (trials == 1) return std::move(sel.subset);

        const std::set<std::size_t> chosen(sel.source_items.begin(), sel.source_items.end());
        std::vector<LabeledItem> heldout;
        for (int new_label = 0; new_label < n_way; ++new_label)
            for (auto i : d.indices_of_class(sel.source_classes[new_label]))
                if (!chosen.contains(i)) heldout.push_back({d.item(i).id, d.item(i).image, new_label});
        std::vector<std::size_t> present(static_cast<std::size_t>(n_way), 0);
        for (const auto& it : heldout) ++present[static_cast<std::size_t>(it.label)];
        for (int c = 0; c < n_way; ++c)
            if (present[static_cast<std::size_t>(c)] == 0)
                throw TooFewItems(sel.subset.class_names()[c], "no held-out item left after selecting " +
                                                                   std::to_string(k_shot) + " shots");
        const double acc = baseline(sel.subset, LabeledDataset(std::move(heldout), sel.subset.class_names()));
        if (!best || acc < best_accuracy) {
            best = std::move(sel.subset);
            best_accuracy = acc;
        }
    }
    return std::move(*best);
}

}  // namespace evoaug
