#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hsd::corpus {

enum class Label { NonHate = 0, Hate = 1 };

std::string_view to_string(Label label);
// Accepts "hate"/"nonhate" (also "non-hate", "non_hate") and "1"/"0".
Label parse_label(std::string_view text);

struct LabeledExample {
    std::string id;
    std::string text;
    std::string raw_label;
    std::optional<Label> binary_label;
};

using Dataset = std::vector<LabeledExample>;

// Column names used when reading a source CSV.
struct DatasetSchema {
    std::string name;  // used as id prefix: "<name>-<row>"
    std::string text_column = "text";
    std::string label_column = "label";
};

struct LoadResult {
    Dataset examples;
    std::size_t skipped_empty = 0;
};

LoadResult load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);

// raw label -> binary class. Totality is checked against the data at collapse time.
class LabelMapping {
public:
    LabelMapping() = default;
    explicit LabelMapping(std::map<std::string, Label, std::less<>> entries);

    // "raw = hate|nonhate" lines, see KeyValueConfig.
    static LabelMapping read_file(const std::filesystem::path& path);
    static LabelMapping parse(std::string_view text);

    [[nodiscard]] std::optional<Label> lookup(std::string_view raw) const;
    [[nodiscard]] const std::map<std::string, Label, std::less<>>& entries() const { return entries_; }

private:
    std::map<std::string, Label, std::less<>> entries_;
};

struct ClassCounts {
    std::size_t hate = 0;
    std::size_t nonhate = 0;
    std::size_t unlabeled = 0;
    std::size_t total = 0;

    bool operator==(const ClassCounts&) const = default;
};

struct CollapseResult {
    Dataset examples;
    ClassCounts counts;
};

CollapseResult collapse_labels(Dataset examples, const LabelMapping& mapping);

// Merges collapsed datasets and subsamples each class without replacement down
// to the minority-class count of the union (or per_class_cap when smaller).
Dataset combine_balanced(const std::vector<Dataset>& datasets, std::uint64_t seed,
                         std::optional<std::size_t> per_class_cap = std::nullopt);

struct SplitRatios {
    double train = 0.6;
    double validation = 0.2;
    double test = 0.2;
};

struct SplitBundle {
    Dataset train;
    Dataset validation;
    Dataset test;
    SplitRatios ratios;
    std::uint64_t seed = 0;
};

// Sizes for one stratum of n items: train = round(n*r_train), validation =
// round(n*r_val), test takes the remainder (clamped so nothing goes negative).
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios);

SplitBundle split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed,
                  bool stratified = true);

ClassCounts stats(const Dataset& dataset);

// Writes train.csv / validation.csv / test.csv (id,text,raw_label,label) and
// split.json (seed, ratios, per-part counts) into dir.
void write_split(const SplitBundle& bundle, const std::filesystem::path& dir);
SplitBundle read_split(const std::filesystem::path& dir);

// Collapsed-dataset CSV with columns id,text,raw_label,label.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace hsd::corpus
