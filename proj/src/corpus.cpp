#include "hsd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "hsd/csv.hpp"
#include "hsd/error.hpp"
#include "hsd/kvconfig.hpp"
#include "hsd/rng.hpp"

namespace hsd::corpus {

namespace fs = std::filesystem;

std::string_view to_string(Label label) { return label == Label::Hate ? "hate" : "nonhate"; }

Label parse_label(std::string_view text) {
    std::string t = trim(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "hate" || t == "1") return Label::Hate;
    if (t == "nonhate" || t == "non-hate" || t == "non_hate" || t == "0") return Label::NonHate;
    throw ValidationError("not a binary label: '" + std::string(text) + "'");
}

LoadResult load_dataset(const fs::path& path, const DatasetSchema& schema) {
    if (!fs::exists(path)) throw IoError("dataset file not found: " + path.string());
    csv::Table table = csv::read_file(path);
    int text_col = table.column(schema.text_column);
    int label_col = table.column(schema.label_column);
    if (text_col < 0) throw ValidationError(path.string() + ": missing text column '" + schema.text_column + "'");
    if (label_col < 0) throw ValidationError(path.string() + ": missing label column '" + schema.label_column + "'");

    LoadResult result;
    const std::string prefix = schema.name.empty() ? path.stem().string() : schema.name;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto cell = [&](int c) -> std::string { return c < static_cast<int>(row.size()) ? row[c] : std::string{}; };
        std::string text = cell(text_col);
        if (trim(text).empty()) {
            ++result.skipped_empty;
            continue;
        }
        result.examples.push_back({prefix + "-" + std::to_string(r), std::move(text), trim(cell(label_col)), std::nullopt});
    }
    if (result.skipped_empty > 0) {
        spdlog::warn("{}: skipped {} rows with empty text", path.string(), result.skipped_empty);
    }
    if (result.examples.empty()) throw ValidationError(path.string() + ": no usable rows");
    return result;
}

LabelMapping::LabelMapping(std::map<std::string, Label, std::less<>> entries) : entries_(std::move(entries)) {}

LabelMapping LabelMapping::parse(std::string_view text) {
    auto kv = KeyValueConfig::parse(text);
    std::map<std::string, Label, std::less<>> entries;
    for (const auto& [raw, cls] : kv.entries()) entries.emplace(raw, parse_label(cls));
    return LabelMapping(std::move(entries));
}

LabelMapping LabelMapping::read_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read label mapping: " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(content);
}

std::optional<Label> LabelMapping::lookup(std::string_view raw) const {
    auto it = entries_.find(raw);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

CollapseResult collapse_labels(Dataset examples, const LabelMapping& mapping) {
    CollapseResult out;
    for (auto& ex : examples) {
        auto label = mapping.lookup(ex.raw_label);
        if (!label) throw ValidationError("unmapped raw label: '" + ex.raw_label + "' (example " + ex.id + ")");
        ex.binary_label = *label;
    }
    out.examples = std::move(examples);
    out.counts = stats(out.examples);
    return out;
}

Dataset combine_balanced(const std::vector<Dataset>& datasets, std::uint64_t seed,
                         std::optional<std::size_t> per_class_cap) {
    if (datasets.empty()) throw ValidationError("combine_balanced: no datasets");

    std::vector<const LabeledExample*> all;
    std::set<std::string, std::less<>> ids;
    for (const auto& ds : datasets) {
        for (const auto& ex : ds) {
            if (!ex.binary_label) throw ValidationError("combine_balanced: example " + ex.id + " is not collapsed");
            if (!ids.insert(ex.id).second) throw ValidationError("combine_balanced: duplicate id " + ex.id);
            all.push_back(&ex);
        }
    }

    std::vector<std::size_t> hate, nonhate;
    for (std::size_t i = 0; i < all.size(); ++i) {
        (*all[i]->binary_label == Label::Hate ? hate : nonhate).push_back(i);
    }
    if (hate.empty()) throw ValidationError("combine_balanced: class 'hate' absent from the union");
    if (nonhate.empty()) throw ValidationError("combine_balanced: class 'nonhate' absent from the union");

    std::size_t target = std::min(hate.size(), nonhate.size());
    if (per_class_cap) target = std::min(target, *per_class_cap);

    Rng rng(seed);
    std::vector<char> keep(all.size(), 0);
    for (auto* cls : {&hate, &nonhate}) {
        rng.shuffle(std::span<std::size_t>(*cls));
        for (std::size_t i = 0; i < target; ++i) keep[(*cls)[i]] = 1;
    }

    Dataset out;
    out.reserve(2 * target);
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (keep[i]) out.push_back(*all[i]);
    }
    return out;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatios& ratios) {
    auto tr = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.train));
    auto va = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios.validation));
    tr = std::min(tr, n);
    va = std::min(va, n - tr);
    return {tr, va, n - tr - va};
}

namespace {

void validate_ratios(const SplitRatios& r) {
    if (!(r.train > 0 && r.validation > 0 && r.test > 0)) {
        throw ValidationError("split ratios must be positive");
    }
    if (std::abs(r.train + r.validation + r.test - 1.0) > 1e-9) {
        throw ValidationError("split ratios must sum to 1");
    }
}

void assign(const Dataset& dataset, std::vector<std::size_t> idx, const SplitRatios& ratios, Rng& rng,
            SplitBundle& out) {
    rng.shuffle(std::span<std::size_t>(idx));
    auto [tr, va, te] = split_sizes(idx.size(), ratios);
    std::size_t k = 0;
    for (std::size_t i = 0; i < tr; ++i) out.train.push_back(dataset[idx[k++]]);
    for (std::size_t i = 0; i < va; ++i) out.validation.push_back(dataset[idx[k++]]);
    for (std::size_t i = 0; i < te; ++i) out.test.push_back(dataset[idx[k++]]);
}

}  // namespace

SplitBundle split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed, bool stratified) {
    validate_ratios(ratios);
    if (dataset.size() < 3) throw ValidationError("split: dataset needs at least 3 examples");

    SplitBundle out;
    out.ratios = ratios;
    out.seed = seed;
    Rng rng(seed);

    if (!stratified) {
        std::vector<std::size_t> idx(dataset.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        assign(dataset, std::move(idx), ratios, rng, out);
        return out;
    }

    std::vector<std::size_t> hate, nonhate;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& label = dataset[i].binary_label;
        if (!label) throw ValidationError("stratified split needs collapsed labels (example " + dataset[i].id + ")");
        (*label == Label::Hate ? hate : nonhate).push_back(i);
    }
    assign(dataset, std::move(hate), ratios, rng, out);
    assign(dataset, std::move(nonhate), ratios, rng, out);
    return out;
}

ClassCounts stats(const Dataset& dataset) {
    ClassCounts c;
    for (const auto& ex : dataset) {
        if (!ex.binary_label) {
            ++c.unlabeled;
        } else if (*ex.binary_label == Label::Hate) {
            ++c.hate;
        } else {
            ++c.nonhate;
        }
    }
    c.total = dataset.size();
    return c;
}

void write_dataset(const Dataset& dataset, const fs::path& path) {
    csv::Table table;
    table.header = {"id", "text", "raw_label", "label"};
    for (const auto& ex : dataset) {
        table.rows.push_back({ex.id, ex.text, ex.raw_label,
                              ex.binary_label ? std::string(to_string(*ex.binary_label)) : std::string{}});
    }
    csv::write_file(path, table);
}

Dataset read_dataset(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("split file not found: " + path.string());
    csv::Table table = csv::read_file(path);
    int id = table.column("id"), text = table.column("text"), raw = table.column("raw_label"),
        label = table.column("label");
    if (id < 0 || text < 0 || label < 0) {
        throw ValidationError(path.string() + ": expected columns id,text,raw_label,label");
    }
    Dataset out;
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size()) throw ValidationError(path.string() + ": ragged row");
        LabeledExample ex{row[id], row[text], raw >= 0 ? row[raw] : std::string{}, std::nullopt};
        if (!row[label].empty()) ex.binary_label = parse_label(row[label]);
        out.push_back(std::move(ex));
    }
    return out;
}

void write_split(const SplitBundle& bundle, const fs::path& dir) {
    fs::create_directories(dir);
    write_dataset(bundle.train, dir / "train.csv");
    write_dataset(bundle.validation, dir / "validation.csv");
    write_dataset(bundle.test, dir / "test.csv");

    auto counts = [](const Dataset& d) {
        auto c = stats(d);
        return nlohmann::json{{"hate", c.hate}, {"nonhate", c.nonhate}, {"total", c.total}};
    };
    nlohmann::json j;
    j["seed"] = bundle.seed;
    j["ratios"] = {bundle.ratios.train, bundle.ratios.validation, bundle.ratios.test};
    j["parts"] = {{"train", counts(bundle.train)}, {"validation", counts(bundle.validation)},
                  {"test", counts(bundle.test)}};
    std::ofstream out(dir / "split.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "split.json").string());
    out << j.dump(2) << '\n';
}

SplitBundle read_split(const fs::path& dir) {
    auto manifest = dir / "split.json";
    std::ifstream in(manifest);
    if (!in) throw IoError("split manifest not found: " + manifest.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(manifest.string() + ": " + e.what());
    }
    SplitBundle b;
    b.seed = j.at("seed").get<std::uint64_t>();
    auto r = j.at("ratios");
    b.ratios = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
    b.train = read_dataset(dir / "train.csv");
    b.validation = read_dataset(dir / "validation.csv");
    b.test = read_dataset(dir / "test.csv");
    return b;
}

}  // namespace hsd::corpus
