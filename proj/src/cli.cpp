#include "hsd/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "hsd/corpus.hpp"
#include "hsd/csv.hpp"
#include "hsd/eval.hpp"

namespace hsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool needs_config(const std::string& verb) {
    return verb == "prepare" || verb == "train" || verb == "embed-train" || verb == "sweep-activation";
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Command parse(const std::vector<std::string>& args) {
    if (args.empty()) throw UsageError("missing verb; expected one of: prepare, embed-train, embed-nearest, train, "
                                       "evaluate, explain, sweep-activation");
    Command cmd;
    cmd.verb = args.front();
    if (std::find(kVerbs.begin(), kVerbs.end(), cmd.verb) == kVerbs.end()) {
        throw UsageError("unknown verb '" + cmd.verb + "'");
    }

    CLI::App app{"hsd " + cmd.verb};
    app.set_help_flag();
    std::string config, output, embeddings, checkpoint, predictions, labels;
    app.add_option("--config,-c", config, "run configuration file");
    app.add_option("--set", cmd.overrides, "override a config key (key=value)")->allow_extra_args(false);
    app.add_option("--output,-o", output, "output directory for this run");
    app.add_flag("--dry-run", cmd.dry_run, "validate inputs without writing anything");
    if (cmd.verb == "embed-nearest") {
        app.add_option("--word,-w", cmd.word, "query token")->required();
        app.add_option("--k", cmd.k, "number of neighbors")->check(CLI::PositiveNumber);
        app.add_option("--embeddings,-e", embeddings, "word-vector text file");
    }
    if (cmd.verb == "evaluate" || cmd.verb == "explain") {
        app.add_option("--checkpoint", checkpoint, "model checkpoint");
    }
    if (cmd.verb == "evaluate") {
        app.add_option("--predictions", predictions, "external predictions CSV (id,score)");
        app.add_option("--labels", labels, "labels CSV (id,label)");
    }
    if (cmd.verb == "explain") {
        app.add_option("--text,-t", cmd.texts, "text to explain (repeatable)")->required();
    }

    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    try {
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        throw UsageError(cmd.verb + ": " + e.what());
    }

    if (!config.empty()) cmd.config_path = config;
    if (!output.empty()) cmd.output_dir = output;
    if (!embeddings.empty()) cmd.embeddings = embeddings;
    if (!checkpoint.empty()) cmd.checkpoint = checkpoint;
    if (!predictions.empty()) cmd.predictions = predictions;
    if (!labels.empty()) cmd.labels = labels;

    for (const auto& o : cmd.overrides) {
        if (o.find('=') == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
    }
    if (needs_config(cmd.verb) && !cmd.config_path) throw UsageError(cmd.verb + ": missing required --config");
    if (cmd.verb == "embed-nearest" && !cmd.embeddings && !cmd.config_path) {
        throw UsageError("embed-nearest: need --embeddings or --config");
    }
    if (cmd.verb == "evaluate") {
        if (cmd.predictions.has_value() != cmd.labels.has_value()) {
            throw UsageError("evaluate: --predictions and --labels go together");
        }
        if (!cmd.predictions && !cmd.config_path && !cmd.checkpoint) {
            throw UsageError("evaluate: need --config, --checkpoint, or --predictions with --labels");
        }
    }
    if (cmd.verb == "explain" && !cmd.config_path && !cmd.checkpoint) {
        throw UsageError("explain: need --config or --checkpoint");
    }
    return cmd;
}

fs::path RunConfig::resolve(const std::string& p) const {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

text::PipelineConfig RunConfig::pipeline() const {
    text::PipelineConfig c;
    c.lowercase = raw.get_bool("text.lowercase", c.lowercase);
    c.expand_contractions = raw.get_bool("text.expand_contractions", c.expand_contractions);
    c.strip_punctuation = raw.get_bool("text.strip_punctuation", c.strip_punctuation);
    c.max_len = static_cast<int>(raw.get_int("model.max_len", c.max_len));
    if (auto file = raw.get("text.stopwords_file")) {
        c.stopwords.clear();
        std::istringstream in(read_text(resolve(*file)));
        std::string line;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (!t.empty() && t[0] != '#') c.stopwords.insert(t);
        }
    }
    c.validate();
    return c;
}

embed::CbowConfig RunConfig::cbow() const {
    embed::CbowConfig c;
    c.window = static_cast<int>(raw.get_int("embed.window", c.window));
    c.dim = static_cast<int>(raw.get_int("embed.dim", c.dim));
    c.negative = static_cast<int>(raw.get_int("embed.negative", c.negative));
    c.epochs = static_cast<int>(raw.get_int("embed.epochs", c.epochs));
    c.initial_lr = raw.get_double("embed.initial_lr", c.initial_lr);
    c.min_lr = raw.get_double("embed.min_lr", c.min_lr);
    c.min_count = static_cast<std::size_t>(raw.get_int("embed.min_count", static_cast<long long>(c.min_count)));
    c.subsample_threshold = raw.get_double("embed.subsample", c.subsample_threshold);
    c.dynamic_window = raw.get_bool("embed.dynamic_window", c.dynamic_window);
    c.seed = static_cast<std::uint64_t>(raw.get_int("embed.seed", static_cast<long long>(c.seed)));
    c.validate();
    return c;
}

clf::ModelConfig RunConfig::model() const {
    clf::ModelConfig c;
    c.embed_dim = static_cast<int>(raw.get_int("embed.dim", c.embed_dim));
    c.max_len = static_cast<int>(raw.get_int("model.max_len", c.max_len));
    c.hidden = static_cast<int>(raw.get_int("model.hidden", c.hidden));
    c.dense1 = static_cast<int>(raw.get_int("model.dense1", c.dense1));
    c.dense1_activation = nn::parse_activation(raw.get_string("model.dense1_activation", "identity"));
    c.sequence_output = nn::parse_sequence_output(raw.get_string("model.sequence_output", "final_state"));
    c.embeddings_trainable = raw.get_bool("model.embeddings_trainable", c.embeddings_trainable);
    c.batch_size = static_cast<int>(raw.get_int("model.batch_size", c.batch_size));
    c.epochs = static_cast<int>(raw.get_int("model.epochs", c.epochs));
    c.learning_rate = raw.get_double("model.learning_rate", c.learning_rate);
    c.threshold = raw.get_double("model.threshold", c.threshold);
    c.seed = static_cast<std::uint64_t>(raw.get_int("model.seed", static_cast<long long>(c.seed)));
    c.pipeline = pipeline();
    c.validate();
    return c;
}

lime::LimeConfig RunConfig::lime() const {
    lime::LimeConfig c;
    c.n_samples = static_cast<std::size_t>(raw.get_int("explain.samples", static_cast<long long>(c.n_samples)));
    c.top_k = static_cast<std::size_t>(raw.get_int("explain.top_k", static_cast<long long>(c.top_k)));
    c.kernel_width = raw.get_double("explain.kernel_width", c.kernel_width);
    c.ridge_lambda = raw.get_double("explain.lambda", c.ridge_lambda);
    c.seed = static_cast<std::uint64_t>(raw.get_int("explain.seed", static_cast<long long>(c.seed)));
    if (c.n_samples < 2 || c.top_k < 1 || !(c.kernel_width > 0) || c.ridge_lambda < 0) {
        throw ValidationError("explain: invalid sampling/kernel/ridge settings");
    }
    return c;
}

RunConfig load_run_config(const Command& cmd) {
    RunConfig rc;
    if (cmd.config_path) {
        if (!fs::exists(*cmd.config_path)) throw IoError("config file not found: " + cmd.config_path->string());
        rc.raw = KeyValueConfig::read_file(*cmd.config_path);
        rc.base_dir = fs::absolute(*cmd.config_path).parent_path();
    } else {
        rc.base_dir = fs::current_path();
    }
    for (const auto& o : cmd.overrides) {
        auto eq = o.find('=');
        rc.raw.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
    }
    if (cmd.output_dir) {
        rc.output_dir = *cmd.output_dir;
        rc.raw.set("run.output_dir", fs::absolute(*cmd.output_dir).string());
    } else if (auto dir = rc.raw.get("run.output_dir")) {
        rc.output_dir = rc.resolve(*dir);
    } else if (const char* root = std::getenv("HSD_OUTPUT_ROOT"); root && *root) {
        std::string stem = cmd.config_path ? cmd.config_path->stem().string() : std::string("default");
        rc.output_dir = fs::path(root) / stem;
    } else {
        rc.output_dir = fs::current_path() / "runs" / (cmd.config_path ? cmd.config_path->stem().string() : "default");
    }
    return rc;
}

namespace {

// Copies the merged config next to the outputs it produced.
void record_config(const RunConfig& rc, const fs::path& dir) {
    fs::create_directories(dir);
    rc.raw.write_file(dir / "config.used");
}

std::vector<std::string> split_texts(const corpus::Dataset& d) {
    std::vector<std::string> out;
    out.reserve(d.size());
    for (const auto& ex : d) out.push_back(ex.text);
    return out;
}

int run_prepare(const Command& cmd, const RunConfig& rc) {
    const auto names = rc.raw.get_list("datasets");
    if (names.empty()) throw ValidationError("prepare: config lists no datasets");

    struct Source {
        std::string name;
        fs::path path;
        corpus::DatasetSchema schema;
        fs::path mapping;
    };
    std::vector<Source> sources;
    for (const auto& name : names) {
        const std::string prefix = "dataset." + name + ".";
        Source s{name, rc.resolve(rc.raw.require_string(prefix + "path")), {}, {}};
        s.schema.name = name;
        s.schema.text_column = rc.raw.get_string(prefix + "text_column", "text");
        s.schema.label_column = rc.raw.get_string(prefix + "label_column", "label");
        s.mapping = rc.resolve(rc.raw.require_string(prefix + "mapping"));
        if (!fs::exists(s.path)) throw IoError("dataset file not found: " + s.path.string());
        if (!fs::exists(s.mapping)) throw IoError("label mapping not found: " + s.mapping.string());
        sources.push_back(std::move(s));
    }
    const auto ratios_list = rc.raw.get_list("prepare.ratios");
    corpus::SplitRatios ratios;
    if (!ratios_list.empty()) {
        if (ratios_list.size() != 3) throw ValidationError("prepare.ratios needs three values");
        ratios = {std::stod(ratios_list[0]), std::stod(ratios_list[1]), std::stod(ratios_list[2])};
    }
    const auto seed = static_cast<std::uint64_t>(rc.raw.get_int("prepare.seed", 1));
    const bool stratified = rc.raw.get_bool("prepare.stratified", true);
    const std::string combine = rc.raw.get_string("prepare.combine", names.size() > 1 ? "balanced" : "none");
    if (combine != "balanced" && combine != "none" && combine != "concat") {
        throw ValidationError("prepare.combine must be balanced, concat or none");
    }
    std::optional<std::size_t> cap;
    if (rc.raw.contains("prepare.per_class_cap")) cap = static_cast<std::size_t>(rc.raw.get_int("prepare.per_class_cap", 0));

    if (cmd.dry_run) {
        std::cout << "prepare: " << sources.size() << " dataset(s), combine=" << combine << ", output "
                  << (rc.output_dir / "prepared").string() << " (dry run, nothing written)\n";
        return 0;
    }

    json stats_json;
    std::vector<corpus::Dataset> collapsed;
    for (const auto& s : sources) {
        auto loaded = corpus::load_dataset(s.path, s.schema);
        auto result = corpus::collapse_labels(std::move(loaded.examples), corpus::LabelMapping::read_file(s.mapping));
        stats_json["datasets"][s.name] = {{"hate", result.counts.hate},
                                          {"nonhate", result.counts.nonhate},
                                          {"total", result.counts.total},
                                          {"skipped_empty", loaded.skipped_empty}};
        collapsed.push_back(std::move(result.examples));
    }
    corpus::Dataset combined;
    if (combine == "balanced") {
        combined = corpus::combine_balanced(collapsed, seed, cap);
    } else {
        for (auto& d : collapsed) combined.insert(combined.end(), d.begin(), d.end());
    }
    auto c = corpus::stats(combined);
    stats_json["combined"] = {{"hate", c.hate}, {"nonhate", c.nonhate}, {"total", c.total}, {"mode", combine}};

    auto bundle = corpus::split(combined, ratios, seed, stratified);
    const fs::path dir = rc.output_dir / "prepared";
    corpus::write_split(bundle, dir);
    write_text(dir / "stats.json", stats_json.dump(2) + "\n");
    record_config(rc, dir);
    record_config(rc, rc.output_dir);
    std::cout << "prepared " << c.total << " examples (" << c.hate << " hate / " << c.nonhate << " nonhate) -> "
              << dir.string() << "\n";
    return 0;
}

std::vector<text::TokenSequence> embedding_corpus(const RunConfig& rc, const text::PipelineConfig& pipeline) {
    std::vector<text::TokenSequence> corpus;
    const auto train_csv = rc.output_dir / "prepared" / "train.csv";
    if (rc.raw.get_bool("embed.use_train_split", true)) {
        for (const auto& ex : corpus::read_dataset(train_csv)) corpus.push_back(text::preprocess(ex.text, pipeline));
    }
    for (const auto& extra : rc.raw.get_list("embed.corpus")) {
        std::ifstream in(rc.resolve(extra));
        if (!in) throw IoError("embedding corpus not found: " + rc.resolve(extra).string());
        std::string line;
        while (std::getline(in, line)) corpus.push_back(text::preprocess(line, pipeline));
    }
    return corpus;
}

int run_embed_train(const Command& cmd, const RunConfig& rc) {
    const auto pipeline = rc.pipeline();
    const auto cbow = rc.cbow();
    if (cmd.dry_run) {
        if (rc.raw.get_bool("embed.use_train_split", true) && !fs::exists(rc.output_dir / "prepared" / "train.csv")) {
            throw IoError("training split not found: " + (rc.output_dir / "prepared" / "train.csv").string());
        }
        std::cout << "embed-train: dim " << cbow.dim << ", window " << cbow.window << " (dry run, nothing written)\n";
        return 0;
    }
    auto sentences = embedding_corpus(rc, pipeline);
    auto vocab = embed::Vocabulary::build(sentences, cbow.min_count);
    auto result = embed::train_cbow(sentences, vocab, cbow);

    const fs::path dir = rc.output_dir / "embeddings";
    fs::create_directories(dir);
    embed::save_text(result.embeddings, dir / "vectors.txt");
    std::string log;
    for (std::size_t e = 0; e < result.epoch_objective.size(); ++e) {
        log += fmt::format("{}, {:.8f}\n", e + 1, result.epoch_objective[e]);
    }
    write_text(dir / "train_log.txt", log);
    record_config(rc, dir);
    std::cout << "embeddings: " << result.embeddings.rows() << " x " << result.embeddings.dim() << " -> "
              << (dir / "vectors.txt").string() << "\n";
    return 0;
}

int run_embed_nearest(const Command& cmd, const RunConfig& rc) {
    const fs::path path = cmd.embeddings ? *cmd.embeddings : rc.output_dir / "embeddings" / "vectors.txt";
    if (!fs::exists(path)) throw IoError("embeddings not found: " + path.string());
    if (cmd.dry_run) {
        std::cout << "embed-nearest: " << path.string() << " (dry run)\n";
        return 0;
    }
    const auto matrix = embed::load_text(path);
    for (const auto& n : embed::nearest(cmd.word, cmd.k, matrix)) std::cout << fmt::format("{}\t{:.6f}\n", n.token, n.score);
    return 0;
}

fs::path embeddings_path(const RunConfig& rc) {
    if (auto p = rc.raw.get("model.embeddings")) return rc.resolve(*p);
    return rc.output_dir / "embeddings" / "vectors.txt";
}

void check_split_inputs(const fs::path& dir) {
    for (const char* f : {"split.json", "train.csv", "validation.csv", "test.csv"}) {
        if (!fs::exists(dir / f)) throw IoError("split manifest missing: " + (dir / f).string());
    }
}

clf::TrainResult train_model(const RunConfig& rc, const clf::ModelConfig& config, const corpus::SplitBundle& splits) {
    const auto embeddings = embed::load_text(embeddings_path(rc));
    auto model = clf::Model::build(config, embeddings);
    return clf::train(model, splits);
}

void write_history(const clf::TrainHistory& h, const fs::path& dir) {
    write_text(dir / "history.json", clf::to_json(h).dump(2) + "\n");
    std::string table = "epoch  train_loss  train_acc  val_loss  val_weighted_f1\n";
    for (const auto& e : h.epochs) {
        table += fmt::format("{:>5}  {:>10.6f}  {:>9.4f}  {:>8.6f}  {:>15.4f}{}\n", e.epoch, e.train_loss,
                             e.train_accuracy, e.validation_loss, e.validation_weighted_f1,
                             e.epoch == h.selected_epoch ? "  *" : "");
    }
    write_text(dir / "history.txt", table);
}

int run_train(const Command& cmd, const RunConfig& rc) {
    const auto config = rc.model();
    const fs::path split_dir = rc.output_dir / "prepared";
    check_split_inputs(split_dir);
    if (!fs::exists(embeddings_path(rc))) throw IoError("embeddings not found: " + embeddings_path(rc).string());
    if (cmd.dry_run) {
        std::cout << "train: inputs present (dry run, nothing written)\n";
        return 0;
    }
    auto result = train_model(rc, config, corpus::read_split(split_dir));

    const fs::path dir = rc.output_dir / "models";
    fs::create_directories(dir);
    clf::save(result.best, dir / "model.ckpt");
    write_history(result.history, dir);
    record_config(rc, dir);
    std::cout << "model (epoch " << result.history.selected_epoch << ") -> " << (dir / "model.ckpt").string() << "\n";
    return 0;
}

int run_evaluate(const Command& cmd, const RunConfig& rc) {
    const fs::path dir = rc.output_dir / "reports";
    if (cmd.predictions) {
        if (!fs::exists(*cmd.predictions)) throw IoError("predictions file not found: " + cmd.predictions->string());
        if (!fs::exists(*cmd.labels)) throw IoError("labels file not found: " + cmd.labels->string());
        if (cmd.dry_run) {
            std::cout << "evaluate: external files present (dry run)\n";
            return 0;
        }
        auto report = eval::score_external(*cmd.predictions, *cmd.labels, rc.raw.get_double("model.threshold", 0.5));
        fs::create_directories(dir);
        write_text(dir / "external_metrics.json", eval::to_json(report).dump(2) + "\n");
        write_text(dir / "external_metrics.txt", eval::render_table(report, "external"));
        record_config(rc, dir);
        std::cout << eval::render_table(report, "external");
        return 0;
    }

    const fs::path ckpt = cmd.checkpoint ? *cmd.checkpoint : rc.output_dir / "models" / "model.ckpt";
    const fs::path test_csv = rc.output_dir / "prepared" / "test.csv";
    if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + ckpt.string());
    if (!fs::exists(test_csv)) throw IoError("test split not found: " + test_csv.string());
    if (cmd.dry_run) {
        std::cout << "evaluate: inputs present (dry run)\n";
        return 0;
    }
    const auto model = clf::load(ckpt);
    const auto test = corpus::read_dataset(test_csv);
    const auto probs = model.predict(split_texts(test));
    std::vector<double> scores(probs.begin(), probs.end());
    std::vector<corpus::Label> truth;
    std::vector<eval::ScoredId> preds;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (!test[i].binary_label) throw ValidationError("test example " + test[i].id + " has no label");
        truth.push_back(*test[i].binary_label);
        preds.push_back({test[i].id, scores[i]});
    }
    const auto report = eval::evaluate_scores(scores, truth, model.config().threshold);

    fs::create_directories(dir);
    write_text(dir / "metrics.json", eval::to_json(report).dump(2) + "\n");
    write_text(dir / "metrics.txt", eval::render_table(report, "bilstm"));
    eval::write_predictions(dir / "predictions.csv", preds);
    {
        std::ofstream out(dir / "labels.csv", std::ios::binary);
        csv::write_row(out, {"id", "label"});
        for (std::size_t i = 0; i < test.size(); ++i) {
            csv::write_row(out, {test[i].id, std::string(corpus::to_string(truth[i]))});
        }
    }
    record_config(rc, dir);
    std::cout << eval::render_table(report, "bilstm");
    return 0;
}

int run_explain(const Command& cmd, const RunConfig& rc) {
    const fs::path ckpt = cmd.checkpoint ? *cmd.checkpoint : rc.output_dir / "models" / "model.ckpt";
    if (!fs::exists(ckpt)) throw IoError("checkpoint not found: " + ckpt.string());
    const auto lime_cfg = rc.lime();
    if (cmd.dry_run) {
        std::cout << "explain: " << cmd.texts.size() << " text(s) (dry run)\n";
        return 0;
    }
    const auto model = clf::load(ckpt);
    const lime::Predictor predictor = [&](const std::vector<std::string>& texts) {
        auto p = model.predict(texts);
        return std::vector<double>(p.begin(), p.end());
    };

    const fs::path dir = rc.output_dir / "explanations";
    fs::create_directories(dir);
    for (std::size_t i = 0; i < cmd.texts.size(); ++i) {
        auto e = lime::explain(predictor, cmd.texts[i], model.config().pipeline, lime_cfg);
        auto j = lime::to_json(e);
        j["text"] = cmd.texts[i];
        const std::string stem = fmt::format("explanation_{}", i + 1);
        write_text(dir / (stem + ".json"), j.dump(2) + "\n");
        write_text(dir / (stem + ".html"),
                   lime::render_html(e, text::preprocess(cmd.texts[i], model.config().pipeline), cmd.texts[i]));
        std::cout << fmt::format("[{}] P(hate)={:.4f}", i + 1, e.prediction);
        for (const auto& t : e.tokens) std::cout << fmt::format("  {}:{:+.4f}", t.token, t.weight);
        std::cout << "\n";
    }
    record_config(rc, dir);
    return 0;
}

int run_sweep(const Command& cmd, const RunConfig& rc) {
    const auto base = rc.model();
    const fs::path split_dir = rc.output_dir / "prepared";
    check_split_inputs(split_dir);
    if (!fs::exists(embeddings_path(rc))) throw IoError("embeddings not found: " + embeddings_path(rc).string());
    if (cmd.dry_run) {
        std::cout << "sweep-activation: 3 trainings (dry run, nothing written)\n";
        return 0;
    }
    const auto splits = corpus::read_split(split_dir);

    std::string table = fmt::format("{:<10} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "activation", "best_epoch",
                                    "val_loss", "val_f1", "test_f1", "test_auc");
    json rows = json::array();
    for (auto act : {nn::Activation::Identity, nn::Activation::Relu, nn::Activation::Sigmoid}) {
        auto config = base;
        config.dense1_activation = act;
        auto result = train_model(rc, config, splits);
        auto report = eval::report(result.best, splits.test);
        const auto& sel = result.history.epochs.at(static_cast<std::size_t>(result.history.selected_epoch - 1));
        table += fmt::format("{:<10} {:>10} {:>10.6f} {:>10.4f} {:>10.4f} {:>10}\n", nn::to_string(act),
                             result.history.selected_epoch, sel.validation_loss, sel.validation_weighted_f1,
                             report.metrics.weighted.f1, report.auc ? fmt::format("{:.4f}", *report.auc) : "n/a");
        rows.push_back({{"activation", nn::to_string(act)},
                        {"selected_epoch", result.history.selected_epoch},
                        {"validation_loss", sel.validation_loss},
                        {"validation_weighted_f1", sel.validation_weighted_f1},
                        {"test", eval::to_json(report)}});
    }
    const fs::path dir = rc.output_dir / "reports";
    fs::create_directories(dir);
    write_text(dir / "activation_sweep.txt", table);
    write_text(dir / "activation_sweep.json", rows.dump(2) + "\n");
    record_config(rc, dir);
    std::cout << table;
    return 0;
}

}  // namespace

int run(const Command& cmd) {
    const RunConfig rc = load_run_config(cmd);
    if (cmd.verb == "prepare") return run_prepare(cmd, rc);
    if (cmd.verb == "embed-train") return run_embed_train(cmd, rc);
    if (cmd.verb == "embed-nearest") return run_embed_nearest(cmd, rc);
    if (cmd.verb == "train") return run_train(cmd, rc);
    if (cmd.verb == "evaluate") return run_evaluate(cmd, rc);
    if (cmd.verb == "explain") return run_explain(cmd, rc);
    if (cmd.verb == "sweep-activation") return run_sweep(cmd, rc);
    throw UsageError("unknown verb '" + cmd.verb + "'");
}

int main(int argc, char** argv) {
    spdlog::set_pattern("[%l] %v");
    if (const char* lvl = std::getenv("HSD_LOG_LEVEL")) spdlog::set_level(spdlog::level::from_str(lvl));
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(parse(args));
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Usage);
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Io);
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Validation);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Numeric);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::Usage);
    }
}

}  // namespace hsd::cli
