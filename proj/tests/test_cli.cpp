#include <doctest.h>

#include <sys/wait.h>

#include "hsd/classifier.hpp"
#include "hsd/cli.hpp"
#include "hsd/error.hpp"
#include "hsd/kvconfig.hpp"
#include "support.hpp"

using namespace hsd;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code;
    std::string out;
};

RunResult run_cli(const std::string& args, const fs::path& log) {
    const char* bin = std::getenv("HSD_CLI");
    REQUIRE(bin != nullptr);
    const std::string cmd = fmt::format("'{}' {} > '{}' 2>&1", bin, args, log.string());
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_file(log)};
}

// Keyword data plus a small-model config in dir.
fs::path write_project(const fs::path& dir) {
    std::string csv = "text,label\n";
    for (const auto& ex : test::keyword_dataset(400, 5)) csv += fmt::format("{},{}\n", ex.text, ex.raw_label);
    test::write_file(dir / "data/keywords.csv", csv);
    test::write_file(dir / "data/keywords.map", "hate = hate\nnonhate = nonhate\n");
    test::write_file(dir / "run.conf", R"(# small end-to-end run
datasets = kw
dataset.kw.path = data/keywords.csv
dataset.kw.text_column = text
dataset.kw.label_column = label
dataset.kw.mapping = data/keywords.map
prepare.combine = none
prepare.seed = 3
embed.dim = 8
embed.epochs = 2
embed.min_count = 1
model.max_len = 20
model.hidden = 6
model.dense1 = 4
model.batch_size = 32
model.epochs = 2
model.learning_rate = 0.01
explain.samples = 200
)");
    return dir / "run.conf";
}

}  // namespace

TEST_CASE("parse: verbs and arguments") {
    auto c = cli::parse({"embed-nearest", "--word", "fc*", "--k", "10", "--embeddings", "e.txt"});
    CHECK(c.verb == "embed-nearest");
    CHECK(c.word == "fc*");
    CHECK(c.k == 10);
    CHECK(c.embeddings == fs::path("e.txt"));

    auto t = cli::parse({"train", "--config", "x.conf", "--set", "model.epochs=3", "--dry-run"});
    CHECK(t.dry_run);
    CHECK(t.overrides == std::vector<std::string>{"model.epochs=3"});

    CHECK_THROWS_AS(cli::parse({"train"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse({"frobnicate"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse({}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse({"embed-nearest", "--embeddings", "e.txt"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse({"train", "--config", "x", "--set", "novalue"}), cli::UsageError);
    CHECK_THROWS_AS(cli::parse({"train", "--config", "x", "--bogus"}), cli::UsageError);
}

TEST_CASE("exit codes") {
    test::TempDir dir("cli");
    auto r = run_cli("frobnicate", dir / "log");
    CHECK(r.code == 1);
    CHECK(r.out.find("frobnicate") != std::string::npos);
    CHECK(run_cli("train", dir / "log").code == 1);
    CHECK(run_cli("train --config missing.conf", dir / "log").code == 2);

    auto conf = write_project(dir.path);
    auto t = run_cli(fmt::format("train --config '{}' --output '{}'", conf.string(), (dir / "empty").string()), dir / "log");
    CHECK(t.code == 2);
    CHECK(run_cli(fmt::format("train --config '{}' --set model.hidden=0 --output '{}'", conf.string(),
                              (dir / "empty").string()),
                  dir / "log")
              .code == 3);
}

TEST_CASE("dry run writes nothing") {
    test::TempDir dir("cli");
    auto conf = write_project(dir.path);
    const auto out = dir / "out";
    auto r = run_cli(fmt::format("prepare --config '{}' --output '{}' --dry-run", conf.string(), out.string()), dir / "log");
    CHECK(r.code == 0);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("evaluate over the perfect fixture checkpoint") {
    test::TempDir dir("cli");
    clf::save(test::perfect_keyword_model(), dir / "perfect.ckpt");
    corpus::Dataset t{{"a", "hello scum", "hate", corpus::Label::Hate},
                      {"b", "hello world", "nonhate", corpus::Label::NonHate},
                      {"c", "friend scum world", "hate", corpus::Label::Hate},
                      {"d", "friend", "nonhate", corpus::Label::NonHate}};
    fs::create_directories(dir / "run/prepared");
    corpus::write_dataset(t, dir / "run/prepared/test.csv");
    auto r = run_cli(fmt::format("evaluate --checkpoint '{}' --output '{}'", (dir / "perfect.ckpt").string(),
                                 (dir / "run").string()),
                     dir / "log");
    REQUIRE(r.code == 0);
    auto metrics = nlohmann::json::parse(test::read_file(dir / "run/reports/metrics.json"));
    CHECK(metrics["weighted"]["f1"] == 1.0);

    auto ext = run_cli(fmt::format("evaluate --predictions '{}' --labels '{}' --output '{}'",
                                   (dir / "run/reports/predictions.csv").string(),
                                   (dir / "run/reports/labels.csv").string(), (dir / "run").string()),
                       dir / "log");
    REQUIRE(ext.code == 0);
    auto external = nlohmann::json::parse(test::read_file(dir / "run/reports/external_metrics.json"));
    CHECK(external == metrics);
}

TEST_CASE("full pipeline through every verb, replayable") {
    test::TempDir dir("cli");
    auto conf = write_project(dir.path);
    std::vector<fs::path> runs{dir / "a", dir / "b"};
    for (const auto& out : runs) {
        const auto base = fmt::format("--config '{}' --output '{}'", conf.string(), out.string());
        for (const char* verb : {"prepare", "embed-train", "train", "evaluate"}) {
            auto r = run_cli(fmt::format("{} {}", verb, base), dir / "log");
            INFO(verb << ": " << r.out);
            REQUIRE(r.code == 0);
        }
        auto ex = run_cli(fmt::format("explain {} --text 'w1 w2 scum w3' --text 'w4 w5 w6'", base), dir / "log");
        INFO(ex.out);
        REQUIRE(ex.code == 0);
        auto nn = run_cli(fmt::format("embed-nearest --word w1 --k 3 --embeddings '{}'",
                                      (out / "embeddings/vectors.txt").string()),
                          dir / "log");
        REQUIRE(nn.code == 0);
        CHECK(std::count(nn.out.begin(), nn.out.end(), '\n') == 3);
    }
    for (const char* f : {"prepared/train.csv", "prepared/test.csv", "prepared/split.json", "prepared/stats.json",
                          "embeddings/vectors.txt", "embeddings/train_log.txt", "models/model.ckpt",
                          "models/history.json", "reports/metrics.json", "reports/predictions.csv",
                          "explanations/explanation_1.json", "explanations/explanation_1.html"}) {
        INFO(f);
        REQUIRE(fs::exists(runs[0] / f));
        CHECK(test::read_file(runs[0] / f) == test::read_file(runs[1] / f));
    }
    for (const char* sub : {"", "prepared", "embeddings", "models", "reports", "explanations"}) {
        INFO(sub);
        CHECK(fs::exists(runs[0] / sub / "config.used"));
    }
    auto used = KeyValueConfig::read_file(runs[0] / "models/config.used");
    CHECK(used.get_int("model.hidden", 0) == 6);

    auto log = test::read_file(runs[0] / "embeddings/train_log.txt");
    CHECK(std::count(log.begin(), log.end(), '\n') == 2);

    auto sweep = run_cli(fmt::format("sweep-activation --config '{}' --output '{}' --set model.epochs=1", conf.string(),
                                     runs[0].string()),
                         dir / "log");
    REQUIRE(sweep.code == 0);
    auto rows = nlohmann::json::parse(test::read_file(runs[0] / "reports/activation_sweep.json"));
    CHECK(rows.size() == 3);
    auto table = test::read_file(runs[0] / "reports/activation_sweep.txt");
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);
    auto overrides = KeyValueConfig::read_file(runs[0] / "reports/config.used");
    CHECK(overrides.get_int("model.epochs", 0) == 1);
}

TEST_CASE("shipped configs validate") {
    for (const auto& entry : fs::directory_iterator(test::source_dir() / "configs")) {
        if (entry.path().extension() != ".conf") continue;
        INFO(entry.path().string());
        cli::Command cmd;
        cmd.verb = "train";
        cmd.config_path = entry.path();
        auto rc = cli::load_run_config(cmd);
        CHECK_NOTHROW(rc.model().validate());
        CHECK_NOTHROW(rc.cbow().validate());
        CHECK_NOTHROW((void)rc.lime());
        CHECK(rc.output_dir.is_absolute());
    }
}
