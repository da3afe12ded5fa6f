#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsd/classifier.hpp"
#include "hsd/embed.hpp"
#include "hsd/error.hpp"
#include "hsd/explain.hpp"
#include "hsd/kvconfig.hpp"
#include "hsd/textprep.hpp"

namespace hsd::cli {

class UsageError : public Error {
public:
    using Error::Error;
};

enum class ExitCode : int {
    Ok = 0,
    Usage = 1,
    Io = 2,
    Validation = 3,
    Numeric = 4,
};

inline const std::vector<std::string> kVerbs = {"prepare", "train", "embed-train", "embed-nearest",
                                                "evaluate", "explain", "sweep-activation"};

struct Command {
    std::string verb;
    std::optional<std::filesystem::path> config_path;
    std::vector<std::string> overrides;  // "key=value"
    std::optional<std::filesystem::path> output_dir;
    bool dry_run = false;

    // embed-nearest
    std::string word;
    std::size_t k = 10;
    std::optional<std::filesystem::path> embeddings;

    // evaluate / explain
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> predictions;
    std::optional<std::filesystem::path> labels;
    std::vector<std::string> texts;
};

// Throws UsageError naming the offending argument.
Command parse(const std::vector<std::string>& args);

// Resolved configuration for a run: the merged key/value file plus typed views.
struct RunConfig {
    KeyValueConfig raw;
    std::filesystem::path base_dir;  // relative paths in the config resolve here
    std::filesystem::path output_dir;

    [[nodiscard]] std::filesystem::path resolve(const std::string& p) const;
    [[nodiscard]] text::PipelineConfig pipeline() const;
    [[nodiscard]] embed::CbowConfig cbow() const;
    [[nodiscard]] clf::ModelConfig model() const;
    [[nodiscard]] lime::LimeConfig lime() const;
};

// Reads the config file (if any), applies overrides, picks the output root
// (flag, then run.output_dir, then $HSD_OUTPUT_ROOT, then ./runs).
RunConfig load_run_config(const Command& cmd);

int run(const Command& cmd);

// Entry point for the executable: parse + run with exit-code mapping.
int main(int argc, char** argv);

}  // namespace hsd::cli
