#pragma once

// Command-line front end. `run` is the whole program minus process setup, so
// tests and the acceptance harness can drive it in-process.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pansharp/train.hpp"

namespace pansharp::cli {

enum ExitCode : int { kOk = 0, kNumeric = 1, kIoOrConfig = 2 };

// Experiment size that runs in minutes on one core.
struct DeskDefaults {
    static constexpr std::size_t layers = 4;
    static constexpr std::size_t width = 16;
    static constexpr std::size_t epochs = 30;
    static constexpr std::size_t size = 64;
    static constexpr std::size_t ratio = 4;
    static constexpr std::size_t bands = 4;
    static constexpr std::size_t n_train = 200;
    static constexpr std::size_t n_val = 20;
    static constexpr std::size_t n_test = 20;
    static constexpr std::uint64_t data_seed = 2024;
};

// Everything needed to repeat a training run. Written as run.json next to
// the outputs of train, ablate and sweep.
struct RunConfig {
    std::string command = "train";
    std::string data;
    // Degradation of the dataset the run used; filled in when the data is loaded.
    std::optional<DegradationSpec> spec;
    NetworkConfig network;
    TrainOptions train;
};

RunConfig default_run_config();
nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig read_run_config(const std::filesystem::path& file);
void write_run_config(const std::filesystem::path& file, const RunConfig& c);

// Per-epoch trace with round-trip precision: epoch,train_loss,val_psnr.
void write_history(const std::filesystem::path& file, const std::vector<EpochReport>& history);

// 8-bit binary PPM of the first three bands (or the single band as grey).
void write_ppm(const std::filesystem::path& file, const Tensor<float>& image);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pansharp::cli
