#include "pansharp/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

namespace pansharp {

namespace fs = std::filesystem;

nlohmann::json spec_to_json(const DegradationSpec& spec) {
    const std::size_t k = spec.blur.dim(0);
    std::vector<std::vector<double>> blur(k, std::vector<double>(k));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) blur[i][j] = spec.blur[i * k + j];
    return {{"blur", blur}, {"ratio", spec.ratio}, {"spectral", spec.spectral}, {"normalization", kNormalizationMode}};
}

DegradationSpec spec_from_json(const nlohmann::json& j) {
    DegradationSpec spec;
    try {
        const auto blur = j.at("blur").get<std::vector<std::vector<double>>>();
        const std::size_t k = blur.size();
        spec.blur = Tensor<double>({k, k});
        for (std::size_t i = 0; i < k; ++i) {
            if (blur[i].size() != k) throw IoError("spec.json: blur kernel is not square");
            for (std::size_t j2 = 0; j2 < k; ++j2) spec.blur[i * k + j2] = blur[i][j2];
        }
        spec.ratio = j.at("ratio").get<std::size_t>();
        spec.spectral = j.at("spectral").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("spec.json: ") + e.what());
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("spec.json: ") + e.what());
    }
    return spec;
}

Dataset synthesize_dataset(std::size_t n_train, std::size_t n_val, std::size_t n_test, std::size_t size,
                           const DegradationSpec& spec, std::uint64_t seed) {
    spec.validate();
    if (size == 0 || size % spec.ratio != 0)
        throw std::invalid_argument("scene size " + std::to_string(size) + " must be a positive multiple of ratio " +
                                    std::to_string(spec.ratio));
    Dataset data;
    data.spec = spec;
    std::mt19937_64 seeds(seed);
    auto make = [&](std::size_t n, std::vector<Sample>& out) {
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint64_t scene_seed = seeds();
            const Scene scene = synthesize_scene(scene_seed, size * spec.ratio, size * spec.ratio, spec);
            // scene.lrms plays the role of the original multispectral image
            // and scene.pan that of the r-times finer panchromatic image.
            ImagePair pair = wald_degrade(scene.lrms, scene.pan, spec);
            std::ostringstream id;
            id << std::setw(4) << std::setfill('0') << i;
            out.push_back({id.str(), std::move(pair.lrms), std::move(pair.pan), std::move(*pair.hrms_gt)});
        }
    };
    make(n_train, data.train);
    make(n_val, data.val);
    make(n_test, data.test);
    return data;
}

void write_dataset(const fs::path& root, const Dataset& data) {
    std::error_code ec;
    for (const char* split : {"train", "val", "test"}) {
        fs::create_directories(root / split, ec);
        if (ec) throw IoError("cannot create " + (root / split).string() + ": " + ec.message());
    }
    {
        std::ofstream f(root / "spec.json");
        if (!f) throw IoError("cannot write " + (root / "spec.json").string());
        f << spec_to_json(data.spec).dump(2) << '\n';
    }
    auto write_split = [&](const char* split, const std::vector<Sample>& samples) {
        for (const auto& s : samples) {
            save_ten(root / split / (s.id + "_lrms.ten"), s.lrms);
            save_ten(root / split / (s.id + "_pan.ten"), s.pan);
            save_ten(root / split / (s.id + "_gt.ten"), s.gt);
        }
    };
    write_split("train", data.train);
    write_split("val", data.val);
    write_split("test", data.test);
}

Dataset read_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("dataset directory " + root.string() + " does not exist");
    Dataset data;
    {
        std::ifstream f(root / "spec.json");
        if (!f) throw IoError("dataset " + root.string() + " has no spec.json");
        try {
            data.spec = spec_from_json(nlohmann::json::parse(f));
        } catch (const nlohmann::json::parse_error& e) {
            throw IoError("spec.json: " + std::string(e.what()));
        }
    }
    auto read_split = [&](const char* split, std::vector<Sample>& out) {
        const fs::path dir = root / split;
        if (!fs::is_directory(dir)) return;
        std::set<std::string> ids;
        const std::string suffix = "_lrms.ten";
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > suffix.size() && name.ends_with(suffix)) ids.insert(name.substr(0, name.size() - suffix.size()));
        }
        for (const auto& id : ids) {
            Sample s;
            s.id = id;
            s.lrms = load_ten(dir / (id + "_lrms.ten"));
            s.pan = load_ten(dir / (id + "_pan.ten"));
            s.gt = load_ten(dir / (id + "_gt.ten"));
            out.push_back(std::move(s));
        }
    };
    read_split("train", data.train);
    read_split("val", data.val);
    read_split("test", data.test);
    return data;
}

}  // namespace pansharp
