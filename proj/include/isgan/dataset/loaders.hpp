#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>

#include <json.hpp>

#include "isgan/dataset/synthetic.hpp"
#include "isgan/image_io.hpp"

namespace isgan::data {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadedDataset {
    std::vector<ImageRecord> train, query, gallery;
    int n_train_ids = 0;
    int n_test_ids = 0;
    int rejected_files = 0;
    int excluded_junk = 0;
};

namespace detail {

inline bool is_image_file(const fs::path& p) {
    auto e = p.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ".jpg" || e == ".jpeg" || e == ".png" || e == ".bmp";
}

inline std::vector<fs::path> sorted_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

/// Remap arbitrary id keys to a dense [0, C) range (sorted key order).
inline std::map<std::string, int> dense_remap(const std::set<std::string>& keys) {
    std::map<std::string, int> m;
    int next = 0;
    for (const auto& k : keys) m[k] = next++;
    return m;
}

}  // namespace detail

/// Market-1501 directory convention: bounding_box_train/, query/,
/// bounding_box_test/ with filenames `{id}_c{cam}...`. Files with id <= 0
/// (junk and distractors) are excluded up front since the evaluation protocol
/// never scores them; malformed names are rejected with a warning. Identities
/// are densely remapped per split role (train vs. query+gallery).
inline LoadedDataset load_market_layout(
    const std::string& root,
    const std::map<std::string, std::string>& split_dirs = {{"train", "bounding_box_train"},
                                                            {"query", "query"},
                                                            {"gallery", "bounding_box_test"}}) {
    static const std::regex name_re(R"(^(-?\d+)_c(\d+).*)");
    LoadedDataset ds;

    struct Parsed {
        fs::path path;
        int id;
        int cam;
    };
    std::map<std::string, std::vector<Parsed>> parsed;
    for (const auto& [role, sub] : split_dirs) {
        fs::path dir = fs::path(root) / sub;
        if (!fs::is_directory(dir)) throw DatasetError("empty split: missing directory " + dir.string());
        for (const auto& p : detail::sorted_files(dir)) {
            std::smatch m;
            std::string name = p.filename().string();
            if (!std::regex_match(name, m, name_re)) {
                std::cerr << "warning: rejecting malformed filename " << name << "\n";
                ++ds.rejected_files;
                continue;
            }
            int id = std::stoi(m[1]);
            if (id <= 0) {
                ++ds.excluded_junk;
                continue;
            }
            parsed[role].push_back({p, id, std::stoi(m[2])});
        }
        if (parsed[role].empty())
            throw DatasetError("empty split: no usable images in " + dir.string());
    }

    std::set<std::string> train_keys, test_keys;
    for (const auto& r : parsed["train"]) train_keys.insert(std::to_string(r.id));
    for (const auto& r : parsed["query"]) test_keys.insert(std::to_string(r.id));
    for (const auto& r : parsed["gallery"]) test_keys.insert(std::to_string(r.id));
    auto train_map = detail::dense_remap(train_keys);
    auto test_map = detail::dense_remap(test_keys);

    auto emit = [&](const std::string& role, Split split, const std::map<std::string, int>& idmap,
                    std::vector<ImageRecord>& out) {
        for (const auto& r : parsed[role]) {
            ImageRecord rec;
            rec.image = read_image(r.path.string());
            rec.identity = idmap.at(std::to_string(r.id));
            rec.camera_id = r.cam;
            rec.split = split;
            rec.orig_id = std::to_string(r.id);
            rec.path = r.path.string();
            out.push_back(std::move(rec));
        }
    };
    emit("train", Split::Train, train_map, ds.train);
    emit("query", Split::Query, test_map, ds.query);
    emit("gallery", Split::Gallery, test_map, ds.gallery);
    ds.n_train_ids = static_cast<int>(train_map.size());
    ds.n_test_ids = static_cast<int>(test_map.size());
    return ds;
}

/// Celeb-reID convention: train/, query/, gallery/ each containing one
/// subdirectory per identity. Camera ids are fixed to 0.
inline LoadedDataset load_celeb_layout(const std::string& root) {
    LoadedDataset ds;
    std::map<std::string, std::vector<std::pair<std::string, fs::path>>> parsed;
    for (const std::string role : {"train", "query", "gallery"}) {
        fs::path dir = fs::path(root) / role;
        if (!fs::is_directory(dir)) throw DatasetError("empty split: missing directory " + dir.string());
        std::vector<fs::path> iddirs;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_directory()) iddirs.push_back(e.path());
        std::sort(iddirs.begin(), iddirs.end());
        for (const auto& iddir : iddirs)
            for (const auto& p : detail::sorted_files(iddir))
                parsed[role].push_back({iddir.filename().string(), p});
        if (parsed[role].empty())
            throw DatasetError("empty split: no usable images in " + dir.string());
    }
    std::set<std::string> train_keys, test_keys;
    for (const auto& [k, p] : parsed["train"]) train_keys.insert(k);
    for (const auto& [k, p] : parsed["query"]) test_keys.insert(k);
    for (const auto& [k, p] : parsed["gallery"]) test_keys.insert(k);
    auto train_map = detail::dense_remap(train_keys);
    auto test_map = detail::dense_remap(test_keys);
    auto emit = [&](const std::string& role, Split split, const std::map<std::string, int>& idmap,
                    std::vector<ImageRecord>& out) {
        for (const auto& [k, p] : parsed[role]) {
            ImageRecord rec;
            rec.image = read_image(p.string());
            rec.identity = idmap.at(k);
            rec.camera_id = 0;
            rec.split = split;
            rec.orig_id = k;
            rec.path = p.string();
            out.push_back(std::move(rec));
        }
    };
    emit("train", Split::Train, train_map, ds.train);
    emit("query", Split::Query, test_map, ds.query);
    emit("gallery", Split::Gallery, test_map, ds.gallery);
    ds.n_train_ids = static_cast<int>(train_map.size());
    ds.n_test_ids = static_cast<int>(test_map.size());
    return ds;
}

inline json factors_to_json(const SyntheticFactors& f) {
    return json{{"torso_color", f.torso_color}, {"leg_color", f.leg_color},
                {"body_shape", f.body_shape},   {"x_offset", f.x_offset},
                {"y_offset", f.y_offset},       {"scale", f.scale},
                {"bg_color", f.bg_color},       {"occlusion", f.occlusion}};
}

inline SyntheticFactors factors_from_json(const json& j) {
    SyntheticFactors f;
    f.torso_color = j.at("torso_color");
    f.leg_color = j.at("leg_color");
    f.body_shape = j.at("body_shape");
    f.x_offset = j.at("x_offset");
    f.y_offset = j.at("y_offset");
    f.scale = j.at("scale");
    f.bg_color = j.at("bg_color");
    f.occlusion = j.at("occlusion");
    return f;
}

/// One PNG per record plus manifest.json (path, identity, camera, split,
/// factors).
inline void write_synth_dataset(const SynthDataset& ds, const std::string& dir) {
    fs::create_directories(fs::path(dir));
    json manifest;
    manifest["version"] = 1;
    manifest["n_train_ids"] = ds.n_train_ids;
    manifest["n_test_ids"] = ds.n_test_ids;
    json records = json::array();
    int counter = 0;
    auto dump = [&](const std::vector<ImageRecord>& recs) {
        for (const auto& r : recs) {
            std::string sub = split_name(r.split);
            fs::create_directories(fs::path(dir) / sub);
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s/%04d_c%d_%05d.png", sub.c_str(), r.identity,
                          r.camera_id, counter++);
            write_image_png((fs::path(dir) / buf).string(), r.image);
            json rec{{"path", buf},
                     {"identity", r.identity},
                     {"camera_id", r.camera_id},
                     {"split", sub},
                     {"factors", factors_to_json(*r.factors)}};
            records.push_back(std::move(rec));
        }
    };
    dump(ds.train);
    dump(ds.query);
    dump(ds.gallery);
    manifest["records"] = std::move(records);
    std::ofstream os(fs::path(dir) / "manifest.json");
    os << manifest.dump(2) << "\n";
}

inline SynthDataset load_synth_dataset(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream is(mpath);
    if (!is) throw DatasetError("missing dataset manifest: " + mpath.string());
    json manifest;
    is >> manifest;
    SynthDataset ds;
    ds.n_train_ids = manifest.at("n_train_ids");
    ds.n_test_ids = manifest.at("n_test_ids");
    for (const auto& rec : manifest.at("records")) {
        ImageRecord r;
        r.image = read_image((fs::path(dir) / rec.at("path").get<std::string>()).string());
        r.identity = rec.at("identity");
        r.camera_id = rec.at("camera_id");
        r.split = split_from_name(rec.at("split"));
        r.orig_id = std::to_string(r.identity);
        r.path = rec.at("path");
        r.factors = factors_from_json(rec.at("factors"));
        switch (r.split) {
            case Split::Train: ds.train.push_back(std::move(r)); break;
            case Split::Query: ds.query.push_back(std::move(r)); break;
            case Split::Gallery: ds.gallery.push_back(std::move(r)); break;
        }
    }
    if (ds.train.empty()) throw DatasetError("empty split: no train records in manifest");
    return ds;
}

}  // namespace isgan::data
