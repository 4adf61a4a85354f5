#include "decennt/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "decennt/error.hpp"
#include "decennt/io_util.hpp"
#include "decennt/rng.hpp"

namespace decennt {

namespace {

constexpr char kMagic[4] = {'D', 'C', 'N', 'T'};
constexpr std::uint16_t kDatasetVersion = 1;

std::uint32_t payload_crc(const std::uint8_t* data, std::size_t size) {
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(size)));
}

std::string synth_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "sample-%06zu", index);
    return buf;
}

}  // namespace

std::size_t Dataset::count_class(int label) const {
    std::size_t c = 0;
    for (const auto& s : samples) {
        if (s.label == label) ++c;
    }
    return c;
}

void Dataset::validate() const {
    if (samples.empty()) throw Error::validation("dataset: no samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = samples[i];
        if (s.series.rows != components || s.series.cols != timepoints) {
            throw Error::validation("dataset: sample " + s.id + " has mismatched shape");
        }
        if (s.label != 0 && s.label != 1) {
            throw Error::validation("dataset: sample " + s.id + " has non-binary label");
        }
        for (double v : s.series.data) {
            if (!std::isfinite(v)) throw Error::validation("dataset: sample " + s.id + " contains non-finite values");
        }
        if (s.event_mask && s.event_mask->size() != timepoints) {
            throw Error::validation("dataset: sample " + s.id + " mask length differs from timepoints");
        }
    }
    if (count_class(0) == 0 || count_class(1) == 0) {
        throw Error::validation("dataset: both classes must be present");
    }
}

void save_dataset(const std::string& path, const Dataset& dataset) {
    if (dataset.samples.empty()) throw Error::validation("save_dataset: empty dataset");
    std::vector<std::uint8_t> out;
    out.reserve(17 + dataset.samples.size() * (2 + dataset.timepoints + dataset.components * dataset.timepoints * 8));
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u16(out, kDatasetVersion);
    put_u32(out, static_cast<std::uint32_t>(dataset.components));
    put_u32(out, static_cast<std::uint32_t>(dataset.timepoints));
    put_u32(out, static_cast<std::uint32_t>(dataset.samples.size()));

    const std::size_t payload_start = out.size();
    for (const auto& s : dataset.samples) {
        out.push_back(static_cast<std::uint8_t>(s.label));
        out.push_back(s.event_mask ? 1 : 0);
        if (s.event_mask) {
            for (std::uint8_t b : *s.event_mask) out.push_back(b ? 1 : 0);
        }
        for (double v : s.series.data) put_f64(out, v);
    }
    const std::uint32_t crc = payload_crc(out.data() + payload_start, out.size() - payload_start);
    put_u32(out, crc);
    atomic_write_bytes(path, out);
}

Dataset load_dataset(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 18) throw Error::format("dataset file too short: " + path);
    ByteReader r(bytes.data(), bytes.size());

    std::uint8_t magic[4];
    r.bytes(magic, 4);
    if (!std::equal(magic, magic + 4, kMagic)) throw Error::format("bad magic, not a DCNT dataset: " + path);
    const std::uint16_t version = r.u16();
    if (version != kDatasetVersion) throw Error::format("unsupported dataset version");
    Dataset ds;
    ds.components = r.u32();
    ds.timepoints = r.u32();
    const std::uint32_t count = r.u32();
    if (ds.components == 0 || ds.timepoints == 0 || count == 0) {
        throw Error::format("dataset header has zero dimension");
    }

    const std::size_t payload_start = r.position();
    ds.samples.reserve(count);
    for (std::uint32_t idx = 0; idx < count; ++idx) {
        Sample s;
        s.id = synth_id(idx);
        const std::uint8_t label = r.u8();
        if (label > 1) throw Error::format("sample " + s.id + ": label byte out of range");
        s.label = label;
        const std::uint8_t has_mask = r.u8();
        if (has_mask > 1) throw Error::format("sample " + s.id + ": mask flag out of range");
        if (has_mask) {
            std::vector<std::uint8_t> mask(ds.timepoints);
            r.bytes(mask.data(), mask.size());
            for (std::uint8_t b : mask) {
                if (b > 1) throw Error::format("sample " + s.id + ": mask byte out of range");
            }
            s.event_mask = std::move(mask);
        }
        s.series = Matrix(ds.components, ds.timepoints);
        for (auto& v : s.series.data) {
            v = r.f64();
            if (!std::isfinite(v)) throw Error::format("sample " + s.id + ": non-finite value");
        }
        ds.samples.push_back(std::move(s));
    }
    if (r.remaining() != 4) throw Error::format("dataset has trailing or missing bytes");
    const std::size_t payload_end = r.position();
    const std::uint32_t stored_crc = r.u32();
    const std::uint32_t computed = payload_crc(bytes.data() + payload_start, payload_end - payload_start);
    if (stored_crc != computed) throw Error::format("dataset checksum mismatch: " + path);

    ds.provenance = "loaded from " + path;
    ds.validate();
    return ds;
}

Dataset import_csv_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw Error::io("cannot open manifest: " + manifest_path);
    const auto dir = std::filesystem::path(manifest_path).parent_path();

    Dataset ds;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string id, label_str, mask_file;
        if (!std::getline(ss, id, ',') || !std::getline(ss, label_str, ',')) {
            throw Error::format("manifest line is not id,label,mask-file: " + line);
        }
        std::getline(ss, mask_file, ',');

        Sample s;
        s.id = id;
        try {
            s.label = std::stoi(label_str);
        } catch (const std::exception&) {
            throw Error::format("manifest label is not an integer: " + line);
        }

        const auto series_path = dir / (id + ".csv");
        std::ifstream sf(series_path);
        if (!sf) throw Error::io("cannot open series file: " + series_path.string());
        std::vector<std::vector<double>> rows;
        std::string srow;
        while (std::getline(sf, srow)) {
            if (srow.empty()) continue;
            std::vector<double> vals;
            std::stringstream rs(srow);
            std::string cell;
            while (std::getline(rs, cell, ',')) {
                try {
                    vals.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    throw Error::format("sample " + id + ": non-numeric cell '" + cell + "'");
                }
            }
            rows.push_back(std::move(vals));
        }
        if (rows.empty()) throw Error::format("sample " + id + ": empty series file");
        const std::size_t cols = rows.front().size();
        for (const auto& rowv : rows) {
            if (rowv.size() != cols) throw Error::format("sample " + id + ": ragged series rows");
        }
        s.series = Matrix(rows.size(), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < cols; ++j) s.series.at(i, j) = rows[i][j];
        }

        if (!mask_file.empty()) {
            std::ifstream mf(dir / mask_file);
            if (!mf) throw Error::io("cannot open mask file: " + mask_file);
            std::string mline;
            std::getline(mf, mline);
            std::vector<std::uint8_t> mask;
            std::stringstream ms(mline);
            std::string cell;
            while (std::getline(ms, cell, ',')) {
                mask.push_back(cell == "1" ? 1 : 0);
            }
            s.event_mask = std::move(mask);
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw Error::format("manifest lists no samples: " + manifest_path);
    ds.components = ds.samples.front().series.rows;
    ds.timepoints = ds.samples.front().series.cols;
    ds.provenance = "imported from " + manifest_path;
    ds.validate();
    return ds;
}

std::vector<std::size_t> split_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error::config("split_folds: need at least 2 folds");
    const std::size_t class0 = dataset.count_class(0);
    const std::size_t class1 = dataset.count_class(1);
    if (k > std::min(class0, class1)) {
        throw Error::stratification("split_folds: fold count exceeds the smaller class size");
    }

    std::vector<std::size_t> assignment(dataset.samples.size(), 0);
    std::size_t cursor = 0;  // global round-robin keeps overall sizes within one
    for (int label : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
            if (dataset.samples[i].label == label) members.push_back(i);
        }
        Rng rng(derive_seed(seed, 0xF01D5EEDULL, static_cast<std::uint64_t>(label)));
        rng.shuffle(members);
        for (std::size_t idx : members) {
            assignment[idx] = cursor % k;
            ++cursor;
        }
    }
    return assignment;
}

}  // namespace decennt
