#include "tsccn/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "tsccn/error.hpp"

namespace tsccn::data {

bool is_valid_label(int label) noexcept { return label >= 0 && label < kNumClasses; }

int binarize_label(int label) {
    if (!is_valid_label(label)) throw InvalidArgument("label " + std::to_string(label) + " outside {0,1,2}");
    return label == 0 ? 0 : 1;
}

void VertebraPatch::validate(int side) const {
    if (!is_valid_label(label)) throw InvalidArgument("patch label " + std::to_string(label) + " outside {0,1,2}");
    if (image.rows != side || image.cols != side)
        throw InvalidArgument("patch image is " + std::to_string(image.rows) + "x" + std::to_string(image.cols) +
                              ", expected " + std::to_string(side) + "x" + std::to_string(side));
    if (!image.in_unit_range()) throw InvalidArgument("patch intensities outside [0,1]");
}

void SpineSequence::validate() const {
    if (patches.empty()) throw InvalidArgument("spine sequence '" + slice_id + "' is empty");
    for (std::size_t i = 1; i < patches.size(); ++i) {
        if (patches[i].patient_id != patches[0].patient_id)
            throw InvalidArgument("spine sequence '" + slice_id + "' mixes patients");
        if (patches[i].position <= patches[i - 1].position)
            throw InvalidArgument("spine sequence '" + slice_id + "' positions not strictly increasing");
    }
}

std::vector<std::array<std::size_t, 3>> triplet_indices(std::size_t n) {
    std::vector<std::array<std::size_t, 3>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back({i == 0 ? i : i - 1, i, i + 1 < n ? i + 1 : i});
    return out;
}

std::vector<NeighborTriplet> extract_triplets(const SpineSequence& seq) {
    if (seq.patches.empty()) throw InvalidArgument("extract_triplets on an empty sequence");
    std::vector<NeighborTriplet> out;
    out.reserve(seq.patches.size());
    for (const auto& [p, c, n] : triplet_indices(seq.patches.size())) {
        NeighborTriplet t;
        t.x_p = seq.patches[p].image;
        t.x_c = seq.patches[c].image;
        t.x_n = seq.patches[n].image;
        t.y_p = seq.patches[p].label;
        t.y_c = seq.patches[c].label;
        t.y_n = seq.patches[n].label;
        t.binary_p = binarize_label(t.y_p);
        t.binary_c = binarize_label(t.y_c);
        t.binary_n = binarize_label(t.y_n);
        out.push_back(std::move(t));
    }
    return out;
}

std::string to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

Split parse_split(const std::string& text) {
    if (text == "train") return Split::Train;
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw InvalidArgument("unknown split '" + text + "'");
}

void DatasetManifest::tally() {
    class_counts.clear();
    for (const auto& e : entries) ++class_counts[e.label];
}

std::vector<std::string> DatasetManifest::patient_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& e : entries)
        if (seen.insert(e.patient_id).second) out.push_back(e.patient_id);
    return out;
}

DatasetManifest DatasetManifest::subset_by_patients(const std::vector<std::string>& patients, Split s) const {
    const std::set<std::string> keep(patients.begin(), patients.end());
    DatasetManifest out;
    out.split = s;
    out.base_dir = base_dir;
    for (const auto& e : entries)
        if (keep.count(e.patient_id)) out.entries.push_back(e);
    out.tally();
    return out;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

int parse_int(const std::string& text, const char* what, std::size_t row) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ManifestError(std::string("malformed ") + what + " '" + text + "'", row);
    }
}

}  // namespace

DatasetManifest load_manifest(const std::filesystem::path& path, Split split) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest '" + path.string() + "'", 0);

    DatasetManifest m;
    m.split = split;
    m.base_dir = path.parent_path();

    std::string line;
    std::size_t row = 0;
    bool header_seen = false;
    std::set<std::tuple<std::string, std::string, int>> keys;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        if (!header_seen) {
            if (trim(line) != kManifestHeader)
                throw ManifestError(std::string("expected header '") + kManifestHeader + "'", row);
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != 5)
            throw ManifestError("expected 5 fields, found " + std::to_string(fields.size()), row);
        ManifestEntry e;
        e.patient_id = trim(fields[0]);
        e.slice_id = trim(fields[1]);
        e.position = parse_int(trim(fields[2]), "position", row);
        e.image_path = trim(fields[3]);
        e.label = parse_int(trim(fields[4]), "label", row);
        if (e.patient_id.empty() || e.slice_id.empty() || e.image_path.empty())
            throw ManifestError("empty identifier or path", row);
        if (e.position < 0) throw ManifestError("negative position", row);
        if (!is_valid_label(e.label))
            throw ManifestError("label " + std::to_string(e.label) + " outside {0,1,2}", row);
        if (!keys.emplace(e.patient_id, e.slice_id, e.position).second)
            throw ManifestError("duplicate (patient_id, slice_id, position)", row);
        m.entries.push_back(std::move(e));
    }
    if (!header_seen || m.entries.empty()) throw ManifestError("empty manifest", 0);
    m.tally();
    return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
    out << kManifestHeader << "\n";
    for (const auto& e : manifest.entries)
        out << e.patient_id << ',' << e.slice_id << ',' << e.position << ',' << e.image_path << ',' << e.label << "\n";
    if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

Image load_entry_image(const DatasetManifest& manifest, const ManifestEntry& entry, int side) {
    Image img = read_pgm(manifest.resolve(entry));
    if (side > 0 && (img.rows != side || img.cols != side)) img = resize_bilinear(img, side, side);
    clamp_unit(img);
    return img;
}

LoadedDataset load_sequences(const DatasetManifest& manifest, int side) {
    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
    std::vector<std::pair<std::string, std::string>> order;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        const auto& e = manifest.entries[i];
        auto key = std::make_pair(e.patient_id, e.slice_id);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        it->second.push_back(i);
    }
    LoadedDataset out;
    for (const auto& key : order) {
        auto idx = groups[key];
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return manifest.entries[a].position < manifest.entries[b].position;
        });
        SpineSequence seq;
        seq.slice_id = key.second;
        for (std::size_t i : idx) {
            const auto& e = manifest.entries[i];
            VertebraPatch p;
            p.image = load_entry_image(manifest, e, side);
            p.label = e.label;
            p.position = e.position;
            p.patient_id = e.patient_id;
            seq.patches.push_back(std::move(p));
        }
        seq.validate();
        out.sequences.push_back(std::move(seq));
        out.entry_index.push_back(std::move(idx));
    }
    return out;
}

}  // namespace tsccn::data
