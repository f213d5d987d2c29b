#include "otc/io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace otc {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void write_features_csv(const std::string& path, const Matrix& features) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const auto row = features.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << format_double(row[c]);
        }
        out << '\n';
    }
}

Matrix read_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end) {
            double v = 0.0;
            const auto res = std::from_chars(p, end, v);
            if (res.ec != std::errc{}) throw std::runtime_error("bad number in " + path);
            row.push_back(v);
            p = res.ptr;
            if (p < end && *p == ',') ++p;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw std::runtime_error("ragged rows in " + path);
        }
        rows.push_back(std::move(row));
    }
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

void write_labels_csv(const std::string& path, const std::vector<int>& true_labels,
                      const std::vector<int>& observed_labels) {
    if (true_labels.size() != observed_labels.size()) {
        throw std::invalid_argument("write_labels_csv: length mismatch");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "sample_id,true_label,observed_label\n";
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        out << i << ',' << true_labels[i] << ',' << observed_labels[i] << '\n';
    }
}

void read_labels_csv(const std::string& path, std::vector<int>& true_labels,
                     std::vector<int>& observed_labels) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    true_labels.clear();
    observed_labels.clear();
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::size_t id = 0;
        int t = 0, o = 0;
        if (std::sscanf(line.c_str(), "%zu,%d,%d", &id, &t, &o) != 3) {
            throw std::runtime_error("bad row in " + path);
        }
        true_labels.push_back(t);
        observed_labels.push_back(o);
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string file_hash(const std::string& path) {
    const std::string bytes = read_text_file(path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

RunManifest RunManifest::load_or_create(const std::string& out_dir,
                                        const std::string& config_snapshot, std::uint64_t seed) {
    fs::create_directories(out_dir);
    RunManifest m;
    m.out_dir_ = out_dir;
    const fs::path path = fs::path(out_dir) / "manifest.json";
    json j;
    if (fs::exists(path)) {
        j = json::parse(read_text_file(path.string()));
    }
    j["tool"] = "otcurate";
    j["version"] = "0.1.0";
    j["seed"] = seed;
    j["config"] = json::parse(config_snapshot);
    if (!j.contains("stages")) j["stages"] = json::object();
    m.json_text_ = j.dump(2);
    return m;
}

void RunManifest::record_stage(const std::string& stage, const std::vector<std::string>& inputs,
                               const std::vector<std::string>& outputs, double wall_ms) {
    json j = json::parse(json_text_);
    json s;
    s["wall_ms"] = wall_ms;
    s["inputs"] = json::object();
    s["outputs"] = json::object();
    for (const auto& f : inputs) {
        s["inputs"][f] = file_hash((fs::path(out_dir_) / f).string());
    }
    for (const auto& f : outputs) {
        s["outputs"][f] = file_hash((fs::path(out_dir_) / f).string());
    }
    j["stages"][stage] = s;
    json_text_ = j.dump(2);
}

void RunManifest::check_inputs_fresh(const std::string& stage,
                                     const std::vector<std::string>& inputs) const {
    const json j = json::parse(json_text_);
    if (!j.contains("stages")) return;
    for (const auto& f : inputs) {
        const fs::path full = fs::path(out_dir_) / f;
        if (!fs::exists(full)) continue;  // existence is checked by the stage itself
        const std::string current = file_hash(full.string());
        for (const auto& [name, s] : j["stages"].items()) {
            if (s.contains("outputs") && s["outputs"].contains(f)) {
                if (s["outputs"][f].get<std::string>() != current) {
                    throw std::runtime_error(stage + ": stale intermediate " + f +
                                             " (produced by stage " + name +
                                             ", modified since)");
                }
            }
        }
    }
}

void RunManifest::save() const {
    write_text_file((fs::path(out_dir_) / "manifest.json").string(), json_text_ + "\n");
}

}  // namespace otc
