#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otc/dataset.hpp"
#include "otc/matrix.hpp"

namespace otc {

// Shortest decimal that round-trips the double exactly.
std::string format_double(double x);

// CSV with d unnamed columns, one row per sample.
void write_features_csv(const std::string& path, const Matrix& features);
Matrix read_features_csv(const std::string& path);

// sample_id,true_label,observed_label
void write_labels_csv(const std::string& path, const std::vector<int>& true_labels,
                      const std::vector<int>& observed_labels);
void read_labels_csv(const std::string& path, std::vector<int>& true_labels,
                     std::vector<int>& observed_labels);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// FNV-1a 64-bit over the file bytes, hex encoded.
std::string file_hash(const std::string& path);

// Per-run manifest: config snapshot, seed, per-stage input/output hashes and
// wall-clock. Stored as manifest.json in the output directory.
class RunManifest {
public:
    static RunManifest load_or_create(const std::string& out_dir, const std::string& config_snapshot,
                                      std::uint64_t seed);

    // Records a completed stage. Paths are relative to the output directory.
    void record_stage(const std::string& stage, const std::vector<std::string>& inputs,
                      const std::vector<std::string>& outputs, double wall_ms);

    // Throws when a required input's current hash differs from the hash it
    // had when an earlier stage produced it (stale intermediate).
    void check_inputs_fresh(const std::string& stage, const std::vector<std::string>& inputs) const;

    void save() const;

    const std::string& dir() const { return out_dir_; }

private:
    std::string out_dir_;
    std::string json_text_;
};

}  // namespace otc
