#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "beacon/corpus.hpp"

namespace beacon {

struct SynthConfig {
    std::size_t n_families = 10;
    // One count per family; a single entry is broadcast to every family.
    std::vector<std::size_t> samples_per_family{120};
    // Distinct tokens per family per behavioural channel (and in the shared background).
    std::size_t vocab_size = 48;
    double signal_strength = 0.8;
    Date date_start{std::chrono::year{2017}, std::chrono::month{1}, std::chrono::day{1}};
    Date date_end{std::chrono::year{2019}, std::chrono::month{12}, std::chrono::day{31}};
    std::uint64_t seed = 1;

    // Compact-serialised report size is log-normal around
    // size_median x budget_bytes, clamped to [size_min, size_max] x budget_bytes.
    std::size_t budget_bytes = 8192;
    double size_median = 1.0;
    double size_sigma = 0.9;
    double size_min = 0.15;
    double size_max = 6.0;

    void validate() const;
    std::size_t samples_for(std::size_t family) const;
};

// Family names used for the first ten classes; later classes are "family_<i>".
std::string synth_family_name(std::size_t index);
std::string synth_family_type(const std::string& family);

// Builds the report for sample `index` (counted within `family`). Pure function of its arguments.
nlohmann::ordered_json synth_report(const SynthConfig& cfg, std::size_t family, std::size_t index);
std::string synth_sample_id(const SynthConfig& cfg, std::size_t family, std::size_t index);

// Writes `<sha256>.json` per sample plus `manifest.csv` into out_dir.
Manifest generate_corpus(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace beacon
