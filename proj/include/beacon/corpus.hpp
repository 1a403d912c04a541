#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace beacon {

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& iso);  // YYYY-MM-DD
std::string format_date(const Date& d);

struct SampleMeta {
    std::string sha256;
    std::string family;
    std::string mtype;
    Date date;
    std::string path;  // relative to the manifest's directory
};

class Manifest {
public:
    Manifest() = default;
    Manifest(std::vector<SampleMeta> entries, std::filesystem::path base_dir = {});

    const std::vector<SampleMeta>& entries() const noexcept { return entries_; }
    const std::vector<std::string>& label_set() const noexcept { return label_set_; }
    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Class index = position in label_set (first-appearance order).
    std::size_t class_index(const std::string& family) const;
    const SampleMeta& find(const std::string& sha256) const;
    bool contains(const std::string& sha256) const;
    std::filesystem::path report_path(const SampleMeta& meta) const { return base_dir_ / meta.path; }

private:
    std::vector<SampleMeta> entries_;
    std::vector<std::string> label_set_;
    std::filesystem::path base_dir_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::unordered_map<std::string, std::size_t> label_index_;
};

struct LoadOptions {
    bool check_paths = true;
};

// CSV with header `sha256,family,mtype,date,path`.
Manifest load_manifest(const std::filesystem::path& path, const LoadOptions& opts = {});
std::string render_manifest_csv(const Manifest& m);

using IdList = std::vector<std::string>;

struct SplitPlan {
    IdList train_ids;
    IdList test_ids;
    std::vector<IdList> folds;
};

SplitPlan temporal_split(const Manifest& m, double train_fraction);
std::vector<IdList> kfold(const IdList& train_ids, std::size_t k, std::uint64_t seed);

// Temporal split followed by k-fold partitioning of the training ids.
SplitPlan make_split_plan(const Manifest& m, double train_fraction, std::size_t k, std::uint64_t seed);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);

}  // namespace beacon
