#include "beacon/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "beacon/error.hpp"
#include "beacon/hash.hpp"
#include "beacon/rng.hpp"

namespace beacon {

namespace fs = std::filesystem;

Date parse_date(const std::string& iso) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(iso);
    if (iso.size() != 10 || !(in >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-') {
        fail(ErrorKind::Parse, "invalid date '" + iso + "' (expected YYYY-MM-DD)");
    }
    Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) fail(ErrorKind::Parse, "invalid calendar date '" + iso + "'");
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

Manifest::Manifest(std::vector<SampleMeta> entries, fs::path base_dir)
    : entries_(std::move(entries)), base_dir_(std::move(base_dir)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!is_sha256_hex(e.sha256)) fail(ErrorKind::Parse, "entry " + std::to_string(i) + ": bad sha256 '" + e.sha256 + "'");
        if (!by_id_.emplace(e.sha256, i).second) fail(ErrorKind::DuplicateId, "duplicate sha256 " + e.sha256);
        if (label_index_.emplace(e.family, label_set_.size()).second) label_set_.push_back(e.family);
    }
}

std::size_t Manifest::class_index(const std::string& family) const {
    auto it = label_index_.find(family);
    if (it == label_index_.end()) fail(ErrorKind::Label, "unknown family '" + family + "'");
    return it->second;
}

const SampleMeta& Manifest::find(const std::string& sha256) const {
    auto it = by_id_.find(sha256);
    if (it == by_id_.end()) fail(ErrorKind::InvalidArgument, "sample " + sha256 + " not in manifest");
    return entries_[it->second];
}

bool Manifest::contains(const std::string& sha256) const { return by_id_.count(sha256) != 0; }

namespace {

constexpr std::array<const char*, 5> kColumns = {"sha256", "family", "mtype", "date", "path"};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

}  // namespace

Manifest load_manifest(const fs::path& path, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());

    std::string line;
    std::size_t line_no = 0;
    std::array<std::size_t, 5> col{};
    bool have_header = false;
    std::vector<SampleMeta> entries;
    std::unordered_map<std::string, std::size_t> seen;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        for (auto& f : fields) f = trim(std::move(f));

        if (!have_header) {
            if (fields.size() != kColumns.size()) {
                fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": header must name sha256,family,mtype,date,path");
            }
            for (std::size_t c = 0; c < kColumns.size(); ++c) {
                auto it = std::find(fields.begin(), fields.end(), kColumns[c]);
                if (it == fields.end()) {
                    fail(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": header lacks column '" + kColumns[c] + "'");
                }
                col[c] = static_cast<std::size_t>(it - fields.begin());
            }
            have_header = true;
            continue;
        }

        auto where = [&] { return path.string() + ":" + std::to_string(line_no) + ": "; };
        if (fields.size() != kColumns.size()) {
            fail(ErrorKind::Parse, where() + "expected 5 fields, found " + std::to_string(fields.size()));
        }
        SampleMeta meta;
        meta.sha256 = fields[col[0]];
        meta.family = fields[col[1]];
        meta.mtype = fields[col[2]];
        meta.path = fields[col[4]];
        if (!is_sha256_hex(meta.sha256)) fail(ErrorKind::Parse, where() + "sha256 must be 64 lowercase hex characters");
        if (meta.family.empty()) fail(ErrorKind::Parse, where() + "empty family");
        if (meta.path.empty()) fail(ErrorKind::Parse, where() + "empty path");
        try {
            meta.date = parse_date(fields[col[3]]);
        } catch (const Error& e) {
            fail(ErrorKind::Parse, where() + e.what());
        }
        if (auto [it, inserted] = seen.emplace(meta.sha256, line_no); !inserted) {
            fail(ErrorKind::DuplicateId, where() + "duplicate sha256 " + meta.sha256 + " (first seen on line " + std::to_string(it->second) + ")");
        }
        entries.push_back(std::move(meta));
    }
    if (!have_header) fail(ErrorKind::Parse, path.string() + ": missing header row");

    const fs::path base = path.parent_path();
    if (opts.check_paths) {
        for (const auto& e : entries) {
            std::ifstream probe(base / e.path);
            if (!probe) fail(ErrorKind::Io, "report for " + e.sha256 + " is not readable: " + (base / e.path).string());
        }
    }
    return Manifest(std::move(entries), base);
}

std::string render_manifest_csv(const Manifest& m) {
    std::string out = "sha256,family,mtype,date,path\n";
    for (const auto& e : m.entries()) {
        out += e.sha256 + ',' + e.family + ',' + e.mtype + ',' + format_date(e.date) + ',' + e.path + '\n';
    }
    return out;
}

SplitPlan temporal_split(const Manifest& m, double train_fraction) {
    if (m.size() == 0) fail(ErrorKind::EmptyInput, "temporal_split: empty manifest");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        fail(ErrorKind::InvalidArgument, "temporal_split: train_fraction must lie in (0, 1)");
    }
    std::vector<const SampleMeta*> order;
    order.reserve(m.size());
    for (const auto& e : m.entries()) order.push_back(&e);
    std::sort(order.begin(), order.end(), [](const SampleMeta* a, const SampleMeta* b) {
        if (a->date != b->date) return a->date < b->date;
        return a->sha256 < b->sha256;
    });
    // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(m.size()) * train_fraction + 1e-9));
    SplitPlan plan;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_train ? plan.train_ids : plan.test_ids).push_back(order[i]->sha256);
    }
    return plan;
}

std::vector<IdList> kfold(const IdList& train_ids, std::size_t k, std::uint64_t seed) {
    if (k < 2) fail(ErrorKind::InvalidArgument, "kfold: k must be at least 2");
    if (k > train_ids.size()) {
        fail(ErrorKind::InvalidArgument, "kfold: k=" + std::to_string(k) + " exceeds " + std::to_string(train_ids.size()) + " ids");
    }
    IdList shuffled = train_ids;
    Rng rng(seed);
    rng.shuffle(shuffled);
    std::vector<IdList> folds(k);
    for (std::size_t i = 0; i < shuffled.size(); ++i) folds[i % k].push_back(std::move(shuffled[i]));
    return folds;
}

SplitPlan make_split_plan(const Manifest& m, double train_fraction, std::size_t k, std::uint64_t seed) {
    SplitPlan plan = temporal_split(m, train_fraction);
    plan.folds = kfold(plan.train_ids, k, seed);
    return plan;
}

std::string split_plan_to_json(const SplitPlan& plan) {
    nlohmann::ordered_json j;
    j["train"] = plan.train_ids;
    j["test"] = plan.test_ids;
    j["folds"] = plan.folds;
    return j.dump(1) + "\n";
}

SplitPlan split_plan_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SplitPlan plan;
        plan.train_ids = j.at("train").get<IdList>();
        plan.test_ids = j.at("test").get<IdList>();
        plan.folds = j.at("folds").get<std::vector<IdList>>();
        return plan;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, std::string("split plan: ") + e.what());
    }
}

}  // namespace beacon
