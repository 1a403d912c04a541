#include "beacon/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_set>

#include "beacon/error.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/hash.hpp"
#include "beacon/rng.hpp"

namespace beacon {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::array<const char*, 10> kFamilies = {"Adload", "Emotet", "HarHar", "Lokibot", "Qakbot",
                                                   "Swisyn", "Trickbot", "Ursnif", "Zeus", "njRAT"};

enum Channel : std::size_t { kFiles, kKeys, kMutexes, kApis, kCommands, kImports, kChannelCount };

// Per-channel share of the behavioural payload.
constexpr std::array<double, 5> kChannelWeights = {0.35, 0.25, 0.08, 0.22, 0.10};

class Vocabulary {
public:
    explicit Vocabulary(const SynthConfig& cfg) : n_families_(cfg.n_families), size_(cfg.vocab_size) {
        std::unordered_set<std::string> used;
        // Slot n_families holds the shared background vocabulary.
        words_.resize((n_families_ + 1) * kChannelCount);
        for (std::size_t f = 0; f <= n_families_; ++f) {
            for (std::size_t c = 0; c < kChannelCount; ++c) {
                Rng rng(mix_seed(cfg.seed, 0x5eed0000ULL + f * 131 + c));
                auto& list = words_[f * kChannelCount + c];
                while (list.size() < size_) {
                    std::string w = make_word(rng);
                    if (used.insert(w).second) list.push_back(std::move(w));
                }
            }
        }
        cumulative_.resize(size_);
        double acc = 0.0;
        for (std::size_t j = 0; j < size_; ++j) {
            acc += 1.0 / static_cast<double>(j + 1);
            cumulative_[j] = acc;
        }
    }

    // Mixture draw: family vocabulary with probability `signal`, else background.
    const std::string& draw(Rng& rng, std::size_t family, Channel c, double signal) const {
        const bool from_family = rng.uniform() < signal;
        const std::size_t slot = from_family ? family : n_families_;
        const double u = rng.uniform() * cumulative_.back();
        const auto j = static_cast<std::size_t>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
        return words_[slot * kChannelCount + c][std::min(j, size_ - 1)];
    }

private:
    static std::string make_word(Rng& rng) {
        static constexpr char kConsonants[] = "bcdfghjklmnprstvwxz";
        static constexpr char kVowels[] = "aeiou";
        const auto len = 5 + rng.below(6);
        std::string w;
        for (std::size_t i = 0; i < len; ++i) {
            w.push_back(i % 2 == 0 ? kConsonants[rng.below(sizeof kConsonants - 1)] : kVowels[rng.below(sizeof kVowels - 1)]);
        }
        return w;
    }

    std::size_t n_families_;
    std::size_t size_;
    std::vector<std::vector<std::string>> words_;
    std::vector<double> cumulative_;
};

std::size_t escaped_size(const std::string& s) {
    std::size_t n = 2;
    for (char c : s) n += (c == '\\' || c == '"') ? 2 : 1;
    return n;
}

std::string hex_string(Rng& rng, std::size_t digits) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < digits; ++i) s.push_back(kHex[rng.below(16)]);
    return s;
}

std::string capitalise(std::string s) {
    if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

std::string behaviour_entry(Rng& rng, const Vocabulary& vocab, std::size_t family, Channel c, double signal) {
    auto tok = [&](Channel ch) -> const std::string& { return vocab.draw(rng, family, ch, signal); };
    switch (c) {
        case kFiles: {
            static constexpr std::array<const char*, 4> kRoots = {"C:\\Users\\user\\AppData\\Roaming\\", "C:\\Windows\\Temp\\",
                                                                  "C:\\ProgramData\\", "C:\\Users\\user\\AppData\\Local\\Temp\\"};
            static constexpr std::array<const char*, 5> kExt = {".exe", ".dll", ".dat", ".tmp", ".log"};
            return std::string(kRoots[rng.below(kRoots.size())]) + tok(kFiles) + "\\" + tok(kFiles) + kExt[rng.below(kExt.size())];
        }
        case kKeys: {
            static constexpr std::array<const char*, 3> kHives = {"HKEY_CURRENT_USER\\Software\\", "HKEY_LOCAL_MACHINE\\SOFTWARE\\",
                                                                  "HKEY_CURRENT_USER\\Software\\Microsoft\\Windows\\CurrentVersion\\"};
            return std::string(kHives[rng.below(kHives.size())]) + capitalise(tok(kKeys)) + "\\" + capitalise(tok(kKeys));
        }
        case kMutexes:
            return (rng.below(2) ? "Global\\" : "Local\\") + tok(kMutexes) + "_" + hex_string(rng, 8);
        case kApis:
            return capitalise(tok(kApis)) + (rng.below(2) ? "W" : "A");
        case kCommands:
            return "\"C:\\Windows\\system32\\cmd.exe\" /c " + tok(kCommands) + " /" + tok(kCommands) + " " + tok(kCommands);
        default:
            break;
    }
    return {};
}

ojson static_pe(Rng& rng, const Vocabulary& vocab, std::size_t family, const SynthConfig& cfg) {
    const double signal = cfg.signal_strength;
    // Family-dependent entropy profile, blended toward the shared profile as signal drops.
    const double family_entropy = 5.0 + 2.5 * static_cast<double>(family) / static_cast<double>(std::max<std::size_t>(cfg.n_families - 1, 1));
    const double mean_entropy = signal * family_entropy + (1.0 - signal) * 6.25;

    ojson pe = ojson::object();
    pe["imphash"] = hex_string(rng, 32);
    pe["timestamp"] = 1483228800 + static_cast<std::int64_t>(rng.below(94608000));
    pe["entrypoint"] = "0x" + hex_string(rng, 6);
    ojson imports = ojson::array();
    const auto n_dlls = 2 + rng.below(3);
    for (std::size_t d = 0; d < n_dlls; ++d) {
        ojson dll = ojson::object();
        dll["dll"] = vocab.draw(rng, family, kImports, signal) + ".dll";
        ojson names = ojson::array();
        const auto n_names = 2 + rng.below(4);
        for (std::size_t k = 0; k < n_names; ++k) names.push_back(capitalise(vocab.draw(rng, family, kImports, signal)));
        dll["imports"] = std::move(names);
        imports.push_back(std::move(dll));
    }
    pe["imports"] = std::move(imports);
    static constexpr std::array<const char*, 5> kSections = {".text", ".rdata", ".data", ".rsrc", ".reloc"};
    ojson sections = ojson::array();
    const auto n_sections = 3 + rng.below(3);
    for (std::size_t s = 0; s < n_sections; ++s) {
        ojson sec = ojson::object();
        sec["name"] = kSections[s];
        sec["virtual_size"] = 512 * (1 + rng.below(512));
        const double entropy = std::clamp(mean_entropy + 0.35 * rng.normal(), 0.0, 8.0);
        sec["entropy"] = std::round(entropy * 1000.0) / 1000.0;
        sections.push_back(std::move(sec));
    }
    pe["sections"] = std::move(sections);
    return pe;
}

ojson build_report(const SynthConfig& cfg, const Vocabulary& vocab, std::size_t family, std::size_t index) {
    Rng rng(mix_seed(cfg.seed, index));
    const double budget = static_cast<double>(cfg.budget_bytes);
    const double ratio = std::clamp(cfg.size_median * std::exp(cfg.size_sigma * rng.normal()), cfg.size_min, cfg.size_max);
    const auto target = static_cast<std::size_t>(ratio * budget);

    ojson pe = static_pe(rng, vocab, family, cfg);
    std::size_t size = pe.dump().size() + 96;  // static part plus fixed key overhead

    std::array<ojson, 5> lists;
    for (auto& l : lists) l = ojson::array();
    // Every channel gets one entry so the report schema is stable.
    for (std::size_t c = 0; c < lists.size(); ++c) {
        auto e = behaviour_entry(rng, vocab, family, static_cast<Channel>(c), cfg.signal_strength);
        size += escaped_size(e) + 1;
        lists[c].push_back(std::move(e));
    }
    while (size < target) {
        double u = rng.uniform();
        std::size_t c = 0;
        while (c + 1 < kChannelWeights.size() && u >= kChannelWeights[c]) u -= kChannelWeights[c++];
        auto e = behaviour_entry(rng, vocab, family, static_cast<Channel>(c), cfg.signal_strength);
        size += escaped_size(e) + 1;
        lists[c].push_back(std::move(e));
    }

    ojson summary = ojson::object();
    summary["files"] = std::move(lists[kFiles]);
    summary["keys"] = std::move(lists[kKeys]);
    summary["mutexes"] = std::move(lists[kMutexes]);
    summary["resolved_apis"] = std::move(lists[kApis]);
    summary["executed_commands"] = std::move(lists[kCommands]);

    ojson report = ojson::object();
    report["behavior"]["summary"] = std::move(summary);
    report["static"]["pe"] = std::move(pe);
    return report;
}

std::size_t global_index(const SynthConfig& cfg, std::size_t family, std::size_t index_in_family) {
    std::size_t offset = 0;
    for (std::size_t f = 0; f < family; ++f) offset += cfg.samples_for(f);
    return offset + index_in_family;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_families < 2) fail(ErrorKind::InvalidArgument, "synth: n_families must be at least 2");
    if (samples_per_family.empty() || (samples_per_family.size() != 1 && samples_per_family.size() != n_families)) {
        fail(ErrorKind::InvalidArgument, "synth: samples_per_family needs 1 or n_families entries");
    }
    for (auto n : samples_per_family) {
        if (n < 1) fail(ErrorKind::InvalidArgument, "synth: every family needs at least one sample");
    }
    if (vocab_size < 1) fail(ErrorKind::InvalidArgument, "synth: vocab_size must be positive");
    if (!(signal_strength >= 0.0 && signal_strength <= 1.0)) fail(ErrorKind::InvalidArgument, "synth: signal_strength must lie in [0, 1]");
    if (!(date_start <= date_end)) fail(ErrorKind::InvalidArgument, "synth: date_start after date_end");
    if (!(size_min > 0.0 && size_min <= size_max && size_median > 0.0 && size_sigma >= 0.0)) {
        fail(ErrorKind::InvalidArgument, "synth: inconsistent size distribution parameters");
    }
}

std::size_t SynthConfig::samples_for(std::size_t family) const {
    return samples_per_family.size() == 1 ? samples_per_family.front() : samples_per_family.at(family);
}

std::string synth_family_name(std::size_t index) {
    return index < kFamilies.size() ? kFamilies[index] : "family_" + std::to_string(index);
}

std::string synth_family_type(const std::string& family) {
    if (family == "Emotet" || family == "Qakbot" || family == "Trickbot" || family == "Ursnif" || family == "Zeus") return "banker";
    if (family == "HarHar") return "coinminer";
    if (family == "Lokibot") return "pws";
    if (family == "njRAT") return "rat";
    if (family == "Adload" || family == "Swisyn") return "trojan";
    return "synthetic";
}

std::string synth_sample_id(const SynthConfig& cfg, std::size_t family, std::size_t index) {
    return sha256_hex(std::to_string(cfg.seed) + ":" + synth_family_name(family) + ":" + std::to_string(index));
}

ojson synth_report(const SynthConfig& cfg, std::size_t family, std::size_t index) {
    cfg.validate();
    const Vocabulary vocab(cfg);
    return build_report(cfg, vocab, family, global_index(cfg, family, index));
}

Manifest generate_corpus(const SynthConfig& cfg, const fs::path& out_dir) {
    cfg.validate();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    const Vocabulary vocab(cfg);
    const auto first_day = std::chrono::sys_days{cfg.date_start};
    const auto span = static_cast<std::uint64_t>((std::chrono::sys_days{cfg.date_end} - first_day).count()) + 1;

    std::vector<SampleMeta> entries;
    std::size_t global = 0;
    for (std::size_t f = 0; f < cfg.n_families; ++f) {
        const std::string family = synth_family_name(f);
        for (std::size_t i = 0; i < cfg.samples_for(f); ++i, ++global) {
            const ojson report = build_report(cfg, vocab, f, global);
            SampleMeta meta;
            meta.sha256 = synth_sample_id(cfg, f, i);
            meta.family = family;
            meta.mtype = synth_family_type(family);
            Rng date_rng(mix_seed(cfg.seed ^ 0xda7eULL, global));
            meta.date = Date{first_day + std::chrono::days{static_cast<long>(date_rng.below(span))}};
            meta.path = meta.sha256 + ".json";
            write_file_atomic(out_dir / meta.path, report.dump(2) + "\n");
            entries.push_back(std::move(meta));
        }
    }
    Manifest manifest(std::move(entries), out_dir);
    write_file_atomic(out_dir / "manifest.csv", render_manifest_csv(manifest));
    return manifest;
}

}  // namespace beacon
