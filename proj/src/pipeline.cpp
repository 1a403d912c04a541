#include "beacon/pipeline.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <spdlog/spdlog.h>

#include "beacon/aggregate.hpp"
#include "beacon/error.hpp"
#include "beacon/fsutil.hpp"
#include "beacon/hash.hpp"

namespace beacon {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// configuration

PipelineConfig::PipelineConfig() { train.batch_size = 0; }

nn::TrainConfig PipelineConfig::effective_train() const {
    nn::TrainConfig t = train;
    t.seed = seed;
    if (t.batch_size == 0) t.batch_size = nn::TrainConfig::default_batch_size(model);
    return t;
}

SynthConfig PipelineConfig::effective_synth() const {
    SynthConfig s = synth;
    s.seed = seed;
    s.budget_bytes = budget.max_bytes();
    return s;
}

ProviderConfig PipelineConfig::effective_provider() const {
    ProviderConfig p = provider;
    p.seed = provider_seed.value_or(seed);
    p.apply_environment();
    return p;
}

fs::path PipelineConfig::model_path() const { return models_dir() / (std::string(nn::to_string(model)) + ".beam"); }

ojson PipelineConfig::to_json() const {
    ojson j;
    j["paths"] = {{"reports", reports_dir.string()}, {"work", work_dir.string()}};
    j["seed"] = seed;
    ojson s;
    s["n_families"] = synth.n_families;
    s["samples_per_family"] = synth.samples_per_family;
    s["vocab_size"] = synth.vocab_size;
    s["signal_strength"] = synth.signal_strength;
    s["date_start"] = format_date(synth.date_start);
    s["date_end"] = format_date(synth.date_end);
    s["size_median"] = synth.size_median;
    s["size_sigma"] = synth.size_sigma;
    s["size_min"] = synth.size_min;
    s["size_max"] = synth.size_max;
    j["synth"] = s;
    j["chunk"] = {{"max_tokens", budget.max_tokens}, {"chars_per_token", budget.chars_per_token}};
    ojson p;
    p["kind"] = provider.kind == ProviderKind::Local ? "local" : "remote";
    p["endpoint"] = provider.endpoint;
    p["model"] = provider.model;
    p["max_in_flight"] = provider.max_in_flight;
    p["max_retries"] = provider.max_retries;
    p["backoff_ms"] = provider.backoff_base.count();
    p["timeout_ms"] = provider.timeout.count();
    p["batch_size"] = provider.batch_size;
    p["seed"] = provider_seed ? ojson(*provider_seed) : ojson(nullptr);
    j["provider"] = p;
    j["aggregate"] = {{"percentile", percentile}};
    j["split"] = {{"train_fraction", train_fraction}, {"folds", folds}};
    j["model"] = {{"kind", nn::to_string(model)}};
    ojson t;
    t["lr"] = train.adam.lr;
    t["beta1"] = train.adam.beta1;
    t["beta2"] = train.adam.beta2;
    t["eps"] = train.adam.eps;
    t["epochs"] = train.epochs;
    t["batch_size"] = train.batch_size;
    t["check_finite"] = train.check_finite;
    j["train"] = t;
    j["parallel"] = parallel;
    return j;
}

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown fields.
class Fields {
public:
    Fields(const ojson& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) fail(ErrorKind::Config, where() + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!obj_.contains(key)) return;
        try {
            out = obj_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::Config, field(key) + ": invalid value " + obj_.at(key).dump());
        }
    }

    std::optional<Fields> child(const char* key) {
        seen_.insert(key);
        if (!obj_.contains(key)) return std::nullopt;
        return Fields(obj_.at(key), field(key));
    }

    const ojson* raw(const char* key) {
        seen_.insert(key);
        return obj_.contains(key) ? &obj_.at(key) : nullptr;
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& [k, v] : obj_.items()) {
            if (!seen_.count(k)) fail(ErrorKind::Config, field(k.c_str()) + ": unknown field");
        }
    }

private:
    std::string where() const { return path_.empty() ? "config" : path_; }

    const ojson& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

PipelineConfig PipelineConfig::from_json(const ojson& j) {
    PipelineConfig c;
    Fields root(j, "");
    if (auto paths = root.child("paths")) {
        std::string reports = c.reports_dir.string(), work = c.work_dir.string();
        paths->get("reports", reports);
        paths->get("work", work);
        paths->finish();
        c.reports_dir = reports;
        c.work_dir = work;
    }
    root.get("seed", c.seed);
    if (auto s = root.child("synth")) {
        s->get("n_families", c.synth.n_families);
        if (const ojson* spf = s->raw("samples_per_family")) {
            try {
                c.synth.samples_per_family = spf->is_array() ? spf->get<std::vector<std::size_t>>()
                                                             : std::vector<std::size_t>{spf->get<std::size_t>()};
            } catch (const nlohmann::json::exception&) {
                fail(ErrorKind::Config, "synth.samples_per_family: expected a count or a list of counts");
            }
        }
        s->get("vocab_size", c.synth.vocab_size);
        s->get("signal_strength", c.synth.signal_strength);
        std::string start = format_date(c.synth.date_start), end = format_date(c.synth.date_end);
        s->get("date_start", start);
        s->get("date_end", end);
        try {
            c.synth.date_start = parse_date(start);
        } catch (const Error& e) {
            fail(ErrorKind::Config, std::string("synth.date_start: ") + e.what());
        }
        try {
            c.synth.date_end = parse_date(end);
        } catch (const Error& e) {
            fail(ErrorKind::Config, std::string("synth.date_end: ") + e.what());
        }
        s->get("size_median", c.synth.size_median);
        s->get("size_sigma", c.synth.size_sigma);
        s->get("size_min", c.synth.size_min);
        s->get("size_max", c.synth.size_max);
        s->finish();
    }
    if (auto ch = root.child("chunk")) {
        ch->get("max_tokens", c.budget.max_tokens);
        ch->get("chars_per_token", c.budget.chars_per_token);
        ch->finish();
    }
    if (auto p = root.child("provider")) {
        std::string kind = c.provider.kind == ProviderKind::Local ? "local" : "remote";
        p->get("kind", kind);
        if (kind == "local") {
            c.provider.kind = ProviderKind::Local;
        } else if (kind == "remote") {
            c.provider.kind = ProviderKind::Remote;
        } else {
            fail(ErrorKind::Config, "provider.kind: expected \"local\" or \"remote\", got \"" + kind + "\"");
        }
        p->get("endpoint", c.provider.endpoint);
        p->get("model", c.provider.model);
        p->get("max_in_flight", c.provider.max_in_flight);
        p->get("max_retries", c.provider.max_retries);
        long long backoff = c.provider.backoff_base.count(), timeout = c.provider.timeout.count();
        p->get("backoff_ms", backoff);
        p->get("timeout_ms", timeout);
        if (backoff < 0) fail(ErrorKind::Config, "provider.backoff_ms: must be non-negative");
        if (timeout <= 0) fail(ErrorKind::Config, "provider.timeout_ms: must be positive");
        c.provider.backoff_base = std::chrono::milliseconds(backoff);
        c.provider.timeout = std::chrono::milliseconds(timeout);
        p->get("batch_size", c.provider.batch_size);
        if (const ojson* seed = p->raw("seed"); seed && !seed->is_null()) {
            if (!seed->is_number_unsigned()) fail(ErrorKind::Config, "provider.seed: expected a non-negative integer or null");
            c.provider_seed = seed->get<std::uint64_t>();
        }
        p->finish();
    }
    if (auto a = root.child("aggregate")) {
        a->get("percentile", c.percentile);
        a->finish();
    }
    if (auto s = root.child("split")) {
        s->get("train_fraction", c.train_fraction);
        s->get("folds", c.folds);
        s->finish();
    }
    if (auto m = root.child("model")) {
        std::string kind = nn::to_string(c.model);
        m->get("kind", kind);
        try {
            c.model = nn::parse_model_kind(kind);
        } catch (const Error& e) {
            fail(ErrorKind::Config, std::string("model.kind: ") + e.what());
        }
        m->finish();
    }
    if (auto t = root.child("train")) {
        t->get("lr", c.train.adam.lr);
        t->get("beta1", c.train.adam.beta1);
        t->get("beta2", c.train.adam.beta2);
        t->get("eps", c.train.adam.eps);
        t->get("epochs", c.train.epochs);
        t->get("batch_size", c.train.batch_size);
        t->get("check_finite", c.train.check_finite);
        t->finish();
    }
    root.get("parallel", c.parallel);
    root.finish();
    c.validate();
    return c;
}

void PipelineConfig::validate() const {
    auto rethrow_as_config = [](const char* field, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Config) throw;
            fail(ErrorKind::Config, std::string(field) + ": " + e.what());
        }
    };
    rethrow_as_config("synth", [&] { effective_synth().validate(); });
    rethrow_as_config("chunk", [&] { budget.validate(); });
    rethrow_as_config("provider", [&] {
        ProviderConfig p = provider;
        if (p.kind == ProviderKind::Remote && p.endpoint.empty()) p.apply_environment();
        p.validate();
    });
    if (!(percentile > 0.0 && percentile <= 1.0)) fail(ErrorKind::Config, "aggregate.percentile: must lie in (0, 1]");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorKind::Config, "split.train_fraction: must lie in (0, 1)");
    if (folds < 2) fail(ErrorKind::Config, "split.folds: must be at least 2");
    if (!(train.adam.lr >= 0.0) || !std::isfinite(train.adam.lr)) fail(ErrorKind::Config, "train.lr: must be finite and non-negative");
    if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0)) fail(ErrorKind::Config, "train.beta1: must lie in [0, 1)");
    if (!(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0)) fail(ErrorKind::Config, "train.beta2: must lie in [0, 1)");
    if (!(train.adam.eps > 0.0)) fail(ErrorKind::Config, "train.eps: must be positive");
    if (train.epochs == 0) fail(ErrorKind::Config, "train.epochs: must be at least 1");
    if (parallel == 0) fail(ErrorKind::Config, "parallel: must be at least 1");
}

void apply_override(ojson& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Config, "--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    ojson value;
    try {
        value = ojson::parse(text);
    } catch (const nlohmann::json::exception&) {
        value = text;
    }
    ojson* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) fail(ErrorKind::Config, "--set: malformed key '" + key + "'");
        if (!node->is_object()) fail(ErrorKind::Config, "--set: '" + key + "' descends into a non-object");
        if (dot == std::string::npos) {
            (*node)[part] = value;
            return;
        }
        node = &(*node)[part];
        if (node->is_null()) *node = ojson::object();
        start = dot + 1;
    }
}

PipelineConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    ojson doc = PipelineConfig().to_json();
    if (file) {
        ojson user;
        try {
            user = ojson::parse(read_file(*file));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Config, file->string() + ": " + e.what());
        } catch (const Error& e) {
            fail(ErrorKind::Config, e.what());
        }
        if (!user.is_object()) fail(ErrorKind::Config, file->string() + ": top level must be an object");
        doc.merge_patch(user);
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return PipelineConfig::from_json(doc);
}

int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::Config: return 2;
        case ErrorKind::MissingArtifact: return 3;
        case ErrorKind::ProviderUnavailable:
        case ErrorKind::Protocol:
        case ErrorKind::SampleFailed: return 4;
        case ErrorKind::Numerical: return 5;
        default: return 1;
    }
}

// ---------------------------------------------------------------------------
// stages

namespace {

// A stage is complete when its stamp file holds the digest of everything it
// consumed. Stamps are written last, so an interrupted stage reruns.
std::optional<std::string> read_stamp(const fs::path& path) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return std::nullopt;
    try {
        return ojson::parse(read_file(path)).at("inputs").get<std::string>();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void write_stamp(const fs::path& path, const std::string& digest) {
    write_file_atomic(path, ojson{{"inputs", digest}}.dump() + "\n");
}

std::string digest_of(const ojson& j) { return sha256_hex(j.dump()); }

Manifest require_manifest(const PipelineConfig& cfg) {
    std::error_code ec;
    if (!fs::exists(cfg.manifest_path(), ec)) {
        fail(ErrorKind::MissingArtifact, "no manifest at " + cfg.manifest_path().string() +
                                             "; run `beacon synth` or point paths.reports at a corpus");
    }
    return load_manifest(cfg.manifest_path());
}

std::string require_stamp(const fs::path& stamp, const char* stage) {
    auto s = read_stamp(stamp);
    if (!s) {
        fail(ErrorKind::MissingArtifact, "stage output missing at " + stamp.parent_path().string() + "; run `beacon " + stage + "` first");
    }
    return *s;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Errors are collected
// per item rather than aborting the pool.
template <typename Fn>
std::vector<std::pair<std::size_t, std::string>> run_pool(std::size_t n, std::size_t workers, Fn fn) {
    std::vector<std::pair<std::size_t, std::string>> errors;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                errors.emplace_back(i, e.what());
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work);
        for (auto& t : threads) t.join();
    }
    std::sort(errors.begin(), errors.end());
    return errors;
}

fs::path chunk_file(const PipelineConfig& cfg, const std::string& id) { return cfg.chunks_dir() / (id + ".jsonl"); }

std::vector<Chunk> read_chunks(const PipelineConfig& cfg, const std::string& id) {
    const fs::path path = chunk_file(cfg, id);
    std::error_code ec;
    if (!fs::exists(path, ec)) fail(ErrorKind::MissingArtifact, "missing chunks for " + id + "; run `beacon chunk` first");
    return chunks_from_jsonl(read_file(path), cfg.budget);
}

ojson chunk_inputs(const PipelineConfig& cfg, const Manifest& m) {
    ojson j;
    j["budget"] = {cfg.budget.max_tokens, cfg.budget.chars_per_token};
    j["manifest"] = sha256_hex(render_manifest_csv(m));
    auto& reports = j["reports"] = ojson::array();
    for (const auto& e : m.entries()) reports.push_back(sha256_file_hex(m.report_path(e)));
    return j;
}

struct Dataset {
    Manifest manifest;
    SplitPlan plan;
    std::map<std::string, const SampleVector*> by_id;
    std::vector<SampleVector> vectors;
    std::size_t target_length = 0;
    std::string aggregate_stamp;
};

Dataset load_dataset(const PipelineConfig& cfg) {
    Dataset d;
    d.manifest = require_manifest(cfg);
    d.aggregate_stamp = require_stamp(cfg.vectors_dir() / "stamp.json", "aggregate");
    d.plan = split_plan_from_json(read_file(cfg.vectors_dir() / "split.json"));
    d.vectors = read_vectors(cfg.vectors_dir() / "vectors.bin");
    const auto stats = ojson::parse(read_file(cfg.vectors_dir() / "stats.json"));
    d.target_length = stats.at("target_length").get<std::size_t>();
    for (const auto& v : d.vectors) d.by_id[v.sample_id] = &v;
    return d;
}

nn::LabeledSet labeled(const Dataset& d, const IdList& ids, std::size_t* missing = nullptr) {
    nn::LabeledSet set;
    set.dim = d.target_length;
    std::size_t skipped = 0;
    for (const auto& id : ids) {
        const auto it = d.by_id.find(id);
        if (it == d.by_id.end()) {
            ++skipped;
            continue;
        }
        set.add(it->second->values, d.manifest.class_index(d.manifest.find(id).family));
    }
    if (missing) *missing = skipped;
    return set;
}

nn::ModelSpec model_spec(const PipelineConfig& cfg, const Dataset& d) {
    return nn::ModelSpec::make(cfg.model, d.target_length, d.manifest.label_set().size());
}

std::string train_digest(const PipelineConfig& cfg, const Dataset& d, bool cv) {
    const auto t = cfg.effective_train();
    ojson j;
    j["aggregate"] = d.aggregate_stamp;
    j["spec"] = model_spec(cfg, d).to_json();
    j["train"] = {t.adam.lr, t.adam.beta1, t.adam.beta2, t.adam.eps, t.batch_size, t.epochs, t.seed, t.check_finite};
    j["cv"] = cv;
    return digest_of(j);
}

std::string model_stem(const PipelineConfig& cfg) { return nn::to_string(cfg.model); }

}  // namespace

Manifest cmd_synth(const PipelineConfig& cfg) {
    const SynthConfig s = cfg.effective_synth();
    ojson inputs = cfg.to_json()["synth"];
    inputs["seed"] = s.seed;
    inputs["budget_bytes"] = s.budget_bytes;
    const std::string digest = digest_of(inputs);
    const fs::path stamp = cfg.reports_dir / "synth.stamp.json";
    if (read_stamp(stamp) == digest && fs::exists(cfg.manifest_path())) {
        spdlog::info("synth: corpus at {} is up to date", cfg.reports_dir.string());
        return load_manifest(cfg.manifest_path());
    }
    Manifest m = generate_corpus(s, cfg.reports_dir);
    write_stamp(stamp, digest);
    spdlog::info("synth: wrote {} reports over {} families to {}", m.size(), m.label_set().size(), cfg.reports_dir.string());
    return m;
}

StageResult cmd_chunk(const PipelineConfig& cfg) {
    const Manifest m = require_manifest(cfg);
    const std::string digest = digest_of(chunk_inputs(cfg, m));
    const fs::path stamp = cfg.chunks_dir() / "stamp.json";
    StageResult r;
    if (read_stamp(stamp) == digest) {
        spdlog::info("chunk: up to date");
        r.up_to_date = true;
        return r;
    }
    fs::create_directories(cfg.chunks_dir());
    std::atomic<std::size_t> total_chunks{0};
    const auto errors = run_pool(m.size(), cfg.parallel, [&](std::size_t i) {
        const auto& e = m.entries()[i];
        ojson report;
        try {
            report = ojson::parse(read_file(m.report_path(e)));
        } catch (const nlohmann::json::exception& ex) {
            fail(ErrorKind::Parse, m.report_path(e).string() + ": " + ex.what());
        }
        const auto chunks = split_json(report, cfg.budget, e.sha256);
        total_chunks += chunks.size();
        write_file_atomic(chunk_file(cfg, e.sha256), chunks_to_jsonl(chunks));
    });
    r.processed = m.size() - errors.size();
    r.failed = errors.size();
    ojson failures = ojson::array();
    for (const auto& [i, what] : errors) {
        const auto& id = m.entries()[i].sha256;
        r.failures.emplace_back(id, what);
        failures.push_back({{"sample", id}, {"error", what}});
        std::error_code ec;
        fs::remove(chunk_file(cfg, id), ec);
        spdlog::warn("chunk: {} failed: {}", id, what);
    }
    // Unchunkable reports are excluded downstream rather than blocking the run.
    write_file_atomic(cfg.chunks_dir() / "failures.json", failures.dump(2) + "\n");
    write_stamp(stamp, digest);
    spdlog::info("chunk: {} reports -> {} chunks ({} failed)", r.processed, total_chunks.load(), r.failed);
    return r;
}

StageResult cmd_embed(const PipelineConfig& cfg, EmbeddingProvider* provider_override) {
    const Manifest m = require_manifest(cfg);
    const std::string chunk_stamp = require_stamp(cfg.chunks_dir() / "stamp.json", "chunk");
    std::unique_ptr<EmbeddingProvider> owned;
    EmbeddingProvider* provider = provider_override;
    if (!provider) {
        owned = make_provider(cfg.effective_provider());
        provider = owned.get();
    }
    const std::string fp = provider->fingerprint();
    const std::string digest = digest_of(ojson{{"chunks", chunk_stamp}, {"fingerprint", fp}});
    const fs::path stamp = cfg.embeddings_dir() / "stamp.json";
    StageResult r;
    if (read_stamp(stamp) == digest) {
        spdlog::info("embed: up to date");
        r.up_to_date = true;
        return r;
    }
    const EmbeddingCache cache(cfg.embeddings_dir());
    const std::size_t calls_before = provider->calls();
    const auto errors = run_pool(m.size(), cfg.parallel, [&](std::size_t i) {
        const auto& id = m.entries()[i].sha256;
        if (!fs::exists(chunk_file(cfg, id))) return;  // failed to chunk
        embed_sample(*provider, &cache, read_chunks(cfg, id));
    });
    r.provider_calls = provider->calls() - calls_before;
    r.processed = m.size() - errors.size();
    r.failed = errors.size();
    ojson failures = ojson::array();
    for (const auto& [i, what] : errors) {
        r.failures.emplace_back(m.entries()[i].sha256, what);
        failures.push_back({{"sample", m.entries()[i].sha256}, {"error", what}});
        spdlog::warn("embed: {}", what);
    }
    write_file_atomic(cfg.embeddings_dir() / "failures.json", failures.dump(2) + "\n");
    if (errors.empty()) write_stamp(stamp, digest);
    spdlog::info("embed: {} samples embedded, {} provider calls, {} failed", r.processed, r.provider_calls, r.failed);
    if (!errors.empty()) {
        fail(ErrorKind::SampleFailed, std::to_string(errors.size()) + " of " + std::to_string(m.size()) +
                                          " samples failed to embed (see embeddings/failures.json); rerun `beacon embed` to retry");
    }
    return r;
}

StageResult cmd_aggregate(const PipelineConfig& cfg) {
    const Manifest m = require_manifest(cfg);
    const std::string embed_stamp = require_stamp(cfg.embeddings_dir() / "stamp.json", "embed");
    const std::string digest = digest_of(ojson{{"embeddings", embed_stamp},
                                               {"percentile", cfg.percentile},
                                               {"train_fraction", cfg.train_fraction},
                                               {"folds", cfg.folds},
                                               {"seed", cfg.seed}});
    const fs::path stamp = cfg.vectors_dir() / "stamp.json";
    StageResult r;
    if (read_stamp(stamp) == digest) {
        spdlog::info("aggregate: up to date");
        r.up_to_date = true;
        return r;
    }
    const std::string fp = make_provider(cfg.effective_provider())->fingerprint();
    const EmbeddingCache cache(cfg.embeddings_dir());
    const SplitPlan plan = make_split_plan(m, cfg.train_fraction, cfg.folds, cfg.seed);

    std::vector<std::pair<std::string, std::vector<ChunkEmbedding>>> samples;
    std::map<std::string, std::size_t> lengths;
    for (const auto& e : m.entries()) {
        if (!fs::exists(chunk_file(cfg, e.sha256))) {
            r.failures.emplace_back(e.sha256, "no chunks");
            continue;
        }
        const auto chunks = read_chunks(cfg, e.sha256);
        auto embs = load_cached_sample(cache, e.sha256, chunks.size(), fp);
        if (!embs) {
            r.failures.emplace_back(e.sha256, "embeddings incomplete");
            continue;
        }
        lengths[e.sha256] = embs->size() * kEmbeddingDim;
        samples.emplace_back(e.sha256, std::move(*embs));
    }
    std::vector<std::size_t> train_lengths;
    for (const auto& id : plan.train_ids) {
        if (auto it = lengths.find(id); it != lengths.end()) train_lengths.push_back(it->second);
    }
    if (train_lengths.empty()) fail(ErrorKind::MissingArtifact, "no training sample has complete embeddings; run `beacon embed` first");
    const AggregateStats stats = freeze_stats(std::move(train_lengths), cfg.percentile);

    DatasetBuild built = build_dataset(samples, stats);
    for (auto& f : built.failures) r.failures.push_back(std::move(f));
    r.processed = built.vectors.size();
    r.failed = r.failures.size();

    fs::create_directories(cfg.vectors_dir());
    write_vectors(cfg.vectors_dir() / "vectors.bin", built.vectors, stats.target_length);
    write_file_atomic(cfg.vectors_dir() / "split.json", split_plan_to_json(plan));

    ojson s;
    s["percentile"] = stats.percentile;
    s["target_length"] = stats.target_length;
    s["train_lengths"] = stats.lengths;
    std::map<std::string, std::size_t> method_counts;
    ojson per_sample = ojson::object();
    for (const auto& v : built.vectors) {
        ++method_counts[to_string(v.method)];
        per_sample[v.sample_id] = {{"source_len", v.source_len}, {"method", to_string(v.method)}};
    }
    s["methods"] = method_counts;
    s["samples"] = per_sample;
    ojson failures = ojson::array();
    for (const auto& [id, why] : r.failures) failures.push_back({{"sample", id}, {"error", why}});
    s["failures"] = failures;
    write_file_atomic(cfg.vectors_dir() / "stats.json", s.dump(2) + "\n");
    write_stamp(stamp, digest);
    spdlog::info("aggregate: {} vectors of length {} (padded {}, pca {}, identity {}), {} failed", r.processed,
                 stats.target_length, method_counts["padded"], method_counts["pca"], method_counts["identity"], r.failed);
    return r;
}

ojson CvSummary::to_json() const {
    ojson j;
    auto& arr = j["folds"] = ojson::array();
    for (const auto& f : folds) {
        arr.push_back({{"fold", f.fold}, {"train", f.train_size}, {"val", f.val_size}, {"val_acc", f.val_acc}});
    }
    j["mean_val_acc"] = mean;
    j["std_val_acc"] = stddev;
    return j;
}

TrainSummary cmd_train(const PipelineConfig& cfg, bool cross_validate) {
    const Dataset d = load_dataset(cfg);
    const auto tcfg = cfg.effective_train();
    const auto spec = model_spec(cfg, d);
    const std::string digest = train_digest(cfg, d, cross_validate);
    const std::string stem = model_stem(cfg);
    const fs::path stamp = cfg.models_dir() / (stem + (cross_validate ? ".cv" : "") + ".stamp.json");
    TrainSummary summary;
    if (read_stamp(stamp) == digest) {
        spdlog::info("train: {} is up to date", stem);
        summary.up_to_date = true;
        return summary;
    }
    fs::create_directories(cfg.models_dir());
    auto log_epoch = [&](const nn::EpochRecord& r) {
        spdlog::info("{} epoch {:>3}: loss {:.4f} train_acc {:.4f} val_acc {:.4f}", stem, r.epoch, r.train_loss, r.train_acc, r.val_acc);
    };

    if (!cross_validate) {
        std::size_t missing = 0;
        const auto train_set = labeled(d, d.plan.train_ids, &missing);
        if (missing) spdlog::warn("train: {} training samples have no vector and are skipped", missing);
        auto result = nn::train(spec, d.manifest.label_set(), train_set, nullptr, tcfg, log_epoch);
        nn::save_model(cfg.model_path(), result.model);
        write_file_atomic(cfg.models_dir() / (stem + ".log.csv"), nn::epoch_log_csv(result.log));
        summary.log = std::move(result.log);
        write_stamp(stamp, digest);
        return summary;
    }

    // Folds must reassemble the training split exactly.
    std::multiset<std::string> reassembled;
    for (const auto& f : d.plan.folds) reassembled.insert(f.begin(), f.end());
    const std::multiset<std::string> expected(d.plan.train_ids.begin(), d.plan.train_ids.end());
    if (reassembled != expected) fail(ErrorKind::State, "split plan folds do not partition the training ids");

    CvSummary cv;
    for (std::size_t f = 0; f < d.plan.folds.size(); ++f) {
        IdList fit_ids;
        for (std::size_t g = 0; g < d.plan.folds.size(); ++g) {
            if (g != f) fit_ids.insert(fit_ids.end(), d.plan.folds[g].begin(), d.plan.folds[g].end());
        }
        const auto fit = labeled(d, fit_ids);
        const auto val = labeled(d, d.plan.folds[f]);
        spdlog::info("train: fold {}/{} ({} train, {} val)", f + 1, d.plan.folds.size(), fit.size(), val.size());
        auto result = nn::train(spec, d.manifest.label_set(), fit, &val, tcfg, log_epoch);
        write_file_atomic(cfg.models_dir() / (stem + ".fold" + std::to_string(f + 1) + ".log.csv"), nn::epoch_log_csv(result.log));
        cv.folds.push_back({f + 1, fit.size(), val.size(), result.log.back().val_acc});
        summary.log = std::move(result.log);
    }
    double sum = 0.0;
    for (const auto& f : cv.folds) sum += f.val_acc;
    cv.mean = sum / static_cast<double>(cv.folds.size());
    double sq = 0.0;
    for (const auto& f : cv.folds) sq += (f.val_acc - cv.mean) * (f.val_acc - cv.mean);
    cv.stddev = cv.folds.size() > 1 ? std::sqrt(sq / static_cast<double>(cv.folds.size() - 1)) : 0.0;
    for (const auto& f : cv.folds) spdlog::info("fold {}: val_acc {:.4f}", f.fold, f.val_acc);
    spdlog::info("cross-validation: mean val_acc {:.4f} +/- {:.4f}", cv.mean, cv.stddev);
    write_file_atomic(cfg.models_dir() / (stem + ".cv.json"), cv.to_json().dump(2) + "\n");
    summary.cv = std::move(cv);
    write_stamp(stamp, digest);
    return summary;
}

EvalReport cmd_eval(const PipelineConfig& cfg) {
    const Dataset d = load_dataset(cfg);
    std::error_code ec;
    if (!fs::exists(cfg.model_path(), ec)) {
        fail(ErrorKind::MissingArtifact, "no trained model at " + cfg.model_path().string() + "; run `beacon train --model " +
                                             model_stem(cfg) + "` first");
    }
    auto model = nn::load_model(cfg.model_path());
    for (const auto& family : d.manifest.label_set()) {
        if (std::find(model.label_set.begin(), model.label_set.end(), family) == model.label_set.end()) {
            fail(ErrorKind::Config, "family '" + family + "' is unknown to the model at " + cfg.model_path().string());
        }
    }
    if (model.label_set != d.manifest.label_set()) {
        fail(ErrorKind::Config, "model label order differs from the manifest's label set");
    }
    std::size_t missing = 0;
    const auto test = labeled(d, d.plan.test_ids, &missing);
    if (missing) spdlog::warn("eval: {} test samples have no vector and are skipped", missing);
    const auto probs = nn::predict(model, test);
    EvalReport report = evaluate_predictions(probs.values(), test.labels, model.label_set, model_stem(cfg));
    fs::create_directories(cfg.reports_out_dir());
    write_file_atomic(cfg.reports_out_dir() / (model_stem(cfg) + ".eval.json"), report.to_json().dump(2) + "\n");
    spdlog::info("eval: {} accuracy {:.4f}, weighted F1 {:.4f} on {} test samples", model_stem(cfg), report.accuracy,
                 report.weighted.f1, report.samples);
    return report;
}

namespace {

EvalReport report_from_json(const ojson& j) {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.samples = j.at("samples").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.weighted = {j.at("weighted").at("precision").get<double>(), j.at("weighted").at("recall").get<double>(),
                  j.at("weighted").at("f1").get<double>()};
    for (const auto& row : j.at("per_class")) {
        ClassReport c;
        c.family = row.at("family").get<std::string>();
        c.support = row.at("support").get<std::size_t>();
        c.accuracy = row.at("accuracy").get<double>();
        c.precision = row.at("precision").get<double>();
        c.recall = row.at("recall").get<double>();
        c.f1 = row.at("f1").get<double>();
        c.degenerate = row.at("degenerate").get<bool>();
        c.auprc = row.at("auprc").is_null() ? std::nan("") : row.at("auprc").get<double>();
        for (const auto& p : row.at("pr_curve")) c.pr_curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        r.per_class.push_back(std::move(c));
    }
    r.confusion.label_set = j.at("label_set").get<std::vector<std::string>>();
    r.confusion.k = r.confusion.label_set.size();
    for (const auto& row : j.at("confusion")) {
        for (const auto& v : row) r.confusion.counts.push_back(v.get<std::size_t>());
    }
    return r;
}

}  // namespace

void cmd_report(const PipelineConfig& cfg) {
    const fs::path eval_path = cfg.reports_out_dir() / (model_stem(cfg) + ".eval.json");
    std::error_code ec;
    if (!fs::exists(eval_path, ec)) {
        fail(ErrorKind::MissingArtifact, "no evaluation at " + eval_path.string() + "; run `beacon eval` first");
    }
    EvalReport r;
    try {
        r = report_from_json(ojson::parse(read_file(eval_path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, eval_path.string() + ": " + e.what());
    }
    const std::string stem = model_stem(cfg);
    write_file_atomic(cfg.reports_out_dir() / (stem + ".table.txt"), r.to_table());
    write_file_atomic(cfg.reports_out_dir() / (stem + ".pr.csv"), r.pr_curves_csv());
    write_file_atomic(cfg.reports_out_dir() / (stem + ".pr.svg"), r.pr_curves_svg());
    spdlog::info("report: wrote {}.table.txt, {}.pr.csv and {}.pr.svg to {}\n{}", stem, stem, stem, cfg.reports_out_dir().string(),
                 r.to_table());
}

EvalReport cmd_run(const PipelineConfig& cfg, bool synthesize) {
    if (synthesize) cmd_synth(cfg);
    cmd_chunk(cfg);
    cmd_embed(cfg);
    cmd_aggregate(cfg);
    cmd_train(cfg, false);
    EvalReport r = cmd_eval(cfg);
    cmd_report(cfg);
    return r;
}

}  // namespace beacon
