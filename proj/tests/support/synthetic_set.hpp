#pragma once

// In-memory version of the chunk -> embed -> aggregate path, for tests that
// need realistic sample vectors without touching the pipeline directories.

#include <string>
#include <vector>

#include "beacon/aggregate.hpp"
#include "beacon/chunker.hpp"
#include "beacon/embed.hpp"
#include "beacon/nn/train.hpp"
#include "beacon/synthgen.hpp"

namespace beacon::testing {

struct SyntheticVectors {
    nn::LabeledSet data;
    std::vector<std::string> label_set;
    std::size_t target_length = 0;
};

inline SyntheticVectors synthetic_vectors(const SynthConfig& cfg, double percentile = 0.75) {
    std::vector<std::vector<ChunkEmbedding>> samples;
    std::vector<std::size_t> labels, lengths;
    const ChunkBudget budget;
    for (std::size_t f = 0; f < cfg.n_families; ++f) {
        for (std::size_t i = 0; i < cfg.samples_for(f); ++i) {
            const auto chunks = split_json(synth_report(cfg, f, i), budget, synth_sample_id(cfg, f, i));
            std::vector<ChunkEmbedding> embs;
            for (const auto& c : chunks) {
                const auto v = local_embed(c.text, cfg.seed);
                embs.push_back({c.sample_id, c.ordinal, std::vector<float>(v.begin(), v.end())});
            }
            lengths.push_back(embs.size() * kEmbeddingDim);
            samples.push_back(std::move(embs));
            labels.push_back(f);
        }
    }
    SyntheticVectors out;
    out.target_length = compute_target_length(lengths, percentile);
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto sv = build_sample_vector(samples[s].front().sample_id, samples[s], out.target_length);
        out.data.add(sv.values, labels[s]);
    }
    for (std::size_t f = 0; f < cfg.n_families; ++f) out.label_set.push_back(synth_family_name(f));
    return out;
}

}  // namespace beacon::testing
