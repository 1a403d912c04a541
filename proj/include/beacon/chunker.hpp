#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace beacon {

using ojson = nlohmann::ordered_json;

struct ChunkBudget {
    std::size_t max_tokens = 2048;
    std::size_t chars_per_token = 4;

    void validate() const;
    std::size_t max_bytes() const { return max_tokens * chars_per_token; }
};

struct Chunk {
    std::string sample_id;
    std::size_t ordinal = 0;
    std::string text;
    std::size_t est_tokens = 0;
};

// ceil(bytes / chars_per_token).
std::size_t estimate_tokens(std::string_view text, const ChunkBudget& budget);

// Replaces every array, recursively, by an object keyed "0", "1", ...
ojson normalize_lists(const ojson& value);

// Compact one-line form with keys in insertion order and raw UTF-8.
std::string serialize_chunk(const ojson& object);

// Depth-first greedy packing of root-to-leaf paths into objects whose
// serialisation stays within the budget. Each chunk repeats the full key path
// of every leaf it holds. String leaves that cannot fit on their own are cut
// into maximal pieces, one piece per chunk.
std::vector<ojson> split_json_objects(const ojson& report, const ChunkBudget& budget);
std::vector<Chunk> split_json(const ojson& report, const ChunkBudget& budget, const std::string& sample_id = {});

using LeafPath = std::vector<std::string>;
using Leaf = std::pair<LeafPath, ojson>;

// Leaves in depth-first order. Empty objects and arrays count as leaves.
std::vector<Leaf> flatten_leaves(const ojson& value);

// Union of the chunks' leaves in chunk order; consecutive pieces of a split
// string leaf are concatenated back together.
std::vector<Leaf> merge_chunk_leaves(const std::vector<Chunk>& chunks);

// Newline-delimited {"sample_id","ordinal","text"} records.
std::string chunks_to_jsonl(const std::vector<Chunk>& chunks);
std::vector<Chunk> chunks_from_jsonl(std::string_view text, const ChunkBudget& budget);

}  // namespace beacon
