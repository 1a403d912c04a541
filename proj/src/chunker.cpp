#include "beacon/chunker.hpp"

#include <algorithm>

#include "beacon/error.hpp"

namespace beacon {

namespace {

// Length of `s` once quoted and escaped the way ojson::dump() does it
// (ensure_ascii = false).
std::size_t escaped_length(std::string_view s) {
    std::size_t n = 2;
    for (unsigned char c : s) {
        switch (c) {
            case '"': case '\\': case '\b': case '\f': case '\n': case '\r': case '\t':
                n += 2;
                break;
            default:
                n += c < 0x20 ? 6 : 1;
        }
    }
    return n;
}

std::size_t utf8_sequence_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xe) return 3;
    if ((lead >> 3) == 0x1e) return 4;
    return 1;
}

void collect_leaves(const ojson& value, LeafPath& path, std::vector<Leaf>& out) {
    if ((value.is_object() || value.is_array()) && !value.empty()) {
        if (value.is_object()) {
            for (auto it = value.begin(); it != value.end(); ++it) {
                path.push_back(it.key());
                collect_leaves(it.value(), path, out);
                path.pop_back();
            }
        } else {
            for (std::size_t i = 0; i < value.size(); ++i) {
                path.push_back(std::to_string(i));
                collect_leaves(value[i], path, out);
                path.pop_back();
            }
        }
        return;
    }
    out.emplace_back(path, value);
}

void insert_leaf(ojson& root, const LeafPath& path, const ojson& value) {
    ojson* node = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) node = &(*node)[path[i]];
    (*node)[path.back()] = value;
}

class Packer {
public:
    explicit Packer(const ChunkBudget& budget) : capacity_(budget.max_bytes()) {}

    void add(const LeafPath& path, const ojson& value) {
        const std::string value_text = value.dump();
        if (count_ > 0 && size_ + added_size(path, value_text.size()) <= capacity_) {
            append(path, value, value_text.size());
            return;
        }
        flush();
        const std::size_t alone = 2 + path_cost(path, 0) + value_text.size();
        if (alone <= capacity_) {
            append(path, value, value_text.size());
            return;
        }
        split_oversize(path, value);
    }

    std::vector<ojson> finish() {
        flush();
        if (chunks_.empty()) chunks_.push_back(ojson::object());
        return std::move(chunks_);
    }

private:
    // Bytes for `"k":` at levels [from, d) plus braces of new intermediate objects.
    static std::size_t path_cost(const LeafPath& path, std::size_t from) {
        std::size_t n = 0;
        for (std::size_t i = from; i < path.size(); ++i) n += escaped_length(path[i]) + 1;
        n += 2 * (path.size() - 1 - from);
        return n;
    }

    std::size_t added_size(const LeafPath& path, std::size_t value_len) const {
        // In depth-first order the nodes shared with the chunk are exactly the
        // common prefix with the previously inserted leaf.
        std::size_t p = 0;
        while (p < path.size() && p < prev_.size() && path[p] == prev_[p]) ++p;
        return 1 + path_cost(path, p) + value_len;
    }

    void append(const LeafPath& path, const ojson& value, std::size_t value_len) {
        size_ += count_ == 0 ? 2 + path_cost(path, 0) + value_len : added_size(path, value_len);
        insert_leaf(current_, path, value);
        prev_ = path;
        ++count_;
    }

    void flush() {
        if (count_ == 0) return;
        chunks_.push_back(std::move(current_));
        current_ = ojson::object();
        prev_.clear();
        size_ = 0;
        count_ = 0;
    }

    void split_oversize(const LeafPath& path, const ojson& value) {
        auto where = [&] {
            std::string p;
            for (const auto& k : path) p += "/" + k;
            return p.empty() ? std::string("/") : p;
        };
        if (!value.is_string()) {
            fail(ErrorKind::UnsplittableLeaf, "leaf " + where() + " (" + value.type_name() + ") exceeds the chunk budget");
        }
        const std::size_t overhead = 2 + path_cost(path, 0) + 2;  // skeleton plus the value's quotes
        const auto& s = value.get_ref<const std::string&>();
        std::size_t pos = 0;
        while (pos < s.size()) {
            std::size_t room = overhead < capacity_ ? capacity_ - overhead : 0;
            std::size_t end = pos;
            while (end < s.size()) {
                const std::size_t len = std::min(utf8_sequence_length(static_cast<unsigned char>(s[end])), s.size() - end);
                const std::size_t cost = escaped_length(std::string_view(s).substr(end, len)) - 2;
                if (cost > room) break;
                room -= cost;
                end += len;
            }
            if (end == pos) {
                fail(ErrorKind::UnsplittableLeaf, "key path " + where() + " leaves no room for its value within the chunk budget");
            }
            append(path, ojson(s.substr(pos, end - pos)), escaped_length(std::string_view(s).substr(pos, end - pos)));
            pos = end;
            if (pos < s.size()) flush();
        }
    }

    std::size_t capacity_;
    std::vector<ojson> chunks_;
    ojson current_ = ojson::object();
    LeafPath prev_;
    std::size_t size_ = 0;
    std::size_t count_ = 0;
};

}  // namespace

void ChunkBudget::validate() const {
    if (max_tokens < 1) fail(ErrorKind::InvalidArgument, "chunk budget: max_tokens must be at least 1");
    if (chars_per_token < 1) fail(ErrorKind::InvalidArgument, "chunk budget: chars_per_token must be at least 1");
}

std::size_t estimate_tokens(std::string_view text, const ChunkBudget& budget) {
    return (text.size() + budget.chars_per_token - 1) / budget.chars_per_token;
}

ojson normalize_lists(const ojson& value) {
    if (value.is_array()) {
        ojson out = ojson::object();
        for (std::size_t i = 0; i < value.size(); ++i) out[std::to_string(i)] = normalize_lists(value[i]);
        return out;
    }
    if (value.is_object()) {
        ojson out = ojson::object();
        for (auto it = value.begin(); it != value.end(); ++it) out[it.key()] = normalize_lists(it.value());
        return out;
    }
    return value;
}

std::string serialize_chunk(const ojson& object) { return object.dump(); }

std::vector<Leaf> flatten_leaves(const ojson& value) {
    std::vector<Leaf> out;
    LeafPath path;
    if ((value.is_object() || value.is_array()) && value.empty()) return out;
    collect_leaves(value, path, out);
    return out;
}

std::vector<ojson> split_json_objects(const ojson& report, const ChunkBudget& budget) {
    budget.validate();
    const ojson normalized = normalize_lists(report);
    if (!normalized.is_object()) fail(ErrorKind::InvalidArgument, "split_json: report must be a JSON object or array");
    Packer packer(budget);
    for (const auto& [path, value] : flatten_leaves(normalized)) packer.add(path, value);
    return packer.finish();
}

std::vector<Chunk> split_json(const ojson& report, const ChunkBudget& budget, const std::string& sample_id) {
    auto objects = split_json_objects(report, budget);
    std::vector<Chunk> chunks;
    chunks.reserve(objects.size());
    for (std::size_t i = 0; i < objects.size(); ++i) {
        Chunk c;
        c.sample_id = sample_id;
        c.ordinal = i;
        c.text = serialize_chunk(objects[i]);
        c.est_tokens = estimate_tokens(c.text, budget);
        if (c.est_tokens > budget.max_tokens) {
            fail(ErrorKind::State, "split_json: chunk " + std::to_string(i) + " overran the budget (" + std::to_string(c.est_tokens) + " tokens)");
        }
        chunks.push_back(std::move(c));
    }
    return chunks;
}

std::vector<Leaf> merge_chunk_leaves(const std::vector<Chunk>& chunks) {
    std::vector<Leaf> out;
    for (const auto& c : chunks) {
        for (auto& leaf : flatten_leaves(ojson::parse(c.text))) {
            if (!out.empty() && out.back().first == leaf.first && out.back().second.is_string() && leaf.second.is_string()) {
                out.back().second = out.back().second.get<std::string>() + leaf.second.get<std::string>();
            } else {
                out.push_back(std::move(leaf));
            }
        }
    }
    return out;
}

std::string chunks_to_jsonl(const std::vector<Chunk>& chunks) {
    std::string out;
    for (const auto& c : chunks) {
        ojson rec = ojson::object();
        rec["sample_id"] = c.sample_id;
        rec["ordinal"] = c.ordinal;
        rec["text"] = c.text;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

std::vector<Chunk> chunks_from_jsonl(std::string_view text, const ChunkBudget& budget) {
    std::vector<Chunk> chunks;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto rec = ojson::parse(line);
            Chunk c;
            c.sample_id = rec.at("sample_id").get<std::string>();
            c.ordinal = rec.at("ordinal").get<std::size_t>();
            c.text = rec.at("text").get<std::string>();
            c.est_tokens = estimate_tokens(c.text, budget);
            if (c.ordinal != chunks.size()) fail(ErrorKind::Parse, "chunk record " + std::to_string(line_no) + ": ordinal out of sequence");
            chunks.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, "chunk record " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return chunks;
}

}  // namespace beacon
