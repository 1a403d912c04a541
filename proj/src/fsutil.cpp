#include "beacon/fsutil.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "beacon/error.hpp"

namespace beacon {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) fail(ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ostringstream tmp_name;
    tmp_name << path.filename().string() << ".tmp." << ::getpid() << '.'
             << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter.fetch_add(1);
    const fs::path tmp = path.parent_path() / tmp_name.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::Io, "cannot rename into " + path.string());
    }
}

}  // namespace beacon
