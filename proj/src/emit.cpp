#include "hybrid/emit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

std::string format_double(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s(buf);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
}

void write_value(std::ostringstream& out, const nlohmann::json& j, int indent, int depth) {
    const auto newline = [&](int d) {
        if (indent < 0) return;
        out << '\n' << std::string(static_cast<std::size_t>(indent * d), ' ');
    };
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            if (j.empty()) {
                out << "{}";
                return;
            }
            out << '{';
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out << ',';
                first = false;
                newline(depth + 1);
                out << nlohmann::json(it.key()).dump() << (indent < 0 ? ":" : ": ");
                write_value(out, it.value(), indent, depth + 1);
            }
            newline(depth);
            out << '}';
            return;
        }
        case nlohmann::json::value_t::array: {
            if (j.empty()) {
                out << "[]";
                return;
            }
            // Short numeric rows stay on one line.
            const bool flat = j.size() <= 4 && std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_number(); });
            out << '[';
            bool first = true;
            for (const auto& e : j) {
                if (!first) out << (flat ? ", " : ",");
                first = false;
                if (!flat) newline(depth + 1);
                write_value(out, e, indent, depth + 1);
            }
            if (!flat) newline(depth);
            out << ']';
            return;
        }
        case nlohmann::json::value_t::number_float:
            out << format_double(j.get<double>());
            return;
        default:
            out << j.dump();
    }
}

}  // namespace

std::string dump_json(const nlohmann::json& j, int indent) {
    std::ostringstream out;
    write_value(out, j, indent, 0);
    out << '\n';
    return out.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(text.data(), static_cast<std::streamsize>(text.size()));
        f.flush();
        if (!f) {
            f.close();
            std::filesystem::remove(tmp, ec);
            throw IoError("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot move output into place at " + path.string());
    }
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void OutputSet::add(std::string relative_path, std::string text) {
    files_.emplace_back(std::move(relative_path), std::move(text));
}

void OutputSet::commit(const std::filesystem::path& dir) const {
    for (const auto& [rel, text] : files_) write_atomic(dir / rel, text);
}

std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    if (header.empty()) throw InvariantError("CSV needs a header row");
    std::ostringstream out;
    for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
    out << '\n';
    char buf[40];
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw InvariantError("CSV row width does not match the header");
        for (std::size_t k = 0; k < row.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", row[k]);
            out << (k ? "," : "") << buf;
        }
        out << '\n';
    }
    return out.str();
}

}  // namespace hybrid
