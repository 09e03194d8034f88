#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hybrid/phase_grid.hpp"

namespace hybrid {

/// JSON text with every floating-point number printed as %.17g (integers and
/// strings as usual, non-finite numbers as null). Object keys come out sorted.
std::string dump_json(const nlohmann::json& j, int indent = 2);

/// Writes `text` to `path` through a temporary sibling and a rename, so readers
/// never see a half-written file. Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_text(const std::filesystem::path& path);

/// Collects named outputs and writes them only once everything is rendered.
class OutputSet {
public:
    void add(std::string relative_path, std::string text);
    bool empty() const { return files_.empty(); }
    const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }
    /// Writes every file below `dir` (created if missing).
    void commit(const std::filesystem::path& dir) const;

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

/// "x,p,value" CSV for a real field (see to_csv) or a table with a header row.
std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows);

}  // namespace hybrid
