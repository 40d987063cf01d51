#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace ips {

/// Formats a double with full round-trip precision ("%.17g"); all CSV output
/// goes through this so identical (config, seed) runs are byte-identical.
std::string format_double(double x);

std::uint64_t fnv1a64(const std::string& bytes);
std::string to_hex(std::uint64_t x);

/// CSV file with a `# key=value` header stanza followed by a column row.
/// No timestamps or machine identifiers ever go into the stanza.
class CsvWriter {
public:
    CsvWriter(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& stanza,
              const std::vector<std::string>& columns);

    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& cells);
    void close();
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::size_t n_columns_ = 0;
};

/// Reads the `# key=value` stanza of a CSV produced by CsvWriter.
std::map<std::string, std::string> read_csv_stanza(const std::string& path);

std::string read_file(const std::string& path);

}  // namespace ips
