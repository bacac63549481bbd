#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace hischro {

/// Write through a temporary file in the same directory and rename it into
/// place, so readers never observe a partial file.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Shortest round-trip text for a double with 17 significant digits.
std::string format_double(double x);

/// Comma-separated table held in memory until written atomically.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    CsvTable& row();
    CsvTable& operator<<(double x);
    CsvTable& operator<<(int x);
    CsvTable& operator<<(long x);
    CsvTable& operator<<(unsigned long x);
    CsvTable& operator<<(const std::string& s);
    CsvTable& operator<<(const char* s) { return *this << std::string(s); }

    std::string str() const;
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

} // namespace hischro
