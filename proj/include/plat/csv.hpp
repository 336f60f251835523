// Minimal numeric CSV support shared by the report writers and the plotter.

#ifndef PLAT_CSV_HPP
#define PLAT_CSV_HPP

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace plat {

/// Shortest decimal that round-trips to the same double; "inf"/"-inf"/"nan"
/// for non-finite values.
std::string format_real(double value);

class CsvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a named column; throws CsvError when absent.
    std::size_t column(const std::string& name) const;
};

/// Parses a header line followed by numeric rows. Errors name the 1-based
/// line number of the offending row.
CsvTable read_csv(std::istream& in);

}  // namespace plat

#endif  // PLAT_CSV_HPP
