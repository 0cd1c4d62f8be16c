#include "revdiff/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include "revdiff/errors.hpp"
#include "revdiff/random_stream.hpp"

namespace revdiff {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool parse_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell = trim(cell);
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) return false;
        out.push_back(v);
    }
    return !out.empty();
}

}  // namespace

SampleSet read_samples_csv(std::istream& in) {
    std::string line;
    std::vector<double> row, coords;
    std::size_t dim = 0, line_no = 0, rows = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const bool ok = parse_row(t, row);
        if (!ok) {
            if (first_content) {
                first_content = false;
                continue;  // header
            }
            throw ConfigError("samples CSV: line " + std::to_string(line_no) + " is not numeric");
        }
        first_content = false;
        if (dim == 0) dim = row.size();
        if (row.size() != dim)
            throw ConfigError("samples CSV: line " + std::to_string(line_no) + " has " +
                              std::to_string(row.size()) + " columns, expected " + std::to_string(dim));
        coords.insert(coords.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw ConfigError("samples CSV: no data rows");
    try {
        return SampleSet(dim, std::move(coords));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("samples CSV: ") + e.what());
    }
}

SampleSet load_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open samples file '" + path + "'");
    return read_samples_csv(in);
}

SampleSet make_grid(std::size_t per_axis, std::size_t dim, double spacing) {
    if (per_axis == 0 || dim == 0) throw ConfigError("grid generator: per_axis and dim must be >= 1");
    if (!(spacing > 0.0)) throw ConfigError("grid generator: spacing must be positive");
    std::size_t total = 1;
    for (std::size_t k = 0; k < dim; ++k) total *= per_axis;
    const double offset = 0.5 * spacing * static_cast<double>(per_axis - 1);
    std::vector<double> coords;
    coords.reserve(total * dim);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rest = idx;
        for (std::size_t k = 0; k < dim; ++k) {
            coords.push_back(spacing * static_cast<double>(rest % per_axis) - offset);
            rest /= per_axis;
        }
    }
    return SampleSet(dim, std::move(coords));
}

SampleSet make_ring(std::size_t n, double radius) {
    if (n == 0) throw ConfigError("ring generator: n must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("ring generator: radius must be positive");
    std::vector<double> coords;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        coords.push_back(radius * std::cos(a));
        coords.push_back(radius * std::sin(a));
    }
    return SampleSet(2, std::move(coords));
}

SampleSet make_blobs(std::size_t blobs, std::size_t per_blob, std::size_t dim, double spread,
                     std::uint64_t seed) {
    if (blobs == 0 || per_blob == 0 || dim == 0)
        throw ConfigError("blobs generator: counts and dim must be >= 1");
    if (!(spread >= 0.0)) throw ConfigError("blobs generator: spread must be >= 0");
    const RandomStream rng(seed);
    std::vector<double> coords;
    for (std::size_t b = 0; b < blobs; ++b) {
        auto sub = rng.substream(Purpose::DataGenerator, b);
        std::vector<double> center(dim);
        for (double& c : center) c = 2.0 * sub.normal();
        for (std::size_t p = 0; p < per_blob; ++p)
            for (std::size_t k = 0; k < dim; ++k) coords.push_back(center[k] + spread * sub.normal());
    }
    return SampleSet(dim, std::move(coords));
}

}  // namespace revdiff
