#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>

#include "revdiff/core.hpp"

namespace revdiff {

/// One point per row, comma separated. A first row that does not parse as
/// numbers is treated as a header; blank lines and lines starting with '#'
/// are skipped. Throws ConfigError on ragged or non-numeric rows.
SampleSet read_samples_csv(std::istream& in);
SampleSet load_samples_csv(const std::string& path);

/// per_axis^dim points on a regular grid centered at the origin.
SampleSet make_grid(std::size_t per_axis, std::size_t dim, double spacing = 1.0);

/// n points evenly spaced on a circle in the plane, the first at angle 0.
SampleSet make_ring(std::size_t n, double radius = 1.0);

/// `blobs` centers drawn from N(0, 4 Id), each with `per_blob` points at
/// Gaussian spread `spread` around it.
SampleSet make_blobs(std::size_t blobs, std::size_t per_blob, std::size_t dim, double spread,
                     std::uint64_t seed);

}  // namespace revdiff
