#pragma once

#include <iosfwd>
#include <string>

#include "stratostab/types.hpp"

namespace stratostab {

/// Dense matrix file format: header line `rows cols real|complex`, then
/// whitespace-separated row-major entries; complex entries are token pairs
/// `re im`. Write-then-read is the identity.
Matrix read_matrix(std::istream& in, const std::string& origin = "<stream>");
Matrix read_matrix_file(const std::string& path);
void write_matrix(std::ostream& out, const Matrix& a);
void write_matrix_file(const std::string& path, const Matrix& a);

}  // namespace stratostab
