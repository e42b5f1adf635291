#pragma once

#include <string>
#include <string_view>

#include "structfile/data.hpp"

namespace structfile {

// Textual data representation.
//
//   scalar      decimal; floats in shortest round-trip form
//   real*16     x"HEX" of the 16 little-endian cell bytes (lossless)
//   string      "..." with \" \\ \n \xNN escapes; opaque strings as x"HEX"
//   matrix      free-dimension counts in dimension order, then the cells as
//               a flat [ ... ] list in storage order
//   array       [ elem, elem, ... ]   (size derived from the contents)
//   struct      { name = value, ... } with absent optional fields omitted
//   union       variantname : value
//   bound any   ( typetext ) value
//
// Commas are optional on input. Printing then reading is lossless.

void printData(const DataHandle& d, std::string& out, bool pretty = false);
std::string printData(const DataHandle& d, bool pretty = false);

// Builds an in-memory tree from the printData form of type t.
DataHandle readData(const TypePtr& t, const EnvPtr& env, std::string_view in);

}  // namespace structfile
