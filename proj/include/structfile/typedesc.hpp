#pragma once

#include "structfile/data.hpp"

namespace structfile {

// The built-in self-describing type: a recursive union that externalizes
// type trees as ordinary data values.
//
//   typedef TypeDescriptor = union {
//       num    : struct { isFloat : integer*1; size : integer*1;
//                         dim : array of integer*4; };
//       string : struct { isOpaque : integer*1; size : integer*4; };
//       struct : struct { isUnion : integer*1;
//                         fields : array of struct {
//                             name : string;
//                             typ : type TypeDescriptor;
//                             isOptional : integer*1; }; };
//       array  : struct { size : integer*4; subtype : type TypeDescriptor; };
//       named  : struct { name : string; };
//   };
//
// Free sizes and dimensions encode as -1. Named references stay symbolic;
// the any type maps to the named variant with the reserved name "any".
// Unsigned integer kinds map to the signed kind of the same width (the
// descriptor has no signedness field).

const EnvPtr& typeDescriptorEnv();
// The union node itself (the resolved body of the typedef).
const TypePtr& typeDescriptorType();

// Builds a TypeDescriptor value describing t.
DataHandle typeToData(const TypePtr& t, const TypeEnv& env);

// Inverse of typeToData; validates widths, sizes, and dimension values.
TypePtr dataToType(const DataHandle& d);

}  // namespace structfile
