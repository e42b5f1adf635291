#pragma once

// Internals shared between the data model and the codecs; not installed.

#include <unordered_set>

#include "structfile/data.hpp"

namespace structfile::detail {

// Builds the default instance of a type. `building` guards against type
// cycles that have no finite default instance (e.g. a union whose variant 0
// recurses into itself); hitting one raises ValidationError.
ImplPtr newDirectImpl(const TypePtr& t, const EnvPtr& env,
                      std::unordered_set<const TypeNode*>& building);
ImplPtr newDirectImpl(const TypePtr& t, const EnvPtr& env);

// An unbound any node for the given declaration site.
ImplPtr makeAnyNode(const EnvPtr& declEnv);
// An any node already bound to `target` (used by the decoders).
ImplPtr makeBoundAny(const EnvPtr& declEnv, TypePtr boundType, EnvPtr boundEnv, ImplPtr target);

void checkIntRange(NumKind k, std::int64_t v);

// Scalar access over a canonical little-endian cell, with the read checks the
// handle contract specifies (getInt rejects floats, flags lossy u8 reads).
std::int64_t scalarToInt(const std::byte* cell, NumKind k);
double scalarToDouble(const std::byte* cell, NumKind k);
void scalarAssignInt(std::byte* cell, NumKind k, std::int64_t v);
void scalarAssignDouble(std::byte* cell, NumKind k, double v);

// Checks a matrix value against the declared kind and dimensions.
void checkMatrixAssign(const NumType& declared, const MatrixValue& m);

}  // namespace structfile::detail
