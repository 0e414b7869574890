// Copyright 2026 The mofhei Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "mofhei/model.hpp"

namespace mofhei {

inline constexpr int kModelSchemaVersion = 1;

/// Writes a JSON manifest to `path` and the parameters, as little-endian
/// IEEE-754 doubles in manifest order, to `path` + ".bin".
void save_model(const Model& model, const std::filesystem::path& path);

/// Reads a model written by save_model. Throws ParseError (with byte offset)
/// for malformed or truncated input and VersionError for an unknown schema.
Model load_model(const std::filesystem::path& path);

std::filesystem::path blob_path(const std::filesystem::path& manifest);

}  // namespace mofhei
