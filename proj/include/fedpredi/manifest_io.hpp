#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "fedpredi/corpus.hpp"

namespace fedpredi {

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);

/// Line-delimited manifest:
///   #fedpredi-manifest C=<C> d=<d> provenance=<free text to end of line>
///   #classes <name_0> ... <name_{C-1}>
///   <id>\t<class_id>\t<f_0>,<f_1>,...
/// Class names and ids must not contain whitespace.
void write_manifest(std::ostream& out, const CorpusManifest& manifest);
CorpusManifest read_manifest(std::istream& in);

void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
CorpusManifest load_manifest(const std::filesystem::path& path);

// JSON object with keys class_counts, feature_dim, separation, noise, seed,
// holdout_per_class. class_count + examples_per_class may replace class_counts.
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
SyntheticSpec synthetic_spec_from_json_text(const std::string& text);

}  // namespace fedpredi
