#include "fedpredi/manifest_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fedpredi/error.hpp"

namespace fedpredi {
namespace {

constexpr std::string_view kMagic = "#fedpredi-manifest";
constexpr std::string_view kClasses = "#classes";

bool has_space(std::string_view s) {
  return s.find_first_of(" \t\r\n") != std::string_view::npos;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw Error("bad " + std::string(what) + ": '" + std::string(text) + "'");
  return v;
}

std::string_view take_key(std::string_view& rest, std::string_view key) {
  if (rest.substr(0, key.size()) != key) throw Error("manifest header: expected '" + std::string(key) + "'");
  rest.remove_prefix(key.size());
  auto sp = rest.find(' ');
  std::string_view value = rest.substr(0, sp);
  rest.remove_prefix(sp == std::string_view::npos ? rest.size() : sp + 1);
  return value;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format double");
  return std::string(buf, p);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw Error("bad decimal '" + std::string(text) + "'");
  return v;
}

void write_manifest(std::ostream& out, const CorpusManifest& m) {
  m.validate();
  if (m.provenance.find('\n') != std::string::npos) throw Error("provenance must be a single line");
  out << kMagic << " C=" << m.class_count() << " d=" << m.feature_dim << " provenance=" << m.provenance << '\n';
  out << kClasses;
  for (const auto& name : m.class_names) {
    if (name.empty() || has_space(name)) throw Error("class name '" + name + "' is empty or contains whitespace");
    out << ' ' << name;
  }
  out << '\n';
  std::string line;
  for (const auto& e : m.examples) {
    if (e.id.empty() || has_space(e.id)) throw Error("example id '" + e.id + "' is empty or contains whitespace");
    line.clear();
    line += e.id;
    line += '\t';
    line += std::to_string(e.class_id);
    line += '\t';
    for (std::size_t j = 0; j < e.features.size(); ++j) {
      if (j) line += ',';
      line += format_double(e.features[j]);
    }
    line += '\n';
    out << line;
  }
}

CorpusManifest read_manifest(std::istream& in) {
  CorpusManifest m;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty manifest");
  std::string_view rest(line);
  if (rest.substr(0, kMagic.size()) != kMagic || rest.size() <= kMagic.size()) throw Error("not a manifest file");
  rest.remove_prefix(kMagic.size() + 1);
  const std::size_t classes = parse_size(take_key(rest, "C="), "class count");
  m.feature_dim = parse_size(take_key(rest, "d="), "feature dimension");
  if (rest.substr(0, 11) != "provenance=") throw Error("manifest header: expected 'provenance='");
  m.provenance = std::string(rest.substr(11));

  if (!std::getline(in, line)) throw Error("manifest missing class line");
  std::istringstream names(line);
  std::string tok;
  names >> tok;
  if (tok != kClasses) throw Error("manifest: expected '#classes' line");
  while (names >> tok) m.class_names.push_back(tok);
  if (m.class_names.size() != classes) throw Error("manifest declares C=" + std::to_string(classes) + " but names " + std::to_string(m.class_names.size()));

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string_view v(line);
    const auto t1 = v.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : v.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) throw Error("malformed manifest record: '" + line + "'");
    Example e;
    e.id = std::string(v.substr(0, t1));
    const auto cls = v.substr(t1 + 1, t2 - t1 - 1);
    auto [p, ec] = std::from_chars(cls.data(), cls.data() + cls.size(), e.class_id);
    if (ec != std::errc() || p != cls.data() + cls.size()) throw Error("bad class id in record '" + e.id + "'");
    std::string_view feats = v.substr(t2 + 1);
    e.features.reserve(m.feature_dim);
    while (!feats.empty()) {
      const auto comma = feats.find(',');
      e.features.push_back(parse_double(feats.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      feats.remove_prefix(comma + 1);
    }
    m.examples.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void save_manifest(const std::filesystem::path& path, const CorpusManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_manifest(out, manifest);
  if (!out) throw Error("write failed: " + path.string());
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_manifest(in);
}

SyntheticSpec synthetic_spec_from_json_text(const std::string& text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic spec: ") + e.what());
  }
  SyntheticSpec s;
  try {
    if (j.contains("class_counts")) {
      s.class_counts = j.at("class_counts").get<std::vector<std::size_t>>();
    } else {
      s.class_counts.assign(j.at("class_count").get<std::size_t>(), j.at("examples_per_class").get<std::size_t>());
    }
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.separation = j.value("separation", s.separation);
    s.noise = j.value("noise", s.noise);
    s.seed = j.value("seed", s.seed);
    s.holdout_per_class = j.value("holdout_per_class", s.holdout_per_class);
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return synthetic_spec_from_json_text(ss.str());
}

}  // namespace fedpredi
