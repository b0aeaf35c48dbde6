#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedpredi/error.hpp"
#include "fedpredi/learners.hpp"
#include "fedpredi/rng.hpp"

namespace fedpredi {

ParamVector::ParamVector(std::vector<SegmentShape> shapes) {
  std::size_t offset = 0;
  for (auto& s : shapes) {
    if (s.name.empty() || s.out_dim == 0 || s.in_dim == 0) throw Error("segment shapes must be named and nonempty");
    for (const auto& existing : segments_)
      if (existing.shape.name == s.name) throw Error("duplicate segment '" + s.name + "'");
    const std::size_t n = s.size();
    segments_.push_back({std::move(s), offset});
    offset += n;
  }
  values_.assign(offset, 0.0);
}

ParamVector::ParamVector(std::vector<SegmentShape> shapes, std::vector<double> values) : ParamVector(std::move(shapes)) {
  if (values.size() != values_.size())
    throw Error("parameter count " + std::to_string(values.size()) + " does not match layout size " + std::to_string(values_.size()));
  values_ = std::move(values);
}

std::vector<SegmentShape> ParamVector::shapes() const {
  std::vector<SegmentShape> out;
  for (const auto& s : segments_) out.push_back(s.shape);
  return out;
}

bool ParamVector::has(std::string_view name) const {
  return std::any_of(segments_.begin(), segments_.end(), [&](const Segment& s) { return s.shape.name == name; });
}

const Segment& ParamVector::segment(std::string_view name) const {
  for (const auto& s : segments_)
    if (s.shape.name == name) return s;
  throw Error("no parameter segment '" + std::string(name) + "'");
}

std::span<const double> ParamVector::segment_values(std::string_view name) const {
  const auto& s = segment(name);
  return std::span<const double>(values_).subspan(s.offset, s.shape.size());
}

std::span<double> ParamVector::segment_values(std::string_view name) {
  const auto& s = segment(name);
  return std::span<double>(values_).subspan(s.offset, s.shape.size());
}

bool ParamVector::same_layout(const ParamVector& other) const { return segments_ == other.segments_; }

ParamVector ParamVector::select(std::initializer_list<std::string_view> names) const {
  std::vector<SegmentShape> shapes;
  std::vector<double> values;
  for (auto name : names) {
    const auto& s = segment(name);
    shapes.push_back(s.shape);
    auto v = segment_values(name);
    values.insert(values.end(), v.begin(), v.end());
  }
  return ParamVector(std::move(shapes), std::move(values));
}

ParamVector ParamVector::concat(const ParamVector& a, const ParamVector& b) {
  auto shapes = a.shapes();
  auto more = b.shapes();
  shapes.insert(shapes.end(), more.begin(), more.end());
  std::vector<double> values(a.values_.begin(), a.values_.end());
  values.insert(values.end(), b.values_.begin(), b.values_.end());
  return ParamVector(std::move(shapes), std::move(values));
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void init_segment(ParamVector& params, std::string_view name, std::uint64_t seed) {
  const auto shape = params.segment(name).shape;
  auto v = params.segment_values(name);
  Rng rng(mix_seed({seed, hash_string(name)}));
  const double scale = 1.0 / std::sqrt(static_cast<double>(shape.in_dim));
  const std::size_t weights = shape.out_dim * shape.in_dim;
  for (std::size_t i = 0; i < weights; ++i) v[i] = scale * rng.normal();
  std::fill(v.begin() + static_cast<std::ptrdiff_t>(weights), v.end(), 0.0);
}

ParamVector init_autoencoder(std::size_t feature_dim, std::size_t latent_dim, std::uint64_t seed) {
  ParamVector p({{std::string(kEncoder), latent_dim, feature_dim}, {std::string(kDecoder), feature_dim, latent_dim}});
  init_segment(p, kEncoder, seed);
  init_segment(p, kDecoder, seed);
  return p;
}

ParamVector attach_head(const ParamVector& encoder, std::size_t classes, std::uint64_t seed) {
  const auto& enc = encoder.segment(kEncoder).shape;
  ParamVector head({{std::string(kHead), classes, enc.out_dim}});
  init_segment(head, kHead, seed);
  return ParamVector::concat(encoder.select({kEncoder}), head);
}

ParamVector init_linear_classifier(std::size_t feature_dim, std::size_t classes, std::uint64_t seed) {
  ParamVector p({{std::string(kHead), classes, feature_dim}});
  init_segment(p, kHead, seed);
  return p;
}

std::string checksum(const ParamVector& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : params.values()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {
constexpr std::string_view kCheckpointMagic = "fedpredi-params 1";
}

void write_checkpoint(std::ostream& out, const ParamVector& params) {
  out << kCheckpointMagic << '\n' << "segments " << params.segments().size() << '\n';
  for (const auto& s : params.segments()) out << s.shape.name << ' ' << s.shape.out_dim << ' ' << s.shape.in_dim << '\n';
  out << "values " << params.size() << '\n';
  std::string bytes(params.size() * 8, '\0');
  std::size_t i = 0;
  for (double v : params.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes[i++] = static_cast<char>((bits >> (8 * b)) & 0xffU);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("checkpoint write failed");
}

ParamVector read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw Error("not a parameter checkpoint");
  std::size_t nseg = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "segments %zu", &nseg) != 1) throw Error("bad checkpoint segment count");
  std::vector<SegmentShape> shapes;
  for (std::size_t i = 0; i < nseg; ++i) {
    if (!std::getline(in, line)) throw Error("truncated checkpoint header");
    std::istringstream ss(line);
    SegmentShape s;
    if (!(ss >> s.name >> s.out_dim >> s.in_dim)) throw Error("bad checkpoint segment line '" + line + "'");
    shapes.push_back(std::move(s));
  }
  std::size_t count = 0;
  if (!std::getline(in, line) || std::sscanf(line.c_str(), "values %zu", &count) != 1) throw Error("bad checkpoint value count");
  std::string bytes(count * 8, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) throw Error("truncated checkpoint data");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    values[i] = std::bit_cast<double>(bits);
  }
  return ParamVector(std::move(shapes), std::move(values));
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params);
}

ParamVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace fedpredi
