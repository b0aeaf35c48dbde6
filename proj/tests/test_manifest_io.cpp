#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fedpredi/error.hpp"
#include "fedpredi/manifest_io.hpp"
#include "fedpredi/rng.hpp"

using namespace fedpredi;

TEST_CASE("manifest write-read-write is byte identical") {
  SyntheticSpec spec;
  spec.class_counts = {5, 7, 3};
  spec.feature_dim = 5;
  spec.seed = 8;
  auto m = generate_synthetic(spec).manifest;
  m.examples[0].features[0] = 0.1;
  m.examples[0].features[1] = -0.0;
  m.examples[0].features[2] = 1e-300;
  m.examples[0].features[3] = 123456789.125;
  m.examples[1].class_id = kUnlabeled;
  m.provenance = "synthetic run with spaces";

  std::ostringstream first;
  write_manifest(first, m);
  std::istringstream in(first.str());
  const auto back = read_manifest(in);
  CHECK(back == m);
  std::ostringstream second;
  write_manifest(second, back);
  CHECK(first.str() == second.str());
}

TEST_CASE("shortest decimal formatting round-trips random doubles") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double v = std::ldexp(rng.normal(), static_cast<int>(rng.uniform_index(200)) - 100);
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("manifest header layout") {
  CorpusManifest m;
  m.class_names = {"a", "b"};
  m.feature_dim = 2;
  m.provenance = "p";
  m.examples.push_back({"x1", 1, {0.5, -2}});
  std::ostringstream out;
  write_manifest(out, m);
  CHECK(out.str() == "#fedpredi-manifest C=2 d=2 provenance=p\n#classes a b\nx1\t1\t0.5,-2\n");
}

TEST_CASE("malformed manifests are rejected") {
  std::istringstream bad1("hello\n");
  CHECK_THROWS_AS(read_manifest(bad1), Error);
  std::istringstream bad2("#fedpredi-manifest C=2 d=1 provenance=\n#classes a\n");
  CHECK_THROWS_AS(read_manifest(bad2), Error);
  std::istringstream bad3("#fedpredi-manifest C=1 d=2 provenance=\n#classes a\nx\t0\t1\n");
  CHECK_THROWS_AS(read_manifest(bad3), Error);
  std::istringstream bad4("#fedpredi-manifest C=1 d=1 provenance=\n#classes a\nx\t3\t1\n");
  CHECK_THROWS_AS(read_manifest(bad4), Error);
}

TEST_CASE("synthetic spec from JSON") {
  auto s = synthetic_spec_from_json_text(R"({"class_count": 3, "examples_per_class": 10, "feature_dim": 4, "seed": 2})");
  CHECK(s.class_counts == std::vector<std::size_t>{10, 10, 10});
  CHECK(s.feature_dim == 4);
  CHECK_THROWS_AS(synthetic_spec_from_json_text("{"), Error);
}
