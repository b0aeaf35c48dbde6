#include <CLI11.hpp>
#include <iostream>

#include "common.hpp"

using namespace fedpredi;

int main(int argc, char** argv) {
  CLI::App app{"Build and split feature-vector corpora"};
  app.require_subcommand(1);

  std::string spec_path, out_path;
  auto* synth = app.add_subcommand("synth", "Generate a Gaussian-cluster corpus from a JSON spec");
  synth->add_option("--spec", spec_path, "synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "output manifest")->required();

  std::string in_path, train_out, test_out;
  double test_frac = 0.2;
  std::uint64_t seed = 0;
  std::size_t min_count = 1;
  auto* split = app.add_subcommand("split", "Stratified train/test split");
  split->add_option("--in", in_path, "input manifest")->required()->check(CLI::ExistingFile);
  split->add_option("--test-frac", test_frac, "test fraction per class")->check(CLI::Range(0.0, 1.0));
  split->add_option("--seed", seed, "split seed");
  split->add_option("--min-count", min_count, "drop classes with fewer examples before splitting");
  split->add_option("--train-out", train_out, "train manifest")->required();
  split->add_option("--test-out", test_out, "test manifest")->required();

  CLI11_PARSE(app, argc, argv);

  return tools::guarded_main([&] {
    if (*synth) {
      const auto corpus = generate_synthetic(load_synthetic_spec(spec_path));
      save_manifest(out_path, corpus.manifest);
      std::cout << "examples " << corpus.manifest.size() << " classes " << corpus.manifest.class_count()
                << " separability " << format_double(corpus.separability) << "\n";
    } else {
      const auto filtered = filter_min_count(load_manifest(in_path), min_count);
      const auto s = train_test_split(filtered.kept, test_frac, seed);
      save_manifest(train_out, s.train);
      save_manifest(test_out, s.test);
      std::cout << "train " << s.train.size() << " test " << s.test.size() << " classes " << s.train.class_count()
                << " dropped " << filtered.remainder.size() << "\n";
    }
    return 0;
  });
}
