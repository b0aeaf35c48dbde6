#include <CLI11.hpp>
#include <iostream>

#include "common.hpp"
#include "fedpredi/partition.hpp"
#include "fedpredi/rng.hpp"

using namespace fedpredi;

int main(int argc, char** argv) {
  CLI::App app{"Partition data across federated clients"};
  app.require_subcommand(1);

  std::size_t n = 0, k = 4, min_size = 1;
  double alpha = 0.0;
  bool iid = false;
  std::uint64_t seed = 0;
  std::string pool_path, out_dir;
  auto* unlabeled = app.add_subcommand("unlabeled", "Split an unlabeled volume across clients (IID or Dirichlet)");
  auto* n_opt = unlabeled->add_option("--n", n, "total examples (taken from --pool when given)");
  unlabeled->add_option("--k", k, "clients")->check(CLI::PositiveNumber);
  auto* alpha_opt = unlabeled->add_option("--alpha", alpha, "Dirichlet concentration")->check(CLI::PositiveNumber);
  auto* iid_opt = unlabeled->add_flag("--iid", iid, "equal shares");
  alpha_opt->excludes(iid_opt);
  unlabeled->add_option("--seed", seed, "partition seed");
  unlabeled->add_option("--min-size", min_size, "minimum examples per client");
  auto* pool_opt = unlabeled->add_option("--pool", pool_path, "manifest to cut into client files")->check(CLI::ExistingFile);
  unlabeled->add_option("--out-dir", out_dir, "directory for client_<k>.manifest files")->needs(pool_opt);
  n_opt->excludes(pool_opt);

  std::string in_path;
  double rho = 0.0, sigma = 0.0, sigma_tol = 0.5;
  std::size_t per_class = 10, retries = 200;
  auto* predi = app.add_subcommand("predi", "Prevalence/disparity-controlled labeled partition");
  predi->add_option("--in", in_path, "labeled training manifest")->required()->check(CLI::ExistingFile);
  predi->add_option("--rho", rho, "target mean class prevalence")->required();
  predi->add_option("--sigma", sigma, "target std of per-client class counts")->required();
  predi->add_option("--sigma-tolerance", sigma_tol, "accepted |sigma - target|");
  predi->add_option("--max-retries", retries, "count-target redraws before giving up");
  predi->add_option("--seed", seed, "partition seed");
  predi->add_option("--k", k, "clients")->check(CLI::PositiveNumber);
  predi->add_option("--s", per_class, "labeled examples per held class")->check(CLI::PositiveNumber);
  predi->add_option("--out-dir", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  return tools::guarded_main([&] {
    if (*unlabeled) {
      if (!iid && !*alpha_opt) throw Error("pass --iid or --alpha");
      CorpusManifest pool;
      if (!pool_path.empty()) {
        pool = load_manifest(pool_path);
        n = pool.size();
      } else if (!*n_opt) {
        throw Error("pass --n or --pool");
      }
      const VolumeMode mode = iid ? VolumeMode(IidVolume{}) : VolumeMode(DirichletVolume{alpha});
      const auto split = partition_unlabeled(n, k, mode, seed, min_size);
      for (std::size_t i = 0; i < split.client_sizes.size(); ++i) std::cout << (i ? " " : "") << split.client_sizes[i];
      std::cout << "\ncv " << format_double(coefficient_of_variation(split.client_sizes)) << "\n";
      if (!out_dir.empty()) tools::save_client_dir(out_dir, apply_volume_split(pool, split, mix_seed({seed, 1})));
    } else {
      const auto train = load_manifest(in_path);
      const auto subsets = sample_labeled_subsets(train, k, per_class, mix_seed({seed, 0}));
      PartitionTarget target;
      target.rho_target = rho;
      target.sigma_target = sigma;
      target.sigma_tolerance = sigma_tol;
      target.max_retries = retries;
      target.seed = seed;
      const auto r = predi_partition(subsets, target, train.class_count(), k, per_class);
      tools::save_client_dir(out_dir, r.clients);
      save_assignment_matrix(std::filesystem::path(out_dir) / "matrix.txt", r.matrix);
      const auto st = r.matrix.stats();
      std::cout << "rho_bar " << format_double(st.rho_bar) << " sigma " << format_double(st.sigma) << " attempts "
                << r.attempts << "\n";
    }
    return 0;
  });
}
