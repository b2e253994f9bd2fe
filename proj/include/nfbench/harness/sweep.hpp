#pragma once

// Grids over {architecture x latent dimension x seed} and the
// concatenation-scheme ablation. Emits per-cell rows, an
// architecture-by-latent PSNR matrix, and a long-form file for plotting
// PSNR against latent size.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "nfbench/harness/experiment.hpp"

namespace nfbench {

struct SweepCell {
  std::string family;
  int latent_dim = 0;
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  double final_psnr = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
  std::string message;
};

struct SweepResult {
  std::vector<SweepCell> cells;

  double mean_psnr(const std::string& family, int latent_dim) const {
    double acc = 0;
    int n = 0;
    for (const SweepCell& c : cells)
      if (c.ok && c.family == family && c.latent_dim == latent_dim) {
        acc += c.final_psnr;
        ++n;
      }
    return n ? acc / n : std::numeric_limits<double>::quiet_NaN();
  }

  void write_summary(const std::string& path) const {
    std::ofstream os(path);
    require(os.good(), "sweep: cannot open '" + path + "'");
    os << "family,latent_dim,param_count,final_psnr,seed,status\n";
    os.precision(10);
    for (const SweepCell& c : cells)
      os << c.family << "," << c.latent_dim << "," << c.param_count << ","
         << c.final_psnr << "," << c.seed << ","
         << (c.ok ? "ok" : ("failed: " + c.message)) << "\n";
  }

  // architecture x latent-dimension matrix of seed-averaged PSNR
  void write_matrix(const std::string& path,
                    const std::vector<std::string>& families,
                    const std::vector<int>& latent_dims) const {
    std::ofstream os(path);
    require(os.good(), "sweep: cannot open '" + path + "'");
    os << "family";
    for (int n : latent_dims) os << ",N" << n;
    os << "\n";
    os.precision(6);
    for (const std::string& f : families) {
      os << f;
      for (int n : latent_dims) os << "," << mean_psnr(f, n);
      os << "\n";
    }
  }

  // long form (latent_dim, family, psnr): reconstruction quality against
  // latent code dimension, one line per point
  void write_plot_data(const std::string& path,
                       const std::vector<std::string>& families,
                       const std::vector<int>& latent_dims) const {
    std::ofstream os(path);
    require(os.good(), "sweep: cannot open '" + path + "'");
    os << "latent_dim,family,mean_psnr\n";
    os.precision(6);
    for (int n : latent_dims)
      for (const std::string& f : families)
        os << n << "," << f << "," << mean_psnr(f, n) << "\n";
  }
};

// Runs every (family, N, seed) cell from the base spec; partial failures
// are recorded and the sweep continues.
inline SweepResult run_sweep(const ExperimentSpec& base,
                             const std::vector<Family>& families,
                             const std::vector<int>& latent_dims,
                             const std::vector<std::uint64_t>& seeds) {
  SweepResult result;
  for (Family fam : families)
    for (int n : latent_dims)
      for (std::uint64_t seed : seeds) {
        ExperimentSpec spec = base;
        spec.decoder.family = fam;
        spec.decoder.latent_dim = n;
        spec.seed = seed;
        spec.name = std::string(family_name(fam)) + "_N" + std::to_string(n) +
                    "_s" + std::to_string(seed);
        if (!base.out_dir.empty()) spec.out_dir = base.out_dir + "/" + spec.name;
        SweepCell cell;
        cell.family = family_name(fam);
        cell.latent_dim = n;
        cell.seed = seed;
        try {
          resolve_decoder(spec);
          cell.param_count = count_params(spec.decoder);
          RunResult run = run_experiment(spec);
          cell.ok = run.ok;
          cell.final_psnr = run.final_psnr;
          cell.message = run.message;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.message = e.what();
        }
        result.cells.push_back(cell);
      }
  if (!base.out_dir.empty()) {
    std::filesystem::create_directories(base.out_dir);
    std::vector<std::string> fam_names;
    for (Family f : families) fam_names.push_back(family_name(f));
    result.write_summary(base.out_dir + "/summary.csv");
    result.write_matrix(base.out_dir + "/matrix.csv", fam_names, latent_dims);
    result.write_plot_data(base.out_dir + "/plot.csv", fam_names, latent_dims);
  }
  return result;
}

// ---------------------------------------------------------------------------
// concatenation-scheme ablation: five variants at a fixed latent dimension,
// identical in everything but the split schedule / skip connection

struct ConcatVariant {
  std::string label;
  int splits = 1;
  bool skip = false;
};

inline const std::vector<ConcatVariant>& concat_ablation_variants() {
  static const std::vector<ConcatVariant> kVariants = {
      {"8-way split", 8, false},
      {"4-way split", 4, false},
      {"2-way split", 2, false},
      {"1 skip connection", 1, true},
      {"no split or skip connection", 1, false},
  };
  return kVariants;
}

struct AblationRow {
  std::string label;
  double mean_psnr = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_seed;
  bool ok = true;
  std::string message;
};

inline std::vector<AblationRow> run_concat_ablation(
    const ExperimentSpec& base, const std::vector<std::uint64_t>& seeds) {
  require(base.decoder.family == Family::kConcat,
          "ablation: base spec must use the concat family");
  std::vector<AblationRow> rows;
  for (const ConcatVariant& v : concat_ablation_variants()) {
    AblationRow row;
    row.label = v.label;
    double acc = 0;
    int n = 0;
    for (std::uint64_t seed : seeds) {
      ExperimentSpec spec = base;
      spec.decoder.concat_splits = v.splits;
      spec.decoder.concat_skip = v.skip;
      spec.seed = seed;
      spec.name = "ablate_s" + std::to_string(v.splits) +
                  (v.skip ? "_skip" : "") + "_seed" + std::to_string(seed);
      if (!base.out_dir.empty()) spec.out_dir = base.out_dir + "/" + spec.name;
      try {
        RunResult run = run_experiment(spec);
        require(run.ok, run.message);
        row.per_seed.push_back(run.final_psnr);
        acc += run.final_psnr;
        ++n;
      } catch (const std::exception& e) {
        row.ok = false;
        row.message = e.what();
      }
    }
    if (n) row.mean_psnr = acc / n;
    rows.push_back(std::move(row));
  }
  if (!base.out_dir.empty()) {
    std::filesystem::create_directories(base.out_dir);
    std::ofstream os(base.out_dir + "/ablation.csv");
    os << "variant,mean_psnr,status\n";
    os.precision(6);
    for (const AblationRow& r : rows)
      os << "\"" << r.label << "\"," << r.mean_psnr << ","
         << (r.ok ? "ok" : r.message) << "\n";
  }
  return rows;
}

}  // namespace nfbench
