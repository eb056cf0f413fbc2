#pragma once

#include <string>
#include <utility>
#include <vector>

#include "jarn/attacks.hpp"
#include "jarn/data.hpp"
#include "jarn/nn.hpp"

namespace jarn::report {

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

struct NamedAttack {
  std::string name;
  attacks::AttackConfig cfg;
};

struct AttackResult {
  std::string name;
  attacks::AttackConfig cfg;
  double accuracy = 0.0;  // percent
  int64_t samples = 0;
  double seconds = 0.0;
};

struct AlignmentStats {
  double mean_abs_cos = 0.0;
  double median_abs_cos = 0.0;
  int64_t samples = 0;
};

struct EvalReport {
  double clean_accuracy = 0.0;
  int64_t clean_samples = 0;
  double clean_seconds = 0.0;
  std::vector<AttackResult> attacks;
  AlignmentStats alignment;
  ConfigEcho config_echo;
};

struct EvalOptions {
  int64_t batch_size = 250;
  int64_t limit = -1;            // evaluate at most this many samples (-1 = all)
  uint64_t seed = 0;             // attack random starts
  bool with_alignment = true;
  int64_t alignment_samples = 1000;
};

// Clean accuracy plus accuracy under each listed attack over the split.
EvalReport robust_accuracy(const nn::ParameterStore& model, const data::DatasetHandle& dataset,
                           const std::vector<NamedAttack>& attack_list,
                           const EvalOptions& opt = {});

struct EpsilonSweep {
  std::vector<double> epsilons;        // ascending
  std::vector<int> iteration_counts;
  std::vector<std::vector<double>> accuracy;  // [eps][iters], percent
};

EpsilonSweep epsilon_sweep(const nn::ParameterStore& model, const data::DatasetHandle& dataset,
                           const std::vector<double>& epsilons,
                           const std::vector<int>& iteration_counts,
                           const attacks::AttackConfig& base, const EvalOptions& opt = {});

struct GridSpec {
  int resolution = 21;                // >= 3; odd keeps an exact zero center
  double a_extent = 0.3, b_extent = 0.3;  // symmetric axis ranges [-extent, extent]
};

struct LandscapeGrid {
  int resolution = 0;
  std::vector<double> a_values, b_values;
  std::vector<double> losses;  // row-major [a][b]
  Tensor u_adv, u_perp;        // unit directions, <u_adv, u_perp> ~ 0
  bool degenerate_gradient = false;  // zero input gradient; u_adv was random

  double at(int ai, int bi) const { return losses[static_cast<size_t>(ai) *
                                                  static_cast<size_t>(resolution) +
                                                  static_cast<size_t>(bi)]; }
};

// Loss surface around one sample along the signed-gradient direction and a
// random orthogonal direction: cell (a,b) = L(clip(x + a u_adv + b u_perp)).
LandscapeGrid loss_landscape(const nn::ParameterStore& model, const Tensor& image,
                             const Tensor& label, const GridSpec& grid, uint64_t seed);

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path,
                         const ConfigEcho& echo);

struct SaliencyExport {
  std::vector<std::string> pgm_paths;
  std::string raw_path;  // named-tensor dump of the raw Jacobians + images
};

// Per-sample input Jacobians rendered as min-max normalized 8-bit PGM images
// (mid-gray for an all-zero Jacobian) plus the raw tensor dump.
SaliencyExport jacobian_saliency_export(const nn::ParameterStore& model,
                                        const data::ImageBatch& batch,
                                        const std::string& out_dir, const std::string& prefix,
                                        const ConfigEcho& echo);

// Mean/median |cos(x, J)| over (up to) `limit` samples of the split.
AlignmentStats alignment_stats(const nn::ParameterStore& model,
                               const data::DatasetHandle& dataset, int64_t limit);

// Batch input Jacobian of the summed per-sample loss (detached values).
Tensor batch_jacobian(const nn::ParameterStore& model, const Tensor& images,
                      const Tensor& labels);

// format is "csv" or "json"; field order is deterministic either way.
void emit_report(const EvalReport& rep, const std::string& format, const std::string& path);

void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels, const ConfigEcho& comments);

}  // namespace jarn::report
