#include "jarn/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "jarn/checkpoint.hpp"
#include "jarn/errors.hpp"
#include "jarn/ops.hpp"
#include "jarn/rng.hpp"

namespace jarn::report {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Tensor batch_jacobian(const nn::ParameterStore& model, const Tensor& images,
                      const Tensor& labels) {
  auto tape = Tape::create();
  nn::BoundParams bound = nn::bind(*tape, model);
  Tensor x = tape->leaf(images);
  Tensor y = tape->leaf(labels);
  Tensor loss = ops::sum_all(ops::softmax_cross_entropy(nn::forward_logits(bound, x), y));
  return gradient(loss, x, /*differentiable=*/false)[0];
}

EvalReport robust_accuracy(const nn::ParameterStore& model, const data::DatasetHandle& dataset,
                           const std::vector<NamedAttack>& attack_list, const EvalOptions& opt) {
  if (dataset.count == 0) throw PreconditionError("robust_accuracy: dataset is empty");
  const int64_t total = opt.limit < 0 ? dataset.count : std::min(opt.limit, dataset.count);

  EvalReport rep;
  rep.clean_samples = total;
  std::vector<int64_t> order(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;

  auto correct_count = [&model](const data::ImageBatch& b) {
    const std::vector<int> pred = nn::predict_classes(model, b.images);
    int64_t hits = 0;
    for (int64_t i = 0; i < b.count(); ++i) {
      if (pred[static_cast<size_t>(i)] == data::label_of(b, i)) ++hits;
    }
    return hits;
  };

  {
    const auto t0 = Clock::now();
    int64_t hits = 0;
    for (int64_t off = 0; off < total; off += opt.batch_size) {
      hits += correct_count(data::make_batch(dataset, order, off, opt.batch_size));
    }
    rep.clean_accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    rep.clean_seconds = seconds_since(t0);
  }

  for (const NamedAttack& na : attack_list) {
    const auto t0 = Clock::now();
    int64_t hits = 0;
    for (int64_t off = 0; off < total; off += opt.batch_size) {
      data::ImageBatch b = data::make_batch(dataset, order, off, opt.batch_size);
      attacks::AdvBatch adv = attacks::pgd(model, b, na.cfg, opt.seed ^ fnv1a64(na.name));
      for (int64_t i = 0; i < b.count(); ++i) {
        if (!adv.success[static_cast<size_t>(i)]) ++hits;
      }
    }
    AttackResult r;
    r.name = na.name;
    r.cfg = na.cfg;
    r.samples = total;
    r.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(total);
    r.seconds = seconds_since(t0);
    rep.attacks.push_back(std::move(r));
  }

  if (opt.with_alignment) {
    rep.alignment = alignment_stats(model, dataset, std::min(total, opt.alignment_samples));
  }
  return rep;
}

EpsilonSweep epsilon_sweep(const nn::ParameterStore& model, const data::DatasetHandle& dataset,
                           const std::vector<double>& epsilons,
                           const std::vector<int>& iteration_counts,
                           const attacks::AttackConfig& base, const EvalOptions& opt) {
  if (epsilons.empty()) throw PreconditionError("epsilon_sweep: epsilon list is empty");
  for (size_t i = 1; i < epsilons.size(); ++i) {
    if (epsilons[i] <= epsilons[i - 1]) {
      throw PreconditionError("epsilon_sweep: epsilon list must be strictly ascending");
    }
  }
  EpsilonSweep sweep;
  sweep.epsilons = epsilons;
  sweep.iteration_counts = iteration_counts;
  for (double eps : epsilons) {
    std::vector<double> row;
    for (int iters : iteration_counts) {
      attacks::AttackConfig cfg = base;
      cfg.epsilon = eps;
      cfg.iterations = iters;
      std::vector<NamedAttack> one{{"sweep", cfg}};
      EvalOptions o = opt;
      o.with_alignment = false;
      if (eps == 0.0) {
        // zero-radius ball: accuracy equals clean accuracy by definition
        EvalReport r = robust_accuracy(model, dataset, {}, o);
        row.push_back(r.clean_accuracy);
      } else {
        EvalReport r = robust_accuracy(model, dataset, one, o);
        row.push_back(r.attacks[0].accuracy);
      }
    }
    sweep.accuracy.push_back(std::move(row));
  }
  return sweep;
}

LandscapeGrid loss_landscape(const nn::ParameterStore& model, const Tensor& image,
                             const Tensor& label, const GridSpec& grid, uint64_t seed) {
  if (grid.resolution < 3) throw PreconditionError("loss_landscape: resolution must be >= 3");
  if (image.shape().size() != 4 || image.shape()[0] != 1) {
    throw ShapeError("loss_landscape: expected a single [1,h,w,c] image, got " +
                     shape_str(image.shape()));
  }

  LandscapeGrid out;
  out.resolution = grid.resolution;

  Tensor g = batch_jacobian(model, image, label);
  const size_t d = g.values().size();
  std::vector<double> u_adv(d);
  double norm2 = 0.0;
  for (size_t i = 0; i < d; ++i) {
    u_adv[i] = g.values()[i] > 0.0 ? 1.0 : (g.values()[i] < 0.0 ? -1.0 : 0.0);
    norm2 += u_adv[i] * u_adv[i];
  }
  Rng rng(seed_for(seed, "landscape"));
  if (norm2 == 0.0) {
    out.degenerate_gradient = true;
    for (auto& v : u_adv) v = rng.normal();
    norm2 = 0.0;
    for (double v : u_adv) norm2 += v * v;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (auto& v : u_adv) v *= inv;

  // Random direction, Gram-Schmidt-orthogonalized against u_adv.
  std::vector<double> u_perp(d);
  double rnorm2 = 0.0;
  do {
    for (auto& v : u_perp) v = rng.normal();
    double dot = 0.0;
    for (size_t i = 0; i < d; ++i) dot += u_perp[i] * u_adv[i];
    rnorm2 = 0.0;
    for (size_t i = 0; i < d; ++i) {
      u_perp[i] -= dot * u_adv[i];
      rnorm2 += u_perp[i] * u_perp[i];
    }
  } while (rnorm2 < 1e-24);
  inv = 1.0 / std::sqrt(rnorm2);
  for (auto& v : u_perp) v *= inv;

  const int res = grid.resolution;
  const int center = (res - 1) / 2;
  auto axis = [&](double extent) {
    std::vector<double> vals(static_cast<size_t>(res));
    for (int i = 0; i < res; ++i) {
      if (res % 2 == 1) {
        // (i - c)/c * extent puts an exact 0.0 at the center cell
        vals[static_cast<size_t>(i)] =
            extent * static_cast<double>(i - center) / static_cast<double>(center);
      } else {
        vals[static_cast<size_t>(i)] =
            -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(res - 1);
      }
    }
    return vals;
  };
  out.a_values = axis(grid.a_extent);
  out.b_values = axis(grid.b_extent);

  const auto& x0 = image.values();
  out.losses.resize(static_cast<size_t>(res) * static_cast<size_t>(res));
  std::vector<double> xg(d);
  for (int ai = 0; ai < res; ++ai) {
    for (int bi = 0; bi < res; ++bi) {
      const double a = out.a_values[static_cast<size_t>(ai)];
      const double b = out.b_values[static_cast<size_t>(bi)];
      for (size_t i = 0; i < d; ++i) {
        xg[i] = std::clamp(x0[i] + a * u_adv[i] + b * u_perp[i], 0.0, 1.0);
      }
      const double loss =
          attacks::per_sample_losses(model, Tensor(image.shape(), xg), label)[0];
      out.losses[static_cast<size_t>(ai) * static_cast<size_t>(res) + static_cast<size_t>(bi)] =
          loss;
    }
  }
  out.u_adv = Tensor(image.shape(), std::move(u_adv));
  out.u_perp = Tensor(image.shape(), std::move(u_perp));
  return out;
}

void write_landscape_csv(const LandscapeGrid& grid, const std::string& path,
                         const ConfigEcho& echo) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("landscape: cannot open for writing: " + path);
  for (const auto& [k, v] : echo) os << "# " << k << "=" << v << "\n";
  os << "# degenerate_gradient=" << (grid.degenerate_gradient ? 1 : 0) << "\n";
  os << "a,b,loss\n";
  for (int ai = 0; ai < grid.resolution; ++ai) {
    for (int bi = 0; bi < grid.resolution; ++bi) {
      os << fmt17(grid.a_values[static_cast<size_t>(ai)]) << ','
         << fmt17(grid.b_values[static_cast<size_t>(bi)]) << ',' << fmt17(grid.at(ai, bi))
         << '\n';
    }
  }
  if (!os.flush()) throw IoError("landscape: write failed: " + path);
}

void write_pgm(const std::string& path, int64_t width, int64_t height,
               const std::vector<uint8_t>& pixels, const ConfigEcho& comments) {
  if (static_cast<int64_t>(pixels.size()) != width * height) {
    throw PreconditionError("pgm: pixel count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("pgm: cannot open for writing: " + path);
  os << "P5\n";
  for (const auto& [k, v] : comments) os << "# " << k << "=" << v << "\n";
  os << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os.flush()) throw IoError("pgm: write failed: " + path);
}

SaliencyExport jacobian_saliency_export(const nn::ParameterStore& model,
                                        const data::ImageBatch& batch,
                                        const std::string& out_dir, const std::string& prefix,
                                        const ConfigEcho& echo) {
  SaliencyExport out;
  Tensor jac = batch_jacobian(model, batch.images, batch.labels);
  const Shape& s = jac.shape();
  const int64_t n = s[0], h = s[1], w = s[2], c = s[3];
  const auto& jv = jac.values();

  for (int64_t i = 0; i < n; ++i) {
    for (int64_t ch = 0; ch < c; ++ch) {
      double lo = 1e308, hi = -1e308;
      for (int64_t p = 0; p < h * w; ++p) {
        const double v = jv[static_cast<size_t>((i * h * w + p) * c + ch)];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      std::vector<uint8_t> img(static_cast<size_t>(h * w));
      const double range = hi - lo;
      for (int64_t p = 0; p < h * w; ++p) {
        const double v = jv[static_cast<size_t>((i * h * w + p) * c + ch)];
        // mid-gray when the Jacobian has zero range
        img[static_cast<size_t>(p)] =
            range == 0.0 ? 128 : static_cast<uint8_t>(std::lround(255.0 * (v - lo) / range));
      }
      char name[160];
      if (c == 1) {
        std::snprintf(name, sizeof(name), "%s/%s_%03lld.pgm", out_dir.c_str(), prefix.c_str(),
                      static_cast<long long>(i));
      } else {
        std::snprintf(name, sizeof(name), "%s/%s_%03lld_c%lld.pgm", out_dir.c_str(),
                      prefix.c_str(), static_cast<long long>(i), static_cast<long long>(ch));
      }
      write_pgm(name, w, h, img, echo);
      out.pgm_paths.push_back(name);
    }
  }

  out.raw_path = out_dir + "/" + prefix + "_raw.bin";
  checkpoint::save_tensors({{"jacobian", jac}, {"images", batch.images.detached()}},
                           out.raw_path);
  return out;
}

AlignmentStats alignment_stats(const nn::ParameterStore& model,
                               const data::DatasetHandle& dataset, int64_t limit) {
  if (dataset.count == 0) throw PreconditionError("alignment_stats: dataset is empty");
  const int64_t total = std::min(limit, dataset.count);
  std::vector<int64_t> order(static_cast<size_t>(total));
  for (int64_t i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;

  std::vector<double> cosines;
  cosines.reserve(static_cast<size_t>(total));
  const int64_t bs = 250;
  for (int64_t off = 0; off < total; off += bs) {
    data::ImageBatch b = data::make_batch(dataset, order, off, bs);
    Tensor jac = batch_jacobian(model, b.images, b.labels);
    const int64_t n = b.count();
    const int64_t px = jac.size() / n;
    const auto& jv = jac.values();
    const auto& xv = b.images.values();
    for (int64_t i = 0; i < n; ++i) {
      double dot = 0.0, nx = 0.0, nj = 0.0;
      for (int64_t p = 0; p < px; ++p) {
        const auto idx = static_cast<size_t>(i * px + p);
        dot += jv[idx] * xv[idx];
        nx += xv[idx] * xv[idx];
        nj += jv[idx] * jv[idx];
      }
      cosines.push_back(nx == 0.0 || nj == 0.0 ? 0.0
                                               : std::abs(dot) / std::sqrt(nx * nj));
    }
  }
  AlignmentStats st;
  st.samples = static_cast<int64_t>(cosines.size());
  double sum = 0.0;
  for (double v : cosines) sum += v;
  st.mean_abs_cos = sum / static_cast<double>(cosines.size());
  std::sort(cosines.begin(), cosines.end());
  const size_t mid = cosines.size() / 2;
  st.median_abs_cos = cosines.size() % 2 == 1
                          ? cosines[mid]
                          : 0.5 * (cosines[mid - 1] + cosines[mid]);
  return st;
}

namespace {

nlohmann::ordered_json report_json(const EvalReport& rep) {
  nlohmann::ordered_json j;
  j["schema"] = "jarn-eval-report/1";
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rep.config_echo) cfg[k] = v;
  j["config"] = cfg;
  j["clean"] = {{"accuracy_percent", rep.clean_accuracy},
                {"samples", rep.clean_samples},
                {"seconds", rep.clean_seconds}};
  j["attacks"] = nlohmann::ordered_json::array();
  for (const AttackResult& a : rep.attacks) {
    j["attacks"].push_back({{"name", a.name},
                            {"epsilon", a.cfg.epsilon},
                            {"iterations", a.cfg.iterations},
                            {"eta", a.cfg.step_size()},
                            {"random_start", a.cfg.random_start},
                            {"accuracy_percent", a.accuracy},
                            {"samples", a.samples},
                            {"seconds", a.seconds}});
  }
  j["alignment"] = {{"mean_abs_cos", rep.alignment.mean_abs_cos},
                    {"median_abs_cos", rep.alignment.median_abs_cos},
                    {"samples", rep.alignment.samples}};
  return j;
}

}  // namespace

void emit_report(const EvalReport& rep, const std::string& format, const std::string& path) {
  if (format == "json") {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("report: cannot open for writing: " + path);
    os << report_json(rep).dump(2) << '\n';
    if (!os.flush()) throw IoError("report: write failed: " + path);
    return;
  }
  if (format != "csv") {
    throw PreconditionError("report: unknown format '" + format + "' (expected csv or json)");
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("report: cannot open for writing: " + path);
  for (const auto& [k, v] : rep.config_echo) os << "# " << k << "=" << v << "\n";
  os << "name,epsilon,iterations,eta,random_start,accuracy_percent,samples,seconds\n";
  os << "clean,0,0,0,0," << fmt17(rep.clean_accuracy) << ',' << rep.clean_samples << ','
     << fmt17(rep.clean_seconds) << '\n';
  for (const AttackResult& a : rep.attacks) {
    os << a.name << ',' << fmt17(a.cfg.epsilon) << ',' << a.cfg.iterations << ','
       << fmt17(a.cfg.step_size()) << ',' << (a.cfg.random_start ? 1 : 0) << ','
       << fmt17(a.accuracy) << ',' << a.samples << ',' << fmt17(a.seconds) << '\n';
  }
  if (!os.flush()) throw IoError("report: write failed: " + path);
}

}  // namespace jarn::report
