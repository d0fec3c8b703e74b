#include "stackseq/grad_check.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stackseq {

double relu_input_margin(const ModelD& model, const IntTensor& ids) {
  const double ln_eps = 1e-6;
  double margin = std::numeric_limits<double>::infinity();
  auto scan = [&margin](const TensorD& t) {
    for (int64_t i = 0; i < t.numel(); ++i) margin = std::min(margin, std::abs(t[i]));
  };
  TensorD h = kernels::embedding_lookup(model.embedding, ids);
  for (const auto& blk : model.blocks) {
    TensorD c1 = kernels::causal_conv1d(h, blk.conv1_w, blk.conv1_b, blk.dilation);
    TensorD n1 = kernels::layer_norm(c1, blk.ln1_gamma, blk.ln1_beta, ln_eps);
    scan(n1);
    TensorD r1 = kernels::relu(n1);
    TensorD c2 = kernels::causal_conv1d(r1, blk.conv2_w, blk.conv2_b, 2 * blk.dilation);
    TensorD n2 = kernels::layer_norm(c2, blk.ln2_gamma, blk.ln2_beta, ln_eps);
    scan(n2);
    TensorD r2 = kernels::relu(n2);
    h = kernels::scaled_residual_add(h, r2, blk.alpha[0]);
  }
  return margin;
}

GradCheckReport grad_check(ModelD& model, const std::function<double(const ModelD&)>& loss_fn,
                           const ModelGradsT<double>& analytic, const GradCheckOptions& options) {
  GradCheckReport report;

  std::vector<std::pair<std::string, TensorD*>> params;
  for_each_param(model, std::function<void(const std::string&, TensorD&)>(
                            [&](const std::string& name, TensorD& t) {
                              if (!options.only.empty() &&
                                  std::find(options.only.begin(), options.only.end(), name) ==
                                      options.only.end())
                                return;
                              params.emplace_back(name, &t);
                            }));
  std::vector<std::pair<std::string, const TensorD*>> grads;
  for_each_param(analytic, std::function<void(const std::string&, const TensorD&)>(
                               [&](const std::string& name, const TensorD& t) {
                                 grads.emplace_back(name, &t);
                               }));

  for (auto& [name, tensor] : params) {
    const TensorD* grad = nullptr;
    for (auto& [gname, gt] : grads)
      if (gname == name) grad = gt;
    if (!grad) continue;

    GradCheckEntry entry;
    entry.name = name;
    const int64_t n = tensor->numel();
    const int64_t stride = std::max<int64_t>(1, n / std::max<int64_t>(1, options.max_per_tensor));
    for (int64_t i = 0; i < n; i += stride) {
      double saved = (*tensor)[i];
      auto eval_at = [&](double offset) {
        (*tensor)[i] = saved + offset;
        double v = loss_fn(model);
        (*tensor)[i] = saved;
        return v;
      };
      double fd_full = (eval_at(options.step) - eval_at(-options.step)) / (2.0 * options.step);
      double fd = (eval_at(options.step / 2) - eval_at(-options.step / 2)) / options.step;
      if (std::abs(fd_full - fd) > 1e-3 * std::max(1.0, std::abs(fd))) {
        entry.skipped_nonsmooth += 1;
        report.skipped_nonsmooth += 1;
        entry.checked += 1;
        report.checked += 1;
        continue;
      }
      double an = (*grad)[i];
      double abs_err = std::abs(fd - an);
      // Floor keeps finite-difference noise on near-zero gradients from
      // registering as a large relative error.
      double rel_err = abs_err / std::max(std::abs(fd) + std::abs(an), 1e-4);
      entry.checked += 1;
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel_err);
      if (rel_err > report.max_rel_err) {
        report.max_rel_err = rel_err;
        report.worst_param = name;
        report.worst_index = i;
      }
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      report.checked += 1;
    }
    report.groups.push_back(std::move(entry));
  }
  return report;
}

}  // namespace stackseq
