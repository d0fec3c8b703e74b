#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stackseq/model.h"

namespace stackseq {

// Central finite-difference validation of analytic gradients. Runs on the
// fp64 model; fp32 rounding would drown the comparison.
struct GradCheckOptions {
  double step = 1e-5;
  int64_t max_per_tensor = 24;      // evenly strided sample per tensor
  std::vector<std::string> only;    // empty = every parameter group
};

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  int64_t checked = 0;
  int64_t skipped_nonsmooth = 0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  int64_t checked = 0;
  // Coordinates where the difference quotient disagrees between step h and
  // h/2: the loss is not smooth there (a ReLU kink inside the stencil), so
  // a finite difference says nothing about the gradient. They are skipped
  // and counted; a real gradient bug still fails because both quotients
  // then agree with each other and not with the analytic value.
  int64_t skipped_nonsmooth = 0;
  std::vector<GradCheckEntry> groups;

  bool pass(double tolerance) const {
    return checked > 0 && checked > skipped_nonsmooth && max_rel_err < tolerance;
  }
};

// loss_fn must evaluate the same scalar loss the analytic grads were taken
// from; the model is perturbed in place and restored around each call.
GradCheckReport grad_check(ModelD& model, const std::function<double(const ModelD&)>& loss_fn,
                           const ModelGradsT<double>& analytic, const GradCheckOptions& options = {});

// Smallest |relu input| across both activation sites of every block for
// this batch. Central differences are trustworthy only when this margin is
// comfortably larger than the step times the local parameter sensitivity;
// callers should verify it before checking gradients.
double relu_input_margin(const ModelD& model, const IntTensor& ids);

}  // namespace stackseq
