#pragma once

#include <string>

#include "stackseq/model.h"

namespace stackseq {

// Single-file checkpoint container:
//   header line  "stackseq-checkpoint v1"
//   plain-text manifest of model config fields (key=value per line,
//   including the per-block dilation list, which stacking can decouple from
//   the base pattern), ending with "tensors=<count>"
//   then that many binary records, in for_each_param order, each
//   {u64le name length, utf-8 name, u64le rank, u64le dims, fp32le payload}.
// Round trips are byte-exact.
void save_checkpoint(const Model& model, const std::string& path);

Model load_checkpoint(const std::string& path);

}  // namespace stackseq
