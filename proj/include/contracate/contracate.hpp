#pragma once

#include "contracate/error.hpp"
#include "contracate/version.hpp"

#include "contracate/nn/adam.hpp"
#include "contracate/nn/dense.hpp"
#include "contracate/nn/gradcheck.hpp"
#include "contracate/nn/layer_stack.hpp"
#include "contracate/nn/losses.hpp"
#include "contracate/nn/rng.hpp"
#include "contracate/nn/tensor.hpp"

#include "contracate/scm/dataset.hpp"
#include "contracate/scm/generators.hpp"

#include "contracate/mining/bucket_index.hpp"
#include "contracate/mining/triplets.hpp"

#include "contracate/model/any_model.hpp"
#include "contracate/model/cate_model.hpp"
#include "contracate/model/linear_model.hpp"
#include "contracate/model/ols.hpp"
#include "contracate/model/train.hpp"

#include "contracate/eval/metrics.hpp"
#include "contracate/eval/probe.hpp"
#include "contracate/eval/report.hpp"
#include "contracate/eval/sweep.hpp"
#include "contracate/eval/theorem1.hpp"

#include "contracate/io/augment.hpp"
#include "contracate/io/csv.hpp"
#include "contracate/io/manifest.hpp"
#include "contracate/io/pca.hpp"
#include "contracate/io/snapshot.hpp"
