#pragma once

// Umbrella header for the subspace-clustering pipeline.

#include "ssc/affinity.hpp"
#include "ssc/block_diagonal.hpp"
#include "ssc/classifier.hpp"
#include "ssc/config.hpp"
#include "ssc/core.hpp"
#include "ssc/dataset.hpp"
#include "ssc/eigs.hpp"
#include "ssc/evaluate.hpp"
#include "ssc/grad_check.hpp"
#include "ssc/hungarian.hpp"
#include "ssc/io.hpp"
#include "ssc/layers.hpp"
#include "ssc/losses.hpp"
#include "ssc/model.hpp"
#include "ssc/optimizer.hpp"
#include "ssc/pseudo_labels.hpp"
#include "ssc/self_expression.hpp"
#include "ssc/spectral.hpp"
#include "ssc/tensor.hpp"
#include "ssc/trainer.hpp"
