#pragma once

// Umbrella header.

#include "nfbench/conditioning/encoder.hpp"
#include "nfbench/conditioning/latent_table.hpp"
#include "nfbench/conditioning/objectives.hpp"
#include "nfbench/core/checkpoint.hpp"
#include "nfbench/core/graph.hpp"
#include "nfbench/core/param_store.hpp"
#include "nfbench/core/rng.hpp"
#include "nfbench/core/tensor.hpp"
#include "nfbench/data/image.hpp"
#include "nfbench/data/metrics.hpp"
#include "nfbench/data/mnist.hpp"
#include "nfbench/data/multiview.hpp"
#include "nfbench/data/tiled_mnist.hpp"
#include "nfbench/decoders/config.hpp"
#include "nfbench/decoders/decoder.hpp"
#include "nfbench/encoding/camera.hpp"
#include "nfbench/encoding/posenc.hpp"
#include "nfbench/harness/experiment.hpp"
#include "nfbench/harness/spec.hpp"
#include "nfbench/harness/sweep.hpp"
#include "nfbench/render/renderer.hpp"
#include "nfbench/render/sampling.hpp"
