#pragma once

// Umbrella header for the full detection pipeline: geometry, truth encoding,
// tensor kernels, the chip network, masked loss, scene synthesis, training,
// sliding inference, evaluation and the on-disk formats.

#include "alien/codec.hpp"
#include "alien/error.hpp"
#include "alien/evaluation.hpp"
#include "alien/formats.hpp"
#include "alien/geometry.hpp"
#include "alien/image.hpp"
#include "alien/inference.hpp"
#include "alien/io.hpp"
#include "alien/loss.hpp"
#include "alien/model.hpp"
#include "alien/rng.hpp"
#include "alien/scene.hpp"
#include "alien/tensor.hpp"
#include "alien/trainer.hpp"
