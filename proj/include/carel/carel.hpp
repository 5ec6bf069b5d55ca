#pragma once

#include "carel/adaptation.hpp"
#include "carel/autodiff.hpp"
#include "carel/checkpoint.hpp"
#include "carel/config.hpp"
#include "carel/corpus.hpp"
#include "carel/divergence.hpp"
#include "carel/emotion_model.hpp"
#include "carel/encoder.hpp"
#include "carel/gradcheck.hpp"
#include "carel/metrics.hpp"
#include "carel/pair_model.hpp"
#include "carel/params.hpp"
#include "carel/pipeline.hpp"
#include "carel/sparsemax.hpp"
#include "carel/types.hpp"
