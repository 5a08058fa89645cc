#pragma once

#include "betarep/annotation.hpp"
#include "betarep/beta_core.hpp"
#include "betarep/config.hpp"
#include "betarep/data_io.hpp"
#include "betarep/divergence.hpp"
#include "betarep/error.hpp"
#include "betarep/eval.hpp"
#include "betarep/geometry.hpp"
#include "betarep/head_codec.hpp"
#include "betarep/nms.hpp"
#include "betarep/parallel.hpp"
#include "betarep/special.hpp"
#include "betarep/synth.hpp"
