#pragma once

#include "nemetyl/align.hpp"
#include "nemetyl/cluster.hpp"
#include "nemetyl/dissim.hpp"
#include "nemetyl/error.hpp"
#include "nemetyl/eval.hpp"
#include "nemetyl/ingest.hpp"
#include "nemetyl/model.hpp"
#include "nemetyl/pipeline.hpp"
#include "nemetyl/refine.hpp"
#include "nemetyl/segmenter.hpp"
