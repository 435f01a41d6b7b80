#pragma once

#include "advstyle/config.hpp"
#include "advstyle/corpus.hpp"
#include "advstyle/error.hpp"
#include "advstyle/gradcheck.hpp"
#include "advstyle/gradcheck_suite.hpp"
#include "advstyle/io.hpp"
#include "advstyle/layers.hpp"
#include "advstyle/losses.hpp"
#include "advstyle/networks.hpp"
#include "advstyle/optimizer.hpp"
#include "advstyle/ppm.hpp"
#include "advstyle/ranking.hpp"
#include "advstyle/serialize.hpp"
#include "advstyle/stat_ops.hpp"
#include "advstyle/tensor.hpp"
#include "advstyle/train.hpp"
