#pragma once

#include "octden/checkpoint.hpp"
#include "octden/error.hpp"
#include "octden/filters.hpp"
#include "octden/gradcheck.hpp"
#include "octden/ground_truth.hpp"
#include "octden/image.hpp"
#include "octden/metrics.hpp"
#include "octden/model.hpp"
#include "octden/nn.hpp"
#include "octden/parallel.hpp"
#include "octden/registration.hpp"
#include "octden/report.hpp"
#include "octden/speckle.hpp"
#include "octden/tensor.hpp"
#include "octden/train.hpp"
