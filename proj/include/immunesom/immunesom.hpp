#pragma once

#include "immunesom/error.hpp"
#include "immunesom/rng.hpp"
#include "immunesom/signal_pipeline.hpp"
#include "immunesom/dca.hpp"
#include "immunesom/som.hpp"
#include "immunesom/segments.hpp"
#include "immunesom/rank_test.hpp"
#include "immunesom/kmeans.hpp"
#include "immunesom/datagen.hpp"
#include "immunesom/io.hpp"
