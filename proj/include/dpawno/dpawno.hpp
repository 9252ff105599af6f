#pragma once

#include "dpawno/autodiff.hpp"
#include "dpawno/config.hpp"
#include "dpawno/datagen.hpp"
#include "dpawno/error.hpp"
#include "dpawno/grf.hpp"
#include "dpawno/io.hpp"
#include "dpawno/parallel.hpp"
#include "dpawno/physics.hpp"
#include "dpawno/reliability.hpp"
#include "dpawno/rng.hpp"
#include "dpawno/tensor.hpp"
#include "dpawno/training.hpp"
#include "dpawno/uq.hpp"
#include "dpawno/wavelet.hpp"
#include "dpawno/wno.hpp"
