#ifndef FGP_FGP_HPP_
#define FGP_FGP_HPP_

// Everything except the JSON configuration layer (fgp/config.hpp), which
// needs nlohmann/json.

#include "fgp/basis.hpp"
#include "fgp/bench.hpp"
#include "fgp/block.hpp"
#include "fgp/car.hpp"
#include "fgp/csv.hpp"
#include "fgp/em.hpp"
#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/linalg.hpp"
#include "fgp/model.hpp"
#include "fgp/nelder_mead.hpp"
#include "fgp/parallel.hpp"
#include "fgp/predict.hpp"
#include "fgp/sim.hpp"
#include "fgp/timing.hpp"
#include "fgp/types.hpp"

#endif // FGP_FGP_HPP_
