#ifndef QNDSIM_QNDSIM_HPP
#define QNDSIM_QNDSIM_HPP

// Measurement-induced collapse of lattice atom states under cavity photon
// counting: z-reduced trajectory engine, full-configuration oracle, and the
// run configuration / output layer used by the command-line tool.

#include "qndsim/config.hpp"
#include "qndsim/ensemble.hpp"
#include "qndsim/errors.hpp"
#include "qndsim/geometry.hpp"
#include "qndsim/io.hpp"
#include "qndsim/lattice.hpp"
#include "qndsim/oracle.hpp"
#include "qndsim/rng.hpp"
#include "qndsim/trajectory.hpp"
#include "qndsim/z_distribution.hpp"

#endif  // QNDSIM_QNDSIM_HPP
