// Umbrella header.

#ifndef DPCDVAE_DPCDVAE_HPP_
#define DPCDVAE_DPCDVAE_HPP_

#include "assignment.hpp"
#include "autodiff.hpp"
#include "diffusion.hpp"
#include "elements.hpp"
#include "error.hpp"
#include "graph.hpp"
#include "io.hpp"
#include "lattice.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "nn.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "synthetic.hpp"
#include "train.hpp"

#endif
