#pragma once

#include "epi/error.hpp"
#include "epi/torus_grid.hpp"
#include "epi/kernel.hpp"
#include "epi/convolution.hpp"
#include "epi/rng.hpp"
#include "epi/sum_tree.hpp"
#include "epi/profile.hpp"
#include "epi/particle_sim.hpp"
#include "epi/hydro_pde.hpp"
#include "epi/meanfield.hpp"
#include "epi/final_density.hpp"
#include "epi/config.hpp"
#include "epi/output.hpp"
#include "epi/experiments.hpp"
#include "epi/commands.hpp"
