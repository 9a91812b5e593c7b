#ifndef CWSIM_CWSIM_HPP
#define CWSIM_CWSIM_HPP

#include "cwsim/bath.hpp"
#include "cwsim/config.hpp"
#include "cwsim/io.hpp"
#include "cwsim/lattice.hpp"
#include "cwsim/model.hpp"
#include "cwsim/registration.hpp"
#include "cwsim/thermo.hpp"
#include "cwsim/truncation.hpp"

#endif  // CWSIM_CWSIM_HPP
