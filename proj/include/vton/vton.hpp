#ifndef VTON_VTON_HPP
#define VTON_VTON_HPP

#include "vton/data/synthetic.hpp"
#include "vton/pipeline/ablate.hpp"
#include "vton/pipeline/evaluate.hpp"

#endif  // VTON_VTON_HPP
