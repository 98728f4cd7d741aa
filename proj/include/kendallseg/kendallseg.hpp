#pragma once

#include "kendallseg/alignment.hpp"
#include "kendallseg/clustering.hpp"
#include "kendallseg/error.hpp"
#include "kendallseg/io.hpp"
#include "kendallseg/segmenter.hpp"
#include "kendallseg/shape_space.hpp"
#include "kendallseg/synth.hpp"
