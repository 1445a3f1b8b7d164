#pragma once

#include <aca/analysis.hpp>
#include <aca/assignment.hpp>
#include <aca/bootstrap.hpp>
#include <aca/dataset.hpp>
#include <aca/error.hpp>
#include <aca/linreg.hpp>
#include <aca/model.hpp>
#include <aca/parallel.hpp>
#include <aca/pipeline.hpp>
#include <aca/random.hpp>
#include <aca/serialize.hpp>
#include <aca/synth.hpp>
