#pragma once

#include "survsel/arff.hpp"
#include "survsel/censoring.hpp"
#include "survsel/config.hpp"
#include "survsel/errors.hpp"
#include "survsel/evaluation.hpp"
#include "survsel/features.hpp"
#include "survsel/forest.hpp"
#include "survsel/gmeans.hpp"
#include "survsel/log.hpp"
#include "survsel/losses.hpp"
#include "survsel/parallel.hpp"
#include "survsel/scenario.hpp"
#include "survsel/selectors.hpp"
#include "survsel/step_function.hpp"
#include "survsel/survival_forest.hpp"
#include "survsel/synthetic.hpp"
#include "survsel/tuning.hpp"
#include "survsel/version.hpp"
