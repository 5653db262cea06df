#pragma once

#include "depai/bundle.hpp"
#include "depai/config.hpp"
#include "depai/conllu.hpp"
#include "depai/error.hpp"
#include "depai/evalrep.hpp"
#include "depai/experiment.hpp"
#include "depai/featurize.hpp"
#include "depai/gbdt.hpp"
#include "depai/manifest.hpp"
